#pragma once

#include "dfa/dynamics.hpp"
#include "dfa/fit.hpp"
#include "dfa/model.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace dfa {

struct SimConfig {
  int n_items = 150;
  int n_conditions = 10;
  int n_covariates = 2;  // locations uniform on [0, 1]^p
  int k = 10;

  // Generating hyperparameters.
  double tau_s = 2.0;
  double tau_u = 2.0;
  DeltaCovariance delta_covariance = DeltaCovariance::Diagonal;
  double sigma_delta = 1.0;  // diagonal mode
  Vec sigma, rho;            // low-rank mode; sigma defaults to sigma_delta, rho to 0
  double xi = 0.0;
  Vec fixed_delta;           // when set, used instead of a draw of delta

  double mask_fraction = 0.2;
  int replications = 20;
  std::uint64_t seed = 1;
  double epsilon = 0.01;

  // Drug mode. A supplied B map takes precedence over the generated one, which
  // gives the first n_anchor conditions a single drug of their own and the rest
  // between min_drugs and max_drugs drugs.
  IntMat drug_condition;
  int n_anchor = 3;
  int min_drugs = 2;
  int max_drugs = 3;

  // Longitudinal data: visits are scheduled every visit_interval time units
  // and each scheduled visit after the first is missed with miss_prob.
  int n_visits = 4;
  OuParams ou;
  double visit_interval = 1.0;
  double miss_prob = 0.2;

  // Fitting inside the FDR study.
  SamplerConfig sampler{500, 500, 0.8, 10, 1, 4};

  void validate() const;
};

struct GroundTruth {
  Vec phi;
  Vec delta;
  Mat lambda;  // I x C
  IntMat a;    // complete (latent in drug mode)
  ItemGraph graph;
};

struct SimulatedData {
  Dataset data;
  GroundTruth truth;
};

struct DynamicTruth {
  Mat phi;  // I x (T+1)
  Vec delta;
  std::vector<IntMat> a;
  ItemGraph graph;
};

struct SimulatedLongitudinal {
  LongitudinalDataset data;
  DynamicTruth truth;
};

SimulatedData generate_static(const SimConfig& cfg, std::uint64_t seed);
SimulatedData generate_polypharmacy(const SimConfig& cfg, std::uint64_t seed);
// With n_visits = 1 the covariates, phi, delta and A equal generate_static's.
SimulatedLongitudinal generate_dynamic(const SimConfig& cfg, std::uint64_t seed);

struct MaskedData {
  IntMat a_obs;
  std::vector<Index> cells;  // column-major linear indices, ascending
};

// Masks round-half-up(fraction * n) of the observed cells (at least one),
// chosen uniformly at random.
MaskedData mask_entries(const IntMat& a, double fraction, std::uint64_t seed);

struct Discoveries {
  int discoveries = 0;
  int false_discoveries = 0;
  int positives = 0;  // truth 1 among the evaluated cells
  double fdr = 0.0;
  bool none = false;  // no discoveries; fdr recorded as 0
};

// Cells with logistic(lambda) > threshold are discoveries.
Discoveries count_discoveries(const IntMat& truth, const Mat& lambda,
                              const std::vector<Index>& cells, double threshold = 0.5);

struct FdrReplication {
  int replication = 0;
  std::uint64_t seed = 0;
  int masked = 0;
  Discoveries model, oracle;
  double correlation = 0.0;  // true vs posterior-mean Lambda on masked cells
  double max_rhat = 1.0;
};

struct LambdaPair {
  int replication;
  double truth;
  double estimate;
};

struct FdrReport {
  std::vector<FdrReplication> replications;
  double mean_model_fdr = 0.0;
  double mean_oracle_fdr = 0.0;
  double mean_correlation = 0.0;
  std::vector<LambdaPair> lambda_pairs;  // masked cells, replication order
};

// Returns the posterior-mean Lambda (I x C) for a masked dataset, plus the
// largest R-hat when known.
struct LambdaEstimate {
  Mat lambda;
  double max_rhat = 1.0;
};
using LambdaFitter = std::function<LambdaEstimate(const Dataset& masked, const SimConfig& cfg,
                                                  std::uint64_t seed)>;
LambdaEstimate fit_posterior_lambda(const Dataset& masked, const SimConfig& cfg,
                                    std::uint64_t seed);

// Replication r uses seed derive_seed(cfg.seed, r) and its children 0 (data),
// 1 (mask) and 2 (fit).
FdrReport fdr_study(const SimConfig& cfg, int workers = 1,
                    const LambdaFitter& fitter = fit_posterior_lambda);

struct ConfusionMatrix {
  Mat rates;               // 2 x 2; row = truth, column = prediction
  Eigen::Matrix2i counts;
};

// Probabilities strictly above `threshold` predict 1. Only `cells` are
// evaluated when given; cells with missing truth are skipped.
ConfusionMatrix confusion(const IntMat& truth, const Mat& prob, double threshold = 0.5,
                          const std::vector<Index>* cells = nullptr);

}  // namespace dfa
