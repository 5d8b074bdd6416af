#pragma once

#include "dfa/common.hpp"
#include "dfa/gmrf.hpp"
#include "dfa/graph.hpp"
#include "dfa/samples.hpp"
#include "dfa/transforms.hpp"

#include <Eigen/Cholesky>

#include <memory>
#include <string>
#include <vector>

namespace dfa {

// Direct: A is observed (possibly with missing cells).
// Drug:   A is latent; each item reports a drug set, linked to conditions by B.
enum class LikelihoodMode { Direct, Drug };

// Diagonal: Sigma_delta = sigma_delta^2 I.
// LowRank:  Sigma_cc = sigma_c^2, Sigma_cc' = xi rho_c rho_c' sigma_c sigma_c'.
enum class DeltaCovariance { Diagonal, LowRank };

struct Dataset {
  Mat covariates;                          // I x p; row order is item index
  IntMat a_obs;                            // I x C over {0, 1, kMissing}; direct mode
  std::vector<std::vector<int>> drug_sets; // per item, 0-based drug ids; drug mode
  IntMat drug_condition;                   // D x C, B_dc in {0, 1}; drug mode
  LikelihoodMode mode = LikelihoodMode::Direct;

  Index n_items() const { return covariates.rows(); }
  Index n_conditions() const;
  Index n_drugs() const { return drug_condition.rows(); }

  // Throws DataError describing the first violated invariant.
  void validate() const;
  Dataset subset(const std::vector<int>& items) const;
};

struct ModelConfig {
  DeltaCovariance delta_covariance = DeltaCovariance::LowRank;
  double epsilon = 0.01;
};

struct StaticParams {
  Vec phi;     // I
  Vec delta;   // C
  double tau_s = 1.0;
  double tau_u = 1.0;
  Vec sigma;   // 1 (diagonal) or C (low rank)
  Vec rho;     // C (low rank) or empty
  double xi = 0.0;
};

// Dense low-rank-plus-diagonal covariance of the condition effects, factorized.
//
// If the Cholesky factorization fails, jitter j * 1e-8 * mean(sigma^2) is added
// to the diagonal for j = 1, 10, 100, 1000; past that DataError is thrown.
class LowRankCov {
 public:
  static constexpr double kJitterScale = 1e-8;
  static constexpr int kMaxJitterSteps = 4;

  LowRankCov(Vec sigma, Vec rho, double xi);

  Index dim() const { return cov_.rows(); }
  const Mat& matrix() const { return cov_; }
  double jitter() const { return jitter_; }
  double logdet() const { return logdet_; }

  double logpdf(const Vec& delta) const;

  struct Grad {
    Vec delta, sigma, rho;
    double xi = 0.0;
  };
  // log N(delta; 0, Sigma) and its gradient in delta, sigma, rho, xi.
  double logpdf_grad(const Vec& delta, Grad& g) const;

 private:
  Vec sigma_, rho_;
  double xi_;
  Mat cov_;
  Eigen::LLT<Mat> llt_;
  double jitter_ = 0.0;
  double jitter_mult_ = 0.0;
  double logdet_ = 0.0;
};

LowRankCov lowrank_sigma(const Vec& sigma, const Vec& rho, double xi);

// Lambda_ic = phi_i + delta_c.
Mat logit_surface(const Vec& phi, const Vec& delta);

// Sum over non-missing cells of A*Lambda - log(1 + exp(Lambda)).
double bernoulli_loglik(const IntMat& a_obs, const Mat& lambda);

// log L(1), log L(0) for one (item, condition) cell: n_indicated drugs map to
// the condition and n_present of them are in the item's drug set. Indicated
// drugs appear with probability (1-eps)/n_indicated when the condition is
// present and eps when absent.
struct DrugEvidence {
  double log_l1;
  double log_l0;
};
DrugEvidence drug_evidence(int n_indicated, int n_present, double epsilon);

// log[p L(1) + (1-p) L(0)] with p = logistic(lambda_ic).
double drug_cell_loglik(Index c, const std::vector<int>& drug_set, const IntMat& drug_condition,
                        double lambda_ic, double epsilon);

// Precomputed per-cell likelihood of one observation matrix (one visit).
class CellLikelihood {
 public:
  CellLikelihood() = default;
  // Direct mode reads a_obs; drug mode reads drug_sets and B.
  CellLikelihood(LikelihoodMode mode, const IntMat& a_obs,
                 const std::vector<std::vector<int>>& drug_sets, const IntMat& drug_condition,
                 double epsilon);
  CellLikelihood(const Dataset& data, double epsilon);

  Index n_items() const { return n_items_; }
  Index n_conditions() const { return n_conditions_; }

  // Sum of cell log-likelihoods. d/dLambda_ic is accumulated into the row sums
  // (g_phi) and column sums (g_delta) when those are non-null.
  double evaluate(const Vec& phi, const Vec& delta, Vec* g_phi, Vec* g_delta) const;

  // P(A_ic = 1 | Lambda_ic, evidence). Direct mode returns logistic(lambda).
  double posterior_prob(Index i, Index c, double lambda) const;

 private:
  LikelihoodMode mode_ = LikelihoodMode::Direct;
  Index n_items_ = 0;
  Index n_conditions_ = 0;
  IntMat a_;
  Mat log_l1_, log_l0_;
};

// Log-densities of the scalar priors. `grad`, when non-null, receives d/dx.
namespace prior {
double half_cauchy(double x, double scale, double* grad);
double half_normal(double x, double scale, double* grad);
// Normal(0, sd^2) truncated to (-1, 1).
double truncated_normal(double x, double sd, double* grad);
double uniform_symmetric(double x);
double beta(double x, double a, double b, double* grad);

inline constexpr double kTauScale = 2.0;     // Half-Cauchy scale for tau_s, tau_u
inline constexpr double kSigmaDeltaScale = 2.0;  // Half-Cauchy scale, diagonal mode
inline constexpr double kSigmaScale = 1.0;   // Half-Normal scale for sigma_c
inline constexpr double kRhoSd = 0.1;        // TN(0, 0.01) on (-1, 1)
}  // namespace prior

// BYM log-density of phi with precision tau_s L + tau_u I. When `grad` is
// given it is filled with [d/dphi..., d/dtau_s, d/dtau_u]. Returns -inf when
// the precision is not positive definite. With a spectrum of `lap` the
// log-determinant and traces come from the eigenvalues instead of a sparse
// factorization.
double bym_log_density(const Vec& phi, const SparseSymMatrix& lap, double tau_s, double tau_u,
                       Vec* grad, const LaplacianSpectrum* spectrum = nullptr);

// Graphs up to this size get a precomputed Laplacian spectrum.
inline constexpr Index kSpectralMaxItems = 2500;

// Prior block for delta and its covariance hyperparameters (MVN density plus
// the sigma / rho / xi priors). Gradient pieces are written into `g` if given.
struct DeltaBlockGrad {
  Vec delta, sigma, rho;
  double xi = 0.0;
};
double delta_block_log_prior(const Vec& delta, const Vec& sigma, const Vec& rho, double xi,
                             DeltaCovariance mode, DeltaBlockGrad* g);

// Offsets of each parameter block in the flattened vector
// [phi | delta | tau_s | tau_u | sigma | rho | xi].
struct StaticLayout {
  StaticLayout() = default;
  StaticLayout(Index n_items, Index n_conditions, DeltaCovariance mode);

  Index n_items = 0, n_conditions = 0;
  DeltaCovariance mode = DeltaCovariance::LowRank;
  Index phi = 0, delta = 0, tau_s = 0, tau_u = 0, sigma = 0, rho = 0, xi = 0;
  Index n_sigma = 0, n_rho = 0, n_xi = 0;
  Index dim = 0;
};

class StaticModel {
 public:
  StaticModel(Dataset data, SparseSymMatrix lap, ModelConfig cfg);
  // Builds the k-NN graph over the dataset covariates.
  static StaticModel from_dataset(Dataset data, int k, ModelConfig cfg,
                                  const Metric& metric = Metric::euclidean());

  const Dataset& data() const { return data_; }
  const SparseSymMatrix& laplacian() const { return lap_; }
  const ModelConfig& config() const { return cfg_; }
  const StaticLayout& layout() const { return layout_; }
  const CellLikelihood& likelihood() const { return lik_; }
  Index dim() const { return layout_.dim; }

  std::vector<std::string> param_names() const;
  TransformSpec transforms() const;
  Vec flatten(const StaticParams& p) const;
  StaticParams unflatten(const Vec& x) const;
  bool in_support(const StaticParams& p) const;

  double log_prior(const StaticParams& p) const;
  double log_likelihood(const StaticParams& p) const;
  // Joint log-posterior on the constrained scale; -inf outside the support.
  double log_posterior(const Vec& x, Vec* grad = nullptr) const;

 private:
  Dataset data_;
  SparseSymMatrix lap_;
  ModelConfig cfg_;
  StaticLayout layout_;
  CellLikelihood lik_;
  std::shared_ptr<const LaplacianSpectrum> spectrum_;
};

struct LogDensity {
  double value;
  Vec gradient;  // flattened, StaticLayout order
};

double log_prior(const StaticParams& p, const SparseSymMatrix& lap, DeltaCovariance mode);
LogDensity joint_logpost(const StaticParams& p, const Dataset& data, const ItemGraph& graph,
                         const ModelConfig& cfg);

// Mean over draws of P(A_ic = 1 | Lambda_ic^(s), drugs). I x C.
Mat posterior_condition_prob(const PosteriorSamples& samples, const StaticModel& model);
Mat posterior_condition_prob(const PosteriorSamples& samples, const CellLikelihood& lik);

}  // namespace dfa
