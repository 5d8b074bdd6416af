#pragma once

#include "dfa/model.hpp"

#include <string>
#include <vector>

namespace dfa {

struct OuParams {
  double rho_ou = 0.5;
  double sigma_ou = 1.0;
};

// N(rho^dt phi_prev, sigma^2 (1 - rho^(2 dt))) independently per coordinate.
double ou_transition_logpdf(const Vec& phi_t, const Vec& phi_prev, double dt, OuParams ou);

// Per-item visit timestamps and one observation matrix per visit index.
// Items share the visit count T+1 but not the timestamps; a missed visit shows
// up as a longer gap before the next one.
struct LongitudinalDataset {
  Mat covariates;  // I x p
  Mat times;       // I x (T+1), strictly increasing along each row
  std::vector<IntMat> a_obs;                                // per visit, I x C
  std::vector<std::vector<std::vector<int>>> drug_sets;     // per visit, per item
  IntMat drug_condition;
  LikelihoodMode mode = LikelihoodMode::Direct;

  Index n_items() const { return covariates.rows(); }
  Index n_visits() const { return times.cols(); }
  Index n_conditions() const;

  void validate() const;
  // Cross-sectional view of visit t.
  Dataset visit(Index t) const;
  LongitudinalDataset subset(const std::vector<int>& items) const;
};

struct DynamicParams {
  Mat phi;  // I x (T+1); column t is phi_t
  Vec delta;
  double tau_s = 1.0;
  double tau_u = 1.0;
  Vec sigma, rho;
  double xi = 0.0;
  OuParams ou;
};

struct DynamicConfig {
  DeltaCovariance delta_covariance = DeltaCovariance::LowRank;
  double epsilon = 0.01;
  // Off only in tests: drops tau_s L + tau_u I from the transition steps.
  bool spatial_potential = true;
};

// Gaussian conditional of phi_t given phi_{t-1} under the OU transition times
// the spatial potential: precision P = diag(1 / v) + tau_s L + tau_u I and
// mean P^{-1} (a / v) phi_{t-1}, with a = rho^dt and v = sigma^2 (1 - rho^(2 dt)).
struct TransitionStep {
  Vec a, v;
  SparseSymMatrix precision;
  Vec mean;
};
TransitionStep transition_step(const Vec& phi_prev, const Vec& dt, OuParams ou,
                               const SparseSymMatrix& lap, double tau_s, double tau_u,
                               bool spatial_potential);

// Offsets in [phi (visit-major) | delta | tau_s | tau_u | sigma | rho | xi | rho_ou | sigma_ou].
struct DynamicLayout {
  DynamicLayout() = default;
  DynamicLayout(Index n_items, Index n_visits, Index n_conditions, DeltaCovariance mode);

  Index n_items = 0, n_visits = 0, n_conditions = 0;
  DeltaCovariance mode = DeltaCovariance::LowRank;
  Index phi = 0, delta = 0, tau_s = 0, tau_u = 0, sigma = 0, rho = 0, xi = 0;
  Index rho_ou = 0, sigma_ou = 0;
  Index n_sigma = 0, n_rho = 0, n_xi = 0;
  Index dim = 0;
};

class DynamicModel {
 public:
  DynamicModel(LongitudinalDataset data, SparseSymMatrix lap, DynamicConfig cfg);
  static DynamicModel from_dataset(LongitudinalDataset data, int k, DynamicConfig cfg,
                                   const Metric& metric = Metric::euclidean());

  const LongitudinalDataset& data() const { return data_; }
  const SparseSymMatrix& laplacian() const { return lap_; }
  const DynamicConfig& config() const { return cfg_; }
  const DynamicLayout& layout() const { return layout_; }
  Index dim() const { return layout_.dim; }

  std::vector<std::string> param_names() const;
  TransformSpec transforms() const;
  Vec flatten(const DynamicParams& p) const;
  DynamicParams unflatten(const Vec& x) const;
  bool in_support(const DynamicParams& p) const;

  // log N(phi_0; 0, Q_0) with Q_0 = tau_s L + (1 + tau_u) I.
  double initial_log_density(const DynamicParams& p) const;
  double transition_log_density(const DynamicParams& p) const;
  double log_likelihood(const DynamicParams& p) const;
  double log_posterior(const Vec& x, Vec* grad = nullptr) const;

 private:
  LongitudinalDataset data_;
  SparseSymMatrix lap_;
  DynamicConfig cfg_;
  DynamicLayout layout_;
  std::vector<CellLikelihood> lik_;
  Mat dt_;  // I x T
  std::shared_ptr<const LaplacianSpectrum> spectrum_;
};

namespace prior {
inline constexpr double kRhoOuA = 2.0, kRhoOuB = 2.0;  // Beta(2, 2)
inline constexpr double kSigmaOuScale = 1.0;           // Half-Normal(1)
}  // namespace prior

LogDensity dynamic_logpost(const DynamicParams& p, const LongitudinalDataset& data,
                           const ItemGraph& graph, const DynamicConfig& cfg);

}  // namespace dfa
