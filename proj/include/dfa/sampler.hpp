#pragma once

#include "dfa/common.hpp"
#include "dfa/samples.hpp"
#include "dfa/transforms.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dfa {

struct SamplerConfig {
  int warmup = 1000;
  int draws = 1000;
  double target_accept = 0.8;
  int max_depth = 10;
  std::uint64_t seed = 1;
  int chains = 4;

  void validate() const;
};

// Log-density on the constrained scale plus the map to the unconstrained one.
// `log_density(x, grad)` fills grad when non-null and returns -inf off support.
struct Target {
  std::vector<std::string> names;
  TransformSpec transforms;
  std::function<double(const Vec&, Vec*)> log_density;

  Index dim() const { return transforms.dim(); }
};

// log p(constrain(u)) + log|J(u)| and its gradient in u. Non-finite values
// come back as -inf.
double unconstrained_log_density(const Target& target, const Vec& u, Vec& grad);

// Gradient of the log-density at q; returns the log-density.
using GradFn = std::function<double(const Vec& q, Vec& grad)>;

struct PhasePoint {
  Vec q, p, grad;
  double log_density = 0.0;
};

struct LeapfrogResult {
  PhasePoint point;
  bool divergent = false;  // non-finite log-density or gradient
};

// One velocity-Verlet step with diagonal inverse mass `inv_mass`.
LeapfrogResult leapfrog(const PhasePoint& z, double step, const Vec& inv_mass, const GradFn& f);

double hamiltonian(const PhasePoint& z, const Vec& inv_mass);

struct ChainStats {
  int chain = 0;
  std::uint64_t seed = 0;
  double step_size = 0.0;
  Vec inv_mass;
  int divergences = 0;          // kept draws
  int warmup_divergences = 0;
  double mean_accept = 0.0;     // kept draws
  double mean_tree_depth = 0.0;
  long long n_leapfrog = 0;
};

struct ChainOutput {
  Mat draws;  // constrained, rows are draws
  ChainStats stats;
};

// Multinomial NUTS with dual-averaging step size and diagonal mass adaptation.
// Throws SamplerError when no valid start is found or every warmup transition
// diverged.
ChainOutput run_chain(const Target& target, const SamplerConfig& cfg, int chain);

struct ParamDiagnostics {
  std::string name;
  double rhat = 1.0;
  double ess_bulk = 0.0;
};

struct Diagnostics {
  std::vector<ParamDiagnostics> params;
  double max_rhat = 1.0;
  double min_ess_bulk = 0.0;
  int divergences = 0;
};

// Rank-normalized split R-hat: max of the bulk and folded versions. Chains are
// columns. A parameter constant within every chain but not across chains gives
// +inf; a parameter constant overall gives 1.
double split_rhat(const Mat& chains);
// Bulk effective sample size from rank-normalized split chains.
double ess_bulk(const Mat& chains);
Diagnostics diagnose(const PosteriorSamples& samples, int divergences);

struct FitResult {
  PosteriorSamples samples;
  std::vector<ChainStats> chains;
  Diagnostics diagnostics;
};

// Runs cfg.chains chains on `workers` threads (0 picks one per chain, capped by
// the hardware) and merges them by chain index. Chain c uses
// derive_seed(cfg.seed, c).
FitResult run_chains(const Target& target, const SamplerConfig& cfg, int workers = 1);

}  // namespace dfa
