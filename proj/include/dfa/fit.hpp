#pragma once

#include "dfa/dynamics.hpp"
#include "dfa/model.hpp"
#include "dfa/sampler.hpp"

#include <cstdint>
#include <memory>

namespace dfa {

struct FitConfig {
  ModelConfig model;
  int k = 10;
  SamplerConfig sampler;
};

struct DynamicFitConfig {
  DynamicConfig model;
  int k = 10;
  SamplerConfig sampler;
};

Target make_target(std::shared_ptr<const StaticModel> model);
Target make_target(std::shared_ptr<const DynamicModel> model);

// Seed of shard m under master seed `master`. An unsharded fit is shard 0.
inline std::uint64_t shard_seed(std::uint64_t master, int shard) {
  return derive_seed(master, static_cast<std::uint64_t>(shard));
}

// Fits one model with cfg.sampler.seed used as-is.
FitResult fit_model(std::shared_ptr<const StaticModel> model, const SamplerConfig& cfg,
                    int workers = 1);
FitResult fit_model(std::shared_ptr<const DynamicModel> model, const SamplerConfig& cfg,
                    int workers = 1);

// Unsharded fit: builds the k-NN graph and runs the chains of shard 0 under
// master seed cfg.sampler.seed.
FitResult fit_static(const Dataset& data, const FitConfig& cfg, int workers = 1,
                     const Metric& metric = Metric::euclidean());
FitResult fit_dynamic(const LongitudinalDataset& data, const DynamicFitConfig& cfg,
                      int workers = 1, const Metric& metric = Metric::euclidean());

// Posterior mean of Lambda_ic = phi_i + delta_c (I x C).
Mat posterior_mean_lambda(const PosteriorSamples& samples);

}  // namespace dfa
