#pragma once

#include "dfa/fit.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dfa {

struct ShardPlan {
  int n_shards = 0;
  int k = 0;
  std::vector<std::vector<int>> items;  // ascending global item indices per shard
  std::vector<ItemGraph> graphs;        // rebuilt from each shard's covariates
};

// Random balanced partition (sizes differ by at most one) drawn from `seed`.
ShardPlan make_shards(const Mat& covariates, int n_shards, int k, std::uint64_t seed,
                      const Metric& metric = Metric::euclidean());

struct SubPosterior {
  int shard = 0;
  std::vector<int> items;
  PosteriorSamples samples;  // shard-local phi plus shared parameters
  std::vector<ChainStats> chains;
  Diagnostics diagnostics;
};

// Fits the data of one shard given its graph Laplacian and sampler config.
using ShardFitter = std::function<FitResult(int shard, const Dataset& data,
                                            const SparseSymMatrix& lap, const SamplerConfig& cfg)>;

// Default fitter: the static model on the shard.
ShardFitter static_shard_fitter(const ModelConfig& model);

// Shard m runs with sampler seed shard_seed(cfg.sampler.seed, m). Failures are
// rethrown with the shard named, keeping the error category.
std::vector<SubPosterior> run_shards(const Dataset& data, const ShardPlan& plan,
                                     const FitConfig& cfg, int workers = 1,
                                     const ShardFitter& fitter = {});

// True for item-local columns ("phi[...]"), which pass through the merge.
bool is_local_parameter(const std::string& name);

// Rewrites the item index of "phi[i]" or "phi[t,i]" through `items`.
std::string globalize_local_name(const std::string& name, const std::vector<int>& items);

// Coordinatewise 2-Wasserstein barycenter of the shared parameters. Draw
// counts are equalized by uniform subsampling (seeded by `seed`) to the
// smallest shard. Barycenter quantiles are placed at the ranks of shard 0's
// draws. Local columns are renamed to global items and passed through; the
// output lists local columns in global order followed by shared columns.
PosteriorSamples wasserstein_barycenter(const std::vector<SubPosterior>& subs,
                                        std::uint64_t seed,
                                        const std::function<bool(const std::string&)>& shared =
                                            [](const std::string& n) {
                                              return !is_local_parameter(n);
                                            });

}  // namespace dfa
