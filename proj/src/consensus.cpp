#include "dfa/consensus.hpp"

#include "dfa/parallel.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace dfa {

ShardPlan make_shards(const Mat& covariates, int n_shards, int k, std::uint64_t seed,
                      const Metric& metric) {
  if (n_shards < 1) throw ConfigError("consensus", "shard count must be positive");
  if (k < 1) throw ConfigError("consensus", "k must be positive");
  const auto n = static_cast<int>(covariates.rows());
  if (n < n_shards * (k + 1))
    throw DataError("consensus", std::to_string(n) + " items cannot fill " +
                                     std::to_string(n_shards) + " shards of at least k+1=" +
                                     std::to_string(k + 1));
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[i], perm[pick(rng)]);
  }
  ShardPlan plan;
  plan.n_shards = n_shards;
  plan.k = k;
  int offset = 0;
  for (int m = 0; m < n_shards; ++m) {
    const int size = n / n_shards + (m < n % n_shards ? 1 : 0);
    std::vector<int> items(perm.begin() + offset, perm.begin() + offset + size);
    std::sort(items.begin(), items.end());
    offset += size;
    Mat cov(size, covariates.cols());
    for (int r = 0; r < size; ++r) cov.row(r) = covariates.row(items[r]);
    plan.graphs.push_back(build_knn_graph(cov, k, metric));
    plan.items.push_back(std::move(items));
  }
  return plan;
}

ShardFitter static_shard_fitter(const ModelConfig& model) {
  return [model](int, const Dataset& data, const SparseSymMatrix& lap, const SamplerConfig& cfg) {
    return fit_model(std::make_shared<const StaticModel>(data, lap, model), cfg, 1);
  };
}

std::vector<SubPosterior> run_shards(const Dataset& data, const ShardPlan& plan,
                                     const FitConfig& cfg, int workers,
                                     const ShardFitter& fitter) {
  cfg.sampler.validate();
  data.validate();
  const ShardFitter fit = fitter ? fitter : static_shard_fitter(cfg.model);
  std::vector<SubPosterior> subs(static_cast<std::size_t>(plan.n_shards));
  parallel_for(plan.n_shards, workers, [&](int m) {
    const std::string where = "shard " + std::to_string(m) + ": ";
    try {
      SamplerConfig s = cfg.sampler;
      s.seed = shard_seed(cfg.sampler.seed, m);
      auto r = fit(m, data.subset(plan.items[m]), laplacian(plan.graphs[m]), s);
      SubPosterior& sub = subs[m];
      sub.shard = m;
      sub.items = plan.items[m];
      sub.samples = std::move(r.samples);
      sub.samples.shard = m;
      sub.chains = std::move(r.chains);
      sub.diagnostics = std::move(r.diagnostics);
    } catch (const SamplerError& e) {
      throw SamplerError(e.module(), where + e.what());
    } catch (const DataError& e) {
      throw DataError(e.module(), where + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(e.module(), where + e.what());
    }
  });
  return subs;
}

bool is_local_parameter(const std::string& name) { return name.rfind("phi[", 0) == 0; }

namespace {

// Index list inside the brackets of a local name: phi[i] -> {i}, phi[t,i] -> {t, i}.
std::vector<long> local_indices(const std::string& name) {
  const auto open = name.find('['), close = name.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw DataError("consensus", "malformed parameter name '" + name + "'");
  std::vector<long> out;
  std::size_t pos = open + 1;
  while (pos < close) {
    std::size_t end = name.find(',', pos);
    if (end == std::string::npos || end > close) end = close;
    try {
      out.push_back(std::stol(name.substr(pos, end - pos)));
    } catch (const std::exception&) {
      throw DataError("consensus", "malformed parameter name '" + name + "'");
    }
    pos = end + 1;
  }
  if (out.empty() || out.size() > 2)
    throw DataError("consensus", "malformed parameter name '" + name + "'");
  return out;
}

}  // namespace

std::string globalize_local_name(const std::string& name, const std::vector<int>& items) {
  auto idx = local_indices(name);
  const long local = idx.back();
  if (local < 0 || local >= static_cast<long>(items.size()))
    throw DataError("consensus", "'" + name + "' is outside the shard");
  idx.back() = items[local];
  std::string out = name.substr(0, name.find('[') + 1);
  for (std::size_t j = 0; j < idx.size(); ++j) out += (j ? "," : "") + std::to_string(idx[j]);
  return out + "]";
}

PosteriorSamples wasserstein_barycenter(const std::vector<SubPosterior>& subs,
                                        std::uint64_t seed,
                                        const std::function<bool(const std::string&)>& shared) {
  if (subs.empty()) throw DataError("consensus", "no sub-posteriors to combine");
  Index s = std::numeric_limits<Index>::max();
  for (const auto& sub : subs) {
    if (sub.samples.n_draws() == 0)
      throw DataError("consensus", "shard " + std::to_string(sub.shard) + " has no draws");
    s = std::min(s, sub.samples.n_draws());
  }

  // Equalize draw counts; kept rows stay in their original order.
  std::vector<std::vector<Index>> rows(subs.size());
  for (std::size_t m = 0; m < subs.size(); ++m) {
    const Index n = subs[m].samples.n_draws();
    std::vector<Index> r(static_cast<std::size_t>(n));
    std::iota(r.begin(), r.end(), 0);
    if (n > s) {
      Rng rng(derive_seed(seed, m));
      for (Index j = 0; j < s; ++j) {
        std::uniform_int_distribution<Index> pick(j, n - 1);
        std::swap(r[j], r[pick(rng)]);
      }
      r.resize(static_cast<std::size_t>(s));
      std::sort(r.begin(), r.end());
    }
    rows[m] = std::move(r);
  }

  const auto& first = subs.front().samples;
  std::vector<std::string> shared_names;
  for (const auto& name : first.names)
    if (shared(name)) shared_names.push_back(name);
  for (const auto& sub : subs)
    for (const auto& name : shared_names)
      if (!sub.samples.has(name))
        throw DataError("consensus", "shard " + std::to_string(sub.shard) + " lacks '" + name + "'");

  // Local columns keyed by (visit, global item) for a stable global order.
  // Other unmerged columns pass through from shard 0, after the local ones.
  struct LocalColumn {
    std::size_t shard;
    Index column;
    std::string name;
  };
  std::map<std::vector<long>, LocalColumn> locals;
  for (std::size_t m = 0; m < subs.size(); ++m) {
    const auto& names = subs[m].samples.names;
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (shared(names[j])) continue;
      std::vector<long> key{1, static_cast<long>(j)};
      std::string global = names[j];
      if (is_local_parameter(names[j])) {
        global = globalize_local_name(names[j], subs[m].items);
        key = local_indices(global);
        key.insert(key.begin(), 0);
      } else if (m > 0) {
        continue;
      }
      if (!locals.emplace(key, LocalColumn{m, static_cast<Index>(j), global}).second)
        throw DataError("consensus", "parameter '" + global + "' appears in several shards");
    }
  }

  PosteriorSamples out;
  out.seed = seed;
  out.draws.resize(s, static_cast<Index>(locals.size() + shared_names.size()));
  Index col = 0;
  for (const auto& [key, lc] : locals) {
    const auto& src = subs[lc.shard].samples.draws;
    for (Index r = 0; r < s; ++r) out.draws(r, col) = src(rows[lc.shard][r], lc.column);
    out.names.push_back(lc.name);
    ++col;
  }

  std::vector<Index> order(static_cast<std::size_t>(s));
  Vec bary(s), sorted(s);
  for (const auto& name : shared_names) {
    bary.setZero();
    Vec anchor(s);
    for (std::size_t m = 0; m < subs.size(); ++m) {
      const Index j = subs[m].samples.column(name);
      for (Index r = 0; r < s; ++r) sorted[r] = subs[m].samples.draws(rows[m][r], j);
      if (m == 0) anchor = sorted;
      std::sort(sorted.begin(), sorted.end());
      // Running mean keeps identical inputs exact.
      bary += (sorted - bary) / static_cast<double>(m + 1);
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return anchor[a] < anchor[b]; });
    for (Index r = 0; r < s; ++r) out.draws(order[r], col) = bary[r];
    out.names.push_back(name);
    ++col;
  }
  for (Index r = 0; r < s; ++r)
    out.chain.push_back(first.chain.empty() ? 0 : first.chain[rows[0][r]]);
  return out;
}

}  // namespace dfa
