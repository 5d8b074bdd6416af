#include "dfa/simulate.hpp"

#include "dfa/gmrf.hpp"
#include "dfa/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <numeric>

namespace dfa {

namespace {

// Independent random streams of one generator call.
enum Stream : std::uint64_t { kCovariates, kPhi, kDelta, kA, kDrugMap, kDrugSets, kTimes, kSteps };

Rng stream(std::uint64_t seed, Stream s) { return Rng(derive_seed(seed, s)); }

Vec draw_delta(const SimConfig& cfg, Rng& rng) {
  if (cfg.fixed_delta.size() > 0) return cfg.fixed_delta;
  const Index c = cfg.n_conditions;
  std::normal_distribution<double> z;
  Vec e(c);
  for (Index j = 0; j < c; ++j) e[j] = z(rng);
  if (cfg.delta_covariance == DeltaCovariance::Diagonal) return cfg.sigma_delta * e;
  const Vec sigma = cfg.sigma.size() > 0 ? cfg.sigma : Vec::Constant(c, cfg.sigma_delta);
  const Vec rho = cfg.rho.size() > 0 ? cfg.rho : Vec::Zero(c);
  const LowRankCov cov(sigma, rho, cfg.xi);
  return cov.matrix().llt().matrixL() * e;
}

IntMat draw_a(const Mat& lambda, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  IntMat a(lambda.rows(), lambda.cols());
  for (Index k = 0; k < a.size(); ++k) a.data()[k] = u(rng) < inv_logit(lambda.data()[k]) ? 1 : 0;
  return a;
}

struct Core {
  Mat covariates;
  ItemGraph graph;
  SparseSymMatrix lap;
  Vec phi, delta;
  Mat lambda;
  IntMat a;
};

// Covariates, graph, phi, delta and A; `a_rng` is left positioned after A.
Core generate_core(const SimConfig& cfg, std::uint64_t seed, Rng& a_rng) {
  Core core;
  Rng rc = stream(seed, kCovariates);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  core.covariates.resize(cfg.n_items, cfg.n_covariates);
  for (Index k = 0; k < core.covariates.size(); ++k) core.covariates.data()[k] = u(rc);
  core.graph = build_knn_graph(core.covariates, cfg.k);
  core.lap = laplacian(core.graph);

  Rng rp = stream(seed, kPhi);
  core.phi = bym_precision(core.lap, {cfg.tau_s, cfg.tau_u}).sample(rp);
  Rng rd = stream(seed, kDelta);
  core.delta = draw_delta(cfg, rd);
  core.lambda = logit_surface(core.phi, core.delta);
  a_rng = stream(seed, kA);
  core.a = draw_a(core.lambda, a_rng);
  return core;
}

IntMat generate_drug_map(const SimConfig& cfg, Rng& rng) {
  const int c = cfg.n_conditions;
  std::uniform_int_distribution<int> count(cfg.min_drugs, cfg.max_drugs);
  std::vector<int> per(static_cast<std::size_t>(c));
  for (int j = 0; j < c; ++j) per[j] = j < cfg.n_anchor ? 1 : count(rng);
  const int d = std::accumulate(per.begin(), per.end(), 0);
  IntMat b = IntMat::Zero(d, c);
  int next = 0;
  for (int j = 0; j < c; ++j)
    for (int r = 0; r < per[j]; ++r) b(next++, j) = 1;
  return b;
}

// Drug sets under the observational law given the (latent) condition matrix.
// A drug indicated for several conditions is present if any of them emits it.
std::vector<std::vector<int>> draw_drug_sets(const IntMat& a, const IntMat& b, double epsilon,
                                             Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Index n = a.rows(), n_drugs = b.rows();
  const Eigen::VectorXi n_indicated = b.colwise().sum().transpose();
  std::vector<std::vector<int>> sets(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    std::vector<char> present(static_cast<std::size_t>(n_drugs), 0);
    for (Index c = 0; c < b.cols(); ++c) {
      const double q = a(i, c) == 1 ? (1.0 - epsilon) / n_indicated[c] : epsilon;
      for (Index d = 0; d < n_drugs; ++d)
        if (b(d, c) == 1 && u(rng) < q) present[d] = 1;
    }
    for (Index d = 0; d < n_drugs; ++d)
      if (present[d]) sets[i].push_back(static_cast<int>(d));
  }
  return sets;
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

void SimConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("simulate", what);
  };
  need(n_items > 0 && n_conditions > 0 && n_covariates > 0, "counts must be positive");
  need(k >= 1 && k < n_items, "k must lie in [1, n_items)");
  need(tau_s > 0 && tau_u > 0, "tau_s and tau_u must be positive");
  need(sigma_delta > 0, "sigma_delta must be positive");
  need(mask_fraction > 0 && mask_fraction < 1, "mask_fraction must lie in (0, 1)");
  need(replications > 0, "replications must be positive");
  need(epsilon >= 0 && epsilon < 1, "epsilon must lie in [0, 1)");
  need(fixed_delta.size() == 0 || fixed_delta.size() == n_conditions,
       "fixed_delta needs one entry per condition");
  if (delta_covariance == DeltaCovariance::LowRank) {
    need(sigma.size() == 0 || sigma.size() == n_conditions, "sigma needs one entry per condition");
    need(rho.size() == 0 || rho.size() == n_conditions, "rho needs one entry per condition");
    need(xi > -1 && xi < 1, "xi must lie in (-1, 1)");
  }
  need(n_anchor >= 0 && n_anchor <= n_conditions, "n_anchor must lie in [0, n_conditions]");
  need(min_drugs >= 1 && max_drugs >= min_drugs, "need 1 <= min_drugs <= max_drugs");
  need(n_visits >= 1, "n_visits must be positive");
  need(ou.rho_ou > 0 && ou.rho_ou < 1 && ou.sigma_ou > 0, "OU parameters out of range");
  need(visit_interval > 0, "visit_interval must be positive");
  need(miss_prob >= 0 && miss_prob < 1, "miss_prob must lie in [0, 1)");
}

SimulatedData generate_static(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng ra;
  Core core = generate_core(cfg, seed, ra);
  SimulatedData out;
  out.data.covariates = std::move(core.covariates);
  out.data.a_obs = core.a;
  out.data.mode = LikelihoodMode::Direct;
  out.truth = {std::move(core.phi), std::move(core.delta), std::move(core.lambda),
               std::move(core.a), std::move(core.graph)};
  return out;
}

SimulatedData generate_polypharmacy(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  IntMat b = cfg.drug_condition;
  if (b.size() == 0) {
    Rng rm = stream(seed, kDrugMap);
    b = generate_drug_map(cfg, rm);
  }
  if (b.cols() != cfg.n_conditions)
    throw DataError("simulate", "B map has " + std::to_string(b.cols()) + " columns but there are " +
                                    std::to_string(cfg.n_conditions) + " conditions");
  for (Index c = 0; c < b.cols(); ++c)
    if (b.col(c).sum() < 1)
      throw DataError("simulate", "condition " + std::to_string(c) + " has no indicated drug");

  Rng ra;
  Core core = generate_core(cfg, seed, ra);
  Rng rs = stream(seed, kDrugSets);
  SimulatedData out;
  out.data.mode = LikelihoodMode::Drug;
  out.data.covariates = std::move(core.covariates);
  out.data.drug_sets = draw_drug_sets(core.a, b, cfg.epsilon, rs);
  out.data.drug_condition = std::move(b);
  out.truth = {std::move(core.phi), std::move(core.delta), std::move(core.lambda),
               std::move(core.a), std::move(core.graph)};
  return out;
}

SimulatedLongitudinal generate_dynamic(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng ra;
  Core core = generate_core(cfg, seed, ra);
  const Index n = cfg.n_items, visits = cfg.n_visits;

  SimulatedLongitudinal out;
  auto& d = out.data;
  d.mode = LikelihoodMode::Direct;
  d.covariates = core.covariates;
  d.times = Mat::Zero(n, visits);
  Rng rt = stream(seed, kTimes);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < n; ++i)
    for (Index t = 1; t < visits; ++t) {
      double gap = cfg.visit_interval;
      while (u(rt) < cfg.miss_prob) gap += cfg.visit_interval;
      d.times(i, t) = d.times(i, t - 1) + gap;
    }

  auto& truth = out.truth;
  truth.phi.resize(n, visits);
  truth.phi.col(0) = core.phi;
  truth.delta = core.delta;
  truth.a.push_back(core.a);
  d.a_obs.push_back(core.a);
  Rng rs = stream(seed, kSteps);
  for (Index t = 1; t < visits; ++t) {
    const Vec dt = d.times.col(t) - d.times.col(t - 1);
    const auto step =
        transition_step(truth.phi.col(t - 1), dt, cfg.ou, core.lap, cfg.tau_s, cfg.tau_u, true);
    truth.phi.col(t) = step.mean + PrecisionMatrix(step.precision).sample(rs);
    const IntMat a = draw_a(logit_surface(truth.phi.col(t), core.delta), ra);
    truth.a.push_back(a);
    d.a_obs.push_back(a);
  }
  truth.graph = std::move(core.graph);
  return out;
}

MaskedData mask_entries(const IntMat& a, double fraction, std::uint64_t seed) {
  if (!(fraction > 0 && fraction < 1))
    throw ConfigError("simulate", "mask fraction must lie in (0, 1)");
  std::vector<Index> observed;
  for (Index k = 0; k < a.size(); ++k)
    if (a.data()[k] != kMissing) observed.push_back(k);
  if (observed.empty()) throw DataError("simulate", "no observed cells to mask");
  const auto n = static_cast<Index>(observed.size());
  const Index count = std::clamp<Index>(
      static_cast<Index>(std::floor(fraction * static_cast<double>(n) + 0.5)), 1, n);

  // Partial Fisher-Yates over the observed cells.
  Rng rng(seed);
  for (Index j = 0; j < count; ++j) {
    std::uniform_int_distribution<Index> pick(j, n - 1);
    std::swap(observed[j], observed[pick(rng)]);
  }
  MaskedData out;
  out.cells.assign(observed.begin(), observed.begin() + count);
  std::sort(out.cells.begin(), out.cells.end());
  out.a_obs = a;
  for (Index k : out.cells) out.a_obs.data()[k] = kMissing;
  return out;
}

Discoveries count_discoveries(const IntMat& truth, const Mat& lambda,
                              const std::vector<Index>& cells, double threshold) {
  if (truth.rows() != lambda.rows() || truth.cols() != lambda.cols())
    throw DataError("simulate", "truth and Lambda shapes differ");
  Discoveries d;
  for (Index k : cells) {
    const int t = truth.data()[k];
    if (t == 1) ++d.positives;
    if (inv_logit(lambda.data()[k]) > threshold) {
      ++d.discoveries;
      if (t == 0) ++d.false_discoveries;
    }
  }
  d.none = d.discoveries == 0;
  d.fdr = d.none ? 0.0 : static_cast<double>(d.false_discoveries) / d.discoveries;
  return d;
}

LambdaEstimate fit_posterior_lambda(const Dataset& masked, const SimConfig& cfg,
                                    std::uint64_t seed) {
  FitConfig fc;
  fc.model = {cfg.delta_covariance, cfg.epsilon};
  fc.k = cfg.k;
  fc.sampler = cfg.sampler;
  fc.sampler.seed = seed;
  const auto fit = fit_static(masked, fc, 1);
  return {posterior_mean_lambda(fit.samples), fit.diagnostics.max_rhat};
}

FdrReport fdr_study(const SimConfig& cfg, int workers, const LambdaFitter& fitter) {
  cfg.validate();
  cfg.sampler.validate();
  const auto reps = static_cast<std::size_t>(cfg.replications);
  std::vector<FdrReplication> results(reps);
  std::vector<std::vector<LambdaPair>> pairs(reps);
  parallel_for(cfg.replications, workers, [&](int r) {
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    const auto sim = generate_static(cfg, derive_seed(seed, 0));
    const auto mask = mask_entries(sim.truth.a, cfg.mask_fraction, derive_seed(seed, 1));
    Dataset masked = sim.data;
    masked.a_obs = mask.a_obs;
    const auto est = fitter(masked, cfg, derive_seed(seed, 2));

    FdrReplication& rep = results[r];
    rep.replication = r;
    rep.seed = seed;
    rep.masked = static_cast<int>(mask.cells.size());
    rep.model = count_discoveries(sim.truth.a, est.lambda, mask.cells);
    rep.oracle = count_discoveries(sim.truth.a, sim.truth.lambda, mask.cells);
    rep.max_rhat = est.max_rhat;
    std::vector<double> x, y;
    for (Index k : mask.cells) {
      x.push_back(sim.truth.lambda.data()[k]);
      y.push_back(est.lambda.data()[k]);
      pairs[r].push_back({r, x.back(), y.back()});
    }
    rep.correlation = correlation(x, y);
  });

  FdrReport report;
  report.replications = std::move(results);
  for (const auto& rep : report.replications) {
    report.mean_model_fdr += rep.model.fdr;
    report.mean_oracle_fdr += rep.oracle.fdr;
    report.mean_correlation += rep.correlation;
  }
  report.mean_model_fdr /= cfg.replications;
  report.mean_oracle_fdr /= cfg.replications;
  report.mean_correlation /= cfg.replications;
  for (auto& p : pairs) report.lambda_pairs.insert(report.lambda_pairs.end(), p.begin(), p.end());
  return report;
}

ConfusionMatrix confusion(const IntMat& truth, const Mat& prob, double threshold,
                          const std::vector<Index>* cells) {
  if (truth.rows() != prob.rows() || truth.cols() != prob.cols())
    throw DataError("simulate", "truth and probability shapes differ");
  ConfusionMatrix m;
  m.counts.setZero();
  auto visit = [&](Index k) {
    const int t = truth.data()[k];
    if (t != 0 && t != 1) return;
    ++m.counts(t, prob.data()[k] > threshold ? 1 : 0);
  };
  if (cells) {
    for (Index k : *cells) visit(k);
  } else {
    for (Index k = 0; k < truth.size(); ++k) visit(k);
  }
  if (m.counts.sum() == 0) throw DataError("simulate", "no cells to evaluate");
  m.rates = Mat::Zero(2, 2);
  for (int r = 0; r < 2; ++r) {
    const int total = m.counts.row(r).sum();
    if (total == 0)
      throw DataError("simulate", "no evaluated cells have truth " + std::to_string(r));
    m.rates.row(r) = m.counts.row(r).cast<double>() / total;
  }
  return m;
}

}  // namespace dfa
