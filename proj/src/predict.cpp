#include "dfa/predict.hpp"

#include <algorithm>
#include <numeric>

namespace dfa {

Vec interpolation_weights(const std::vector<double>& distances) {
  if (distances.empty()) throw DataError("predict", "need at least one neighbor distance");
  const auto n = static_cast<Index>(distances.size());
  Vec w = Vec::Zero(n);
  for (Index j = 0; j < n; ++j) {
    const double d = distances[j];
    if (std::isnan(d) || d < 0) throw DataError("predict", "distances must be non-negative");
    if (d == 0.0) {
      w[j] = 1.0;
      return w;
    }
  }
  bool finite = false;
  for (Index j = 0; j < n; ++j) {
    w[j] = 1.0 / distances[j];
    finite = finite || std::isfinite(distances[j]);
  }
  if (!finite) throw DataError("predict", "all neighbor distances are infinite");
  return w / w.sum();
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

ProbabilitySummary summarize_probabilities(const Mat& lambda, double level) {
  if (lambda.rows() == 0) throw DataError("predict", "no posterior draws");
  const Index s = lambda.rows(), c = lambda.cols();
  ProbabilitySummary out{Vec(c), Vec(c), Vec(c)};
  std::vector<double> p(static_cast<std::size_t>(s));
  for (Index cc = 0; cc < c; ++cc) {
    for (Index r = 0; r < s; ++r) p[r] = inv_logit(lambda(r, cc));
    out.mean[cc] = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(s);
    std::sort(p.begin(), p.end());
    out.lo[cc] = quantile_sorted(p, 0.5 * (1 - level));
    out.hi[cc] = quantile_sorted(p, 0.5 * (1 + level));
  }
  return out;
}

Prediction predict_new_items(const PosteriorSamples& samples, const Mat& train_covariates,
                             const Mat& new_covariates, int k, const Metric& metric,
                             double level) {
  const Index n_train = train_covariates.rows();
  if (k < 1) throw ConfigError("predict", "k must be positive");
  if (k > n_train)
    throw DataError("predict", "k=" + std::to_string(k) + " exceeds the " +
                                   std::to_string(n_train) + " training items");
  if (!(level > 0 && level < 1)) throw ConfigError("predict", "level must lie in (0, 1)");
  if (new_covariates.cols() != train_covariates.cols())
    throw DataError("predict", "new items have " + std::to_string(new_covariates.cols()) +
                                   " covariates but training items have " +
                                   std::to_string(train_covariates.cols()));
  if (samples.n_draws() == 0) throw DataError("predict", "no posterior draws");
  std::vector<Index> phi_cols(static_cast<std::size_t>(n_train));
  for (Index i = 0; i < n_train; ++i) phi_cols[i] = samples.column("phi[" + std::to_string(i) + "]");
  const Mat delta = samples.block("delta");
  if (delta.cols() == 0) throw DataError("predict", "samples have no delta columns");

  const Index s = samples.n_draws(), q = new_covariates.rows(), c = delta.cols();
  Prediction out;
  out.phi.resize(s, q);
  out.prob_mean.resize(q, c);
  out.prob_lo.resize(q, c);
  out.prob_hi.resize(q, c);
  for (Index j = 0; j < q; ++j) {
    auto nb = nearest_neighbors(train_covariates, new_covariates.row(j).transpose(), k, metric);
    std::vector<double> dist;
    for (const auto& n : nb) dist.push_back(n.distance);
    const Vec w = interpolation_weights(dist);
    Vec phi = Vec::Zero(s);
    for (std::size_t m = 0; m < nb.size(); ++m)
      if (w[m] != 0.0) phi += w[m] * samples.draws.col(phi_cols[nb[m].index]);
    out.phi.col(j) = phi;
    Mat lambda = delta.colwise() + phi;
    const auto summary = summarize_probabilities(lambda, level);
    out.prob_mean.row(j) = summary.mean.transpose();
    out.prob_lo.row(j) = summary.lo.transpose();
    out.prob_hi.row(j) = summary.hi.transpose();
    out.lambda.push_back(std::move(lambda));
    out.neighbors.push_back(std::move(nb));
  }
  return out;
}

}  // namespace dfa
