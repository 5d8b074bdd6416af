#include "dfa/sampler.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <numeric>

namespace dfa {

namespace {

// Halves every chain (dropping the middle draw of odd-length chains).
Mat split_chains(const Mat& chains) {
  const Index n = chains.rows(), half = n / 2;
  Mat out(half, 2 * chains.cols());
  for (Index c = 0; c < chains.cols(); ++c) {
    out.col(2 * c) = chains.col(c).head(half);
    out.col(2 * c + 1) = chains.col(c).tail(half);
  }
  return out;
}

// Pooled average ranks mapped through the normal quantile function.
Mat rank_normalize(const Mat& x) {
  const Index s = x.size();
  std::vector<Index> order(static_cast<std::size_t>(s));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return x.data()[a] < x.data()[b]; });
  Mat z(x.rows(), x.cols());
  static const boost::math::normal_distribution<double> normal;
  for (Index i = 0; i < s;) {
    Index j = i;
    while (j + 1 < s && x.data()[order[j + 1]] == x.data()[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average
    const double u = (rank - 0.375) / (static_cast<double>(s) + 0.25);
    const double q = boost::math::quantile(normal, u);
    for (Index k = i; k <= j; ++k) z.data()[order[k]] = q;
    i = j + 1;
  }
  return z;
}

double basic_rhat(const Mat& chains) {
  const Index n = chains.rows(), m = chains.cols();
  const Vec means = chains.colwise().mean();
  double w = 0.0;
  for (Index c = 0; c < m; ++c) w += (chains.col(c).array() - means[c]).square().sum() / (n - 1.0);
  w /= static_cast<double>(m);
  const double b = n * (means.array() - means.mean()).square().sum() / (m - 1.0);
  if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double median(Vec v) {
  const std::size_t n = static_cast<std::size_t>(v.size());
  std::sort(v.data(), v.data() + n);
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Geyer initial-monotone-sequence ESS on already split chains.
double ess_of(const Mat& chains) {
  const Index n = chains.rows(), m = chains.cols();
  const Vec means = chains.colwise().mean();
  const Mat centered = chains.rowwise() - means.transpose();
  auto mean_acov = [&](Index lag) {
    if (lag >= n) return 0.0;
    double s = 0.0;
    for (Index c = 0; c < m; ++c)
      s += centered.col(c).head(n - lag).dot(centered.col(c).tail(n - lag)) / n;
    return s / m;
  };
  const double mean_var = mean_acov(0) * n / (n - 1.0);
  double var_plus = mean_var * (n - 1.0) / n;
  if (m > 1) var_plus += (means.array() - means.mean()).square().sum() / (m - 1.0);
  const double total = static_cast<double>(n * m);
  if (!(var_plus > 0.0)) return total;

  Vec rho = Vec::Zero(n + 2);
  Index t = 0;
  double even = 1.0;
  rho[0] = even;
  double odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = odd;
  while (t < n - 5 && std::isfinite(even + odd) && even + odd > 0) {
    t += 2;
    even = 1.0 - (mean_var - mean_acov(t)) / var_plus;
    odd = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    if (even + odd >= 0) {
      rho[t] = even;
      rho[t + 1] = odd;
    }
  }
  const Index max_t = t;
  if (even > 0) rho[max_t] = even;
  for (t = 0; t <= max_t - 4;) {
    t += 2;
    if (rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1]) {
      rho[t] = 0.5 * (rho[t - 2] + rho[t - 1]);
      rho[t + 1] = rho[t];
    }
  }
  double tau = -1.0 + 2.0 * rho.head(max_t).sum() + rho[max_t];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

}  // namespace

double split_rhat(const Mat& chains) {
  if (chains.rows() < 4 || chains.cols() < 1)
    throw DataError("sampler", "R-hat needs at least 4 draws per chain");
  const Mat split = split_chains(chains);
  const double bulk = basic_rhat(rank_normalize(split));
  const double med = median(split.reshaped());
  const double tail = basic_rhat(rank_normalize((split.array() - med).abs().matrix()));
  return std::max(bulk, tail);
}

double ess_bulk(const Mat& chains) {
  if (chains.rows() < 4 || chains.cols() < 1)
    throw DataError("sampler", "ESS needs at least 4 draws per chain");
  return ess_of(rank_normalize(split_chains(chains)));
}

Diagnostics diagnose(const PosteriorSamples& samples, int divergences) {
  Diagnostics d;
  d.divergences = divergences;
  const int m = samples.n_chains();
  if (m == 0 || samples.n_draws() == 0) return d;
  std::vector<Mat> per_chain;
  Index n = std::numeric_limits<Index>::max();
  for (int c = 0; c < m; ++c) {
    per_chain.push_back(samples.chain_draws(c));
    n = std::min(n, per_chain.back().rows());
  }
  if (n < 4) return d;
  d.min_ess_bulk = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < samples.n_params(); ++j) {
    Mat chains(n, m);
    for (int c = 0; c < m; ++c) chains.col(c) = per_chain[c].col(j).head(n);
    ParamDiagnostics p;
    p.name = j < static_cast<Index>(samples.names.size()) ? samples.names[j] : std::to_string(j);
    p.rhat = split_rhat(chains);
    p.ess_bulk = ess_bulk(chains);
    d.max_rhat = std::max(d.max_rhat, p.rhat);
    d.min_ess_bulk = std::min(d.min_ess_bulk, p.ess_bulk);
    d.params.push_back(std::move(p));
  }
  return d;
}

}  // namespace dfa
