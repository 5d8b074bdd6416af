#include "dfa/model.hpp"

#include <algorithm>
#include <numbers>

namespace dfa {

namespace {

// x * log(y) with 0 * log(0) = 0.
double xlogy(double x, double y) {
  if (x == 0.0) return 0.0;
  return x * std::log(y);
}

}  // namespace

// ---------------------------------------------------------------- Dataset

Index Dataset::n_conditions() const {
  return mode == LikelihoodMode::Direct ? a_obs.cols() : drug_condition.cols();
}

void Dataset::validate() const {
  const Index n = n_items();
  if (n < 1) throw DataError("model", "dataset has no items");
  if (covariates.cols() < 1) throw DataError("model", "items need at least one covariate");
  if (!covariates.allFinite()) throw DataError("model", "covariates must be finite");
  if (n_conditions() < 1) throw DataError("model", "dataset has no conditions");
  if (mode == LikelihoodMode::Direct) {
    if (a_obs.rows() != n)
      throw DataError("model", "A has " + std::to_string(a_obs.rows()) + " rows but there are " +
                                   std::to_string(n) + " items");
    for (Index i = 0; i < a_obs.size(); ++i) {
      const int v = a_obs.data()[i];
      if (v != 0 && v != 1 && v != kMissing)
        throw DataError("model", "A entries must be 0, 1 or missing");
    }
  } else {
    if (drug_condition.rows() < 1) throw DataError("model", "drug mode needs at least one drug");
    for (Index i = 0; i < drug_condition.size(); ++i) {
      const int v = drug_condition.data()[i];
      if (v != 0 && v != 1) throw DataError("model", "B entries must be 0 or 1");
    }
    for (Index c = 0; c < drug_condition.cols(); ++c)
      if (drug_condition.col(c).sum() < 1)
        throw DataError("model", "condition " + std::to_string(c) + " has no indicated drug");
    if (static_cast<Index>(drug_sets.size()) != n)
      throw DataError("model", "drug mode needs one drug set per item");
    for (const auto& set : drug_sets)
      for (int d : set)
        if (d < 0 || d >= drug_condition.rows())
          throw DataError("model", "drug id " + std::to_string(d) + " out of range");
  }
}

Dataset Dataset::subset(const std::vector<int>& items) const {
  Dataset out;
  out.mode = mode;
  out.drug_condition = drug_condition;
  out.covariates.resize(static_cast<Index>(items.size()), covariates.cols());
  if (a_obs.size() > 0) out.a_obs.resize(static_cast<Index>(items.size()), a_obs.cols());
  for (std::size_t r = 0; r < items.size(); ++r) {
    out.covariates.row(r) = covariates.row(items[r]);
    if (a_obs.size() > 0) out.a_obs.row(r) = a_obs.row(items[r]);
    if (!drug_sets.empty()) out.drug_sets.push_back(drug_sets[items[r]]);
  }
  return out;
}

// ---------------------------------------------------------------- LowRankCov

LowRankCov::LowRankCov(Vec sigma, Vec rho, double xi)
    : sigma_(std::move(sigma)), rho_(std::move(rho)), xi_(xi) {
  const Index c = sigma_.size();
  if (c < 1) throw DataError("model", "covariance needs at least one condition");
  if (rho_.size() != c) throw DataError("model", "rho and sigma lengths differ");
  if (!(sigma_.array() > 0).all() || !sigma_.allFinite())
    throw DataError("model", "sigma must be positive");
  if (!(rho_.array().abs() < 1).all()) throw DataError("model", "rho must lie in (-1, 1)");
  if (!(std::abs(xi_) < 1)) throw DataError("model", "xi must lie in (-1, 1)");

  Mat base(c, c);
  for (Index i = 0; i < c; ++i)
    for (Index j = 0; j < c; ++j)
      base(i, j) = i == j ? sigma_[i] * sigma_[i] : xi_ * rho_[i] * rho_[j] * sigma_[i] * sigma_[j];

  const double unit = kJitterScale * sigma_.squaredNorm() / static_cast<double>(c);
  double mult = 0.0;
  for (int step = 0; step <= kMaxJitterSteps; ++step) {
    cov_ = base;
    cov_.diagonal().array() += mult * unit;
    llt_.compute(cov_);
    if (llt_.info() == Eigen::Success) {
      jitter_ = mult * unit;
      jitter_mult_ = mult;
      logdet_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
      return;
    }
    mult = mult == 0.0 ? 1.0 : mult * 10.0;
  }
  throw DataError("model", "low-rank condition covariance is not positive definite after jitter");
}

double LowRankCov::logpdf(const Vec& delta) const {
  if (delta.size() != dim()) throw DataError("model", "delta has the wrong length");
  const Vec z = llt_.matrixL().solve(delta);
  return -0.5 * static_cast<double>(dim()) * kLog2Pi - 0.5 * logdet_ - 0.5 * z.squaredNorm();
}

double LowRankCov::logpdf_grad(const Vec& delta, Grad& g) const {
  const Index c = dim();
  const Vec alpha = llt_.solve(delta);
  const Mat inv = llt_.solve(Mat::Identity(c, c));
  // d logpdf = sum_ij G_ij dSigma_ij.
  const Mat gm = 0.5 * (alpha * alpha.transpose() - inv);
  const double trace_g = gm.trace();

  g.delta = -alpha;
  g.sigma.resize(c);
  g.rho.resize(c);
  g.xi = 0.0;
  for (Index a = 0; a < c; ++a) {
    double ds = 0.0, dr = 0.0;
    for (Index b = 0; b < c; ++b) {
      const double r_ab = a == b ? 1.0 : xi_ * rho_[a] * rho_[b];
      ds += gm(a, b) * r_ab * sigma_[b];
      if (b != a) {
        dr += gm(a, b) * sigma_[b] * rho_[b];
        g.xi += gm(a, b) * rho_[a] * rho_[b] * sigma_[a] * sigma_[b];
      }
    }
    g.sigma[a] = 2.0 * ds +
                 trace_g * jitter_mult_ * kJitterScale * 2.0 * sigma_[a] / static_cast<double>(c);
    g.rho[a] = 2.0 * xi_ * sigma_[a] * dr;
  }
  const Vec z = llt_.matrixL().solve(delta);
  return -0.5 * static_cast<double>(c) * kLog2Pi - 0.5 * logdet_ - 0.5 * z.squaredNorm();
}

LowRankCov lowrank_sigma(const Vec& sigma, const Vec& rho, double xi) {
  return LowRankCov(sigma, rho, xi);
}

// ---------------------------------------------------------------- likelihoods

Mat logit_surface(const Vec& phi, const Vec& delta) {
  return phi.replicate(1, delta.size()) + delta.transpose().replicate(phi.size(), 1);
}

double bernoulli_loglik(const IntMat& a_obs, const Mat& lambda) {
  if (a_obs.rows() != lambda.rows() || a_obs.cols() != lambda.cols())
    throw DataError("model", "A and Lambda shapes differ");
  double ll = 0.0;
  for (Index c = 0; c < a_obs.cols(); ++c)
    for (Index i = 0; i < a_obs.rows(); ++i) {
      const int a = a_obs(i, c);
      if (a == kMissing) continue;
      ll += a * lambda(i, c) - log1p_exp(lambda(i, c));
    }
  return ll;
}

DrugEvidence drug_evidence(int n_indicated, int n_present, double epsilon) {
  if (n_indicated < 1) throw DataError("model", "condition has no indicated drug");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DataError("model", "epsilon must lie in [0, 1)");
  const double n = n_indicated, m = n_present;
  const double q1 = (1.0 - epsilon) / n;
  const double q0 = epsilon;
  return {xlogy(m, q1) + xlogy(n - m, 1.0 - q1), xlogy(m, q0) + xlogy(n - m, 1.0 - q0)};
}

namespace {

int count_present(Index c, const std::vector<int>& drug_set, const IntMat& b) {
  std::vector<int> ds = drug_set;
  std::sort(ds.begin(), ds.end());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  int m = 0;
  for (int d : ds)
    if (b(d, c) == 1) ++m;
  return m;
}

double mixture(double lambda, double log_l1, double log_l0, double* w1) {
  const double lp1 = -log1p_exp(-lambda);
  const double lp0 = -log1p_exp(lambda);
  const double f = log_sum_exp(lp1 + log_l1, lp0 + log_l0);
  if (w1) *w1 = f == kNegInf ? 0.0 : std::exp(lp1 + log_l1 - f);
  return f;
}

}  // namespace

double drug_cell_loglik(Index c, const std::vector<int>& drug_set, const IntMat& drug_condition,
                        double lambda_ic, double epsilon) {
  for (int d : drug_set)
    if (d < 0 || d >= drug_condition.rows()) throw DataError("model", "drug id out of range");
  const int n = drug_condition.col(c).sum();
  const auto ev = drug_evidence(n, count_present(c, drug_set, drug_condition), epsilon);
  return mixture(lambda_ic, ev.log_l1, ev.log_l0, nullptr);
}

CellLikelihood::CellLikelihood(LikelihoodMode mode, const IntMat& a_obs,
                               const std::vector<std::vector<int>>& drug_sets,
                               const IntMat& drug_condition, double epsilon)
    : mode_(mode) {
  if (mode_ == LikelihoodMode::Direct) {
    a_ = a_obs;
    n_items_ = a_.rows();
    n_conditions_ = a_.cols();
    return;
  }
  n_items_ = static_cast<Index>(drug_sets.size());
  n_conditions_ = drug_condition.cols();
  log_l1_.resize(n_items_, n_conditions_);
  log_l0_.resize(n_items_, n_conditions_);
  std::vector<int> n_ind(n_conditions_);
  for (Index c = 0; c < n_conditions_; ++c) n_ind[c] = drug_condition.col(c).sum();
  for (Index i = 0; i < n_items_; ++i)
    for (Index c = 0; c < n_conditions_; ++c) {
      const auto ev = drug_evidence(n_ind[c], count_present(c, drug_sets[i], drug_condition),
                                    epsilon);
      log_l1_(i, c) = ev.log_l1;
      log_l0_(i, c) = ev.log_l0;
    }
}

CellLikelihood::CellLikelihood(const Dataset& data, double epsilon)
    : CellLikelihood(data.mode, data.a_obs, data.drug_sets, data.drug_condition, epsilon) {}

double CellLikelihood::evaluate(const Vec& phi, const Vec& delta, Vec* g_phi,
                                Vec* g_delta) const {
  double ll = 0.0;
  for (Index c = 0; c < n_conditions_; ++c) {
    for (Index i = 0; i < n_items_; ++i) {
      const double lambda = phi[i] + delta[c];
      double g;
      if (mode_ == LikelihoodMode::Direct) {
        const int a = a_(i, c);
        if (a == kMissing) continue;
        ll += a * lambda - log1p_exp(lambda);
        g = a - inv_logit(lambda);
      } else {
        double w1;
        const double f = mixture(lambda, log_l1_(i, c), log_l0_(i, c), &w1);
        if (f == kNegInf) return kNegInf;
        ll += f;
        g = w1 - inv_logit(lambda);
      }
      if (g_phi) (*g_phi)[i] += g;
      if (g_delta) (*g_delta)[c] += g;
    }
  }
  return ll;
}

double CellLikelihood::posterior_prob(Index i, Index c, double lambda) const {
  if (mode_ == LikelihoodMode::Direct) return inv_logit(lambda);
  double w1;
  mixture(lambda, log_l1_(i, c), log_l0_(i, c), &w1);
  return w1;
}

// ---------------------------------------------------------------- priors

namespace prior {

double half_cauchy(double x, double scale, double* grad) {
  if (!(x > 0)) return kNegInf;
  const double r = x / scale;
  if (grad) *grad = -2.0 * r / (scale * (1.0 + r * r));
  return std::log(2.0 / (std::numbers::pi * scale)) - std::log1p(r * r);
}

double half_normal(double x, double scale, double* grad) {
  if (!(x > 0)) return kNegInf;
  if (grad) *grad = -x / (scale * scale);
  return 0.5 * std::log(2.0 / std::numbers::pi) - std::log(scale) - 0.5 * x * x / (scale * scale);
}

double truncated_normal(double x, double sd, double* grad) {
  if (!(x > -1 && x < 1)) return kNegInf;
  if (grad) *grad = -x / (sd * sd);
  const double log_mass = std::log(std::erf(1.0 / (sd * std::numbers::sqrt2)));
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * x * x / (sd * sd) - log_mass;
}

double uniform_symmetric(double x) { return (x > -1 && x < 1) ? -std::log(2.0) : kNegInf; }

double beta(double x, double a, double b, double* grad) {
  if (!(x > 0 && x < 1)) return kNegInf;
  if (grad) *grad = (a - 1.0) / x - (b - 1.0) / (1.0 - x);
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
         (b - 1.0) * std::log1p(-x);
}

}  // namespace prior

// ---------------------------------------------------------------- blocks

double bym_log_density(const Vec& phi, const SparseSymMatrix& lap, double tau_s, double tau_u,
                       Vec* grad, const LaplacianSpectrum* spectrum) {
  const Index n = phi.size();
  const Vec q_phi = tau_s * (lap * phi) + tau_u * phi;
  if (spectrum) {
    if (!(tau_s > 0 && tau_u > 0)) return kNegInf;
    const BymHyper h{tau_s, tau_u};
    const double value = -0.5 * n * kLog2Pi + 0.5 * spectrum->logdet(h) - 0.5 * phi.dot(q_phi);
    if (grad) {
      grad->resize(n + 2);
      grad->head(n) = -q_phi;
      (*grad)[n] = 0.5 * spectrum->trace_inverse_laplacian(h) - 0.5 * phi.dot(lap * phi);
      (*grad)[n + 1] = 0.5 * spectrum->trace_inverse(h) - 0.5 * phi.squaredNorm();
    }
    return value;
  }
  PrecisionMatrix q = bym_precision(lap, {tau_s, tau_u});
  if (!q.positive_definite()) return kNegInf;
  const double value = -0.5 * n * kLog2Pi + 0.5 * q.logdet() - 0.5 * phi.dot(q_phi);
  if (grad) {
    grad->resize(n + 2);
    grad->head(n) = -q_phi;
    (*grad)[n] = 0.5 * q.trace_inverse_times(lap) - 0.5 * phi.dot(lap * phi);
    (*grad)[n + 1] = 0.5 * q.inverse_diagonal().sum() - 0.5 * phi.squaredNorm();
  }
  return value;
}

double delta_block_log_prior(const Vec& delta, const Vec& sigma, const Vec& rho, double xi,
                             DeltaCovariance mode, DeltaBlockGrad* g) {
  const Index c = delta.size();
  if (mode == DeltaCovariance::Diagonal) {
    const double s = sigma[0];
    double g_hc = 0.0;
    const double lp = prior::half_cauchy(s, prior::kSigmaDeltaScale, g ? &g_hc : nullptr);
    if (lp == kNegInf) return kNegInf;
    const double ss = delta.squaredNorm();
    const double value =
        lp - 0.5 * c * kLog2Pi - c * std::log(s) - 0.5 * ss / (s * s);
    if (g) {
      g->delta = -delta / (s * s);
      g->sigma = Vec::Constant(1, g_hc - c / s + ss / (s * s * s));
      g->rho.resize(0);
      g->xi = 0.0;
    }
    return value;
  }

  double value = prior::uniform_symmetric(xi);
  if (value == kNegInf) return kNegInf;
  Vec g_sigma_prior(c), g_rho_prior(c);
  for (Index j = 0; j < c; ++j) {
    value += prior::half_normal(sigma[j], prior::kSigmaScale, &g_sigma_prior[j]);
    value += prior::truncated_normal(rho[j], prior::kRhoSd, &g_rho_prior[j]);
  }
  if (value == kNegInf) return kNegInf;
  try {
    LowRankCov cov(sigma, rho, xi);
    if (!g) return value + cov.logpdf(delta);
    LowRankCov::Grad lg;
    value += cov.logpdf_grad(delta, lg);
    g->delta = lg.delta;
    g->sigma = lg.sigma + g_sigma_prior;
    g->rho = lg.rho + g_rho_prior;
    g->xi = lg.xi;
    return value;
  } catch (const DataError&) {
    return kNegInf;
  }
}

// ---------------------------------------------------------------- StaticModel

StaticLayout::StaticLayout(Index n_items_, Index n_conditions_, DeltaCovariance mode_)
    : n_items(n_items_), n_conditions(n_conditions_), mode(mode_) {
  phi = 0;
  delta = n_items;
  tau_s = delta + n_conditions;
  tau_u = tau_s + 1;
  sigma = tau_u + 1;
  n_sigma = mode == DeltaCovariance::Diagonal ? 1 : n_conditions;
  rho = sigma + n_sigma;
  n_rho = mode == DeltaCovariance::Diagonal ? 0 : n_conditions;
  xi = rho + n_rho;
  n_xi = mode == DeltaCovariance::Diagonal ? 0 : 1;
  dim = xi + n_xi;
}

StaticModel::StaticModel(Dataset data, SparseSymMatrix lap, ModelConfig cfg)
    : data_(std::move(data)), lap_(std::move(lap)), cfg_(cfg) {
  data_.validate();
  if (lap_.rows() != data_.n_items())
    throw DataError("model", "Laplacian dimension does not match the number of items");
  layout_ = StaticLayout(data_.n_items(), data_.n_conditions(), cfg_.delta_covariance);
  lik_ = CellLikelihood(data_, cfg_.epsilon);
  if (data_.n_items() <= kSpectralMaxItems)
    spectrum_ = std::make_shared<const LaplacianSpectrum>(lap_);
}

StaticModel StaticModel::from_dataset(Dataset data, int k, ModelConfig cfg, const Metric& metric) {
  data.validate();
  SparseSymMatrix lap = dfa::laplacian(build_knn_graph(data.covariates, k, metric));
  return StaticModel(std::move(data), std::move(lap), cfg);
}

std::vector<std::string> StaticModel::param_names() const {
  std::vector<std::string> names;
  names.reserve(layout_.dim);
  for (Index i = 0; i < layout_.n_items; ++i) names.push_back("phi[" + std::to_string(i) + "]");
  for (Index c = 0; c < layout_.n_conditions; ++c)
    names.push_back("delta[" + std::to_string(c) + "]");
  names.emplace_back("tau_s");
  names.emplace_back("tau_u");
  if (layout_.mode == DeltaCovariance::Diagonal) {
    names.emplace_back("sigma_delta");
  } else {
    for (Index c = 0; c < layout_.n_conditions; ++c)
      names.push_back("sigma[" + std::to_string(c) + "]");
    for (Index c = 0; c < layout_.n_conditions; ++c)
      names.push_back("rho[" + std::to_string(c) + "]");
    names.emplace_back("xi");
  }
  return names;
}

TransformSpec StaticModel::transforms() const {
  TransformSpec t;
  t.add(Constraint::Real, layout_.n_items + layout_.n_conditions)
      .add(Constraint::Positive, 2 + layout_.n_sigma)
      .add(Constraint::Symmetric, layout_.n_rho + layout_.n_xi);
  return t;
}

Vec StaticModel::flatten(const StaticParams& p) const {
  const auto& l = layout_;
  if (p.phi.size() != l.n_items || p.delta.size() != l.n_conditions ||
      p.sigma.size() != l.n_sigma || p.rho.size() != l.n_rho)
    throw DataError("model", "parameter block sizes do not match the model");
  Vec x(l.dim);
  x.segment(l.phi, l.n_items) = p.phi;
  x.segment(l.delta, l.n_conditions) = p.delta;
  x[l.tau_s] = p.tau_s;
  x[l.tau_u] = p.tau_u;
  x.segment(l.sigma, l.n_sigma) = p.sigma;
  x.segment(l.rho, l.n_rho) = p.rho;
  if (l.n_xi) x[l.xi] = p.xi;
  return x;
}

StaticParams StaticModel::unflatten(const Vec& x) const {
  const auto& l = layout_;
  if (x.size() != l.dim) throw DataError("model", "flattened parameter has the wrong length");
  StaticParams p;
  p.phi = x.segment(l.phi, l.n_items);
  p.delta = x.segment(l.delta, l.n_conditions);
  p.tau_s = x[l.tau_s];
  p.tau_u = x[l.tau_u];
  p.sigma = x.segment(l.sigma, l.n_sigma);
  p.rho = x.segment(l.rho, l.n_rho);
  p.xi = l.n_xi ? x[l.xi] : 0.0;
  return p;
}

bool StaticModel::in_support(const StaticParams& p) const {
  return p.tau_s > 0 && p.tau_u > 0 && (p.sigma.array() > 0).all() &&
         (p.rho.array().abs() < 1).all() && std::abs(p.xi) < 1 && p.phi.allFinite() &&
         p.delta.allFinite() && std::isfinite(p.tau_s) && std::isfinite(p.tau_u) &&
         p.sigma.allFinite();
}

double StaticModel::log_prior(const StaticParams& p) const {
  if (!in_support(p)) return kNegInf;
  double lp = prior::half_cauchy(p.tau_s, prior::kTauScale, nullptr) +
              prior::half_cauchy(p.tau_u, prior::kTauScale, nullptr);
  lp += bym_log_density(p.phi, lap_, p.tau_s, p.tau_u, nullptr, spectrum_.get());
  if (lp == kNegInf) return kNegInf;
  return lp + delta_block_log_prior(p.delta, p.sigma, p.rho, p.xi, layout_.mode, nullptr);
}

double StaticModel::log_likelihood(const StaticParams& p) const {
  return lik_.evaluate(p.phi, p.delta, nullptr, nullptr);
}

double StaticModel::log_posterior(const Vec& x, Vec* grad) const {
  const StaticParams p = unflatten(x);
  const auto& l = layout_;
  if (grad) grad->setZero(l.dim);
  if (!in_support(p)) return kNegInf;

  double g_ts = 0.0, g_tu = 0.0;
  double value = prior::half_cauchy(p.tau_s, prior::kTauScale, grad ? &g_ts : nullptr) +
                 prior::half_cauchy(p.tau_u, prior::kTauScale, grad ? &g_tu : nullptr);

  Vec g_bym;
  const double bym =
      bym_log_density(p.phi, lap_, p.tau_s, p.tau_u, grad ? &g_bym : nullptr, spectrum_.get());
  if (bym == kNegInf) return kNegInf;
  value += bym;

  DeltaBlockGrad gd;
  const double dp =
      delta_block_log_prior(p.delta, p.sigma, p.rho, p.xi, l.mode, grad ? &gd : nullptr);
  if (dp == kNegInf) return kNegInf;
  value += dp;

  if (!grad) return value + lik_.evaluate(p.phi, p.delta, nullptr, nullptr);

  Vec g_phi = g_bym.head(l.n_items);
  Vec g_delta = gd.delta;
  const double ll = lik_.evaluate(p.phi, p.delta, &g_phi, &g_delta);
  if (ll == kNegInf) {
    grad->setZero();
    return kNegInf;
  }
  value += ll;

  grad->segment(l.phi, l.n_items) = g_phi;
  grad->segment(l.delta, l.n_conditions) = g_delta;
  (*grad)[l.tau_s] = g_ts + g_bym[l.n_items];
  (*grad)[l.tau_u] = g_tu + g_bym[l.n_items + 1];
  grad->segment(l.sigma, l.n_sigma) = gd.sigma;
  grad->segment(l.rho, l.n_rho) = gd.rho;
  if (l.n_xi) (*grad)[l.xi] = gd.xi;
  return value;
}

double log_prior(const StaticParams& p, const SparseSymMatrix& lap, DeltaCovariance mode) {
  Dataset stub;
  stub.covariates = Mat::Zero(p.phi.size(), 1);
  stub.a_obs = IntMat::Constant(p.phi.size(), p.delta.size(), kMissing);
  StaticModel m(std::move(stub), lap, {mode, 0.01});
  return m.log_prior(p);
}

LogDensity joint_logpost(const StaticParams& p, const Dataset& data, const ItemGraph& graph,
                         const ModelConfig& cfg) {
  StaticModel m(data, laplacian(graph), cfg);
  LogDensity out;
  out.value = m.log_posterior(m.flatten(p), &out.gradient);
  return out;
}

Mat posterior_condition_prob(const PosteriorSamples& samples, const CellLikelihood& lik) {
  const Mat phi = samples.block("phi");
  const Mat delta = samples.block("delta");
  const Index n = lik.n_items(), c = lik.n_conditions();
  if (phi.cols() != n || delta.cols() != c)
    throw DataError("model", "samples do not match the model dimensions");
  if (samples.n_draws() == 0) throw DataError("model", "no posterior draws");
  Mat prob = Mat::Zero(n, c);
  for (Index s = 0; s < samples.n_draws(); ++s)
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < n; ++i)
        prob(i, j) += lik.posterior_prob(i, j, phi(s, i) + delta(s, j));
  return prob / static_cast<double>(samples.n_draws());
}

Mat posterior_condition_prob(const PosteriorSamples& samples, const StaticModel& model) {
  return posterior_condition_prob(samples, model.likelihood());
}

}  // namespace dfa
