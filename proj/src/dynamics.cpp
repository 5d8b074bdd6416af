#include "dfa/dynamics.hpp"

namespace dfa {

double ou_transition_logpdf(const Vec& phi_t, const Vec& phi_prev, double dt, OuParams ou) {
  if (!(dt > 0)) throw DataError("dynamics", "time step must be positive");
  if (phi_t.size() != phi_prev.size()) throw DataError("dynamics", "state lengths differ");
  const double log_rho = std::log(ou.rho_ou);
  const double a = std::exp(dt * log_rho);
  const double v = -ou.sigma_ou * ou.sigma_ou * std::expm1(2.0 * dt * log_rho);
  const Vec r = phi_t - a * phi_prev;
  const double n = static_cast<double>(phi_t.size());
  return -0.5 * n * (kLog2Pi + std::log(v)) - 0.5 * r.squaredNorm() / v;
}

// ---------------------------------------------------------------- dataset

Index LongitudinalDataset::n_conditions() const {
  if (mode == LikelihoodMode::Drug) return drug_condition.cols();
  return a_obs.empty() ? 0 : a_obs.front().cols();
}

void LongitudinalDataset::validate() const {
  const Index n = n_items();
  if (n < 1) throw DataError("dynamics", "dataset has no items");
  if (times.rows() != n || times.cols() < 1)
    throw DataError("dynamics", "visit times must have one row per item");
  if (!times.allFinite()) throw DataError("dynamics", "visit times must be finite");
  for (Index i = 0; i < n; ++i)
    for (Index t = 1; t < times.cols(); ++t)
      if (!(times(i, t) > times(i, t - 1)))
        throw DataError("dynamics", "visit times of item " + std::to_string(i) +
                                        " are not strictly increasing");
  const std::size_t visits = static_cast<std::size_t>(times.cols());
  if (mode == LikelihoodMode::Direct) {
    if (a_obs.size() != visits) throw DataError("dynamics", "need one A matrix per visit");
  } else if (drug_sets.size() != visits) {
    throw DataError("dynamics", "need one drug-set list per visit");
  }
  for (Index t = 0; t < times.cols(); ++t) visit(t).validate();
}

Dataset LongitudinalDataset::visit(Index t) const {
  Dataset d;
  d.covariates = covariates;
  d.mode = mode;
  d.drug_condition = drug_condition;
  if (mode == LikelihoodMode::Direct) {
    d.a_obs = a_obs.at(static_cast<std::size_t>(t));
  } else {
    d.drug_sets = drug_sets.at(static_cast<std::size_t>(t));
  }
  return d;
}

LongitudinalDataset LongitudinalDataset::subset(const std::vector<int>& items) const {
  LongitudinalDataset out;
  out.mode = mode;
  out.drug_condition = drug_condition;
  const Index m = static_cast<Index>(items.size());
  out.covariates.resize(m, covariates.cols());
  out.times.resize(m, times.cols());
  for (Index r = 0; r < m; ++r) {
    out.covariates.row(r) = covariates.row(items[r]);
    out.times.row(r) = times.row(items[r]);
  }
  for (const auto& a : a_obs) {
    IntMat s(m, a.cols());
    for (Index r = 0; r < m; ++r) s.row(r) = a.row(items[r]);
    out.a_obs.push_back(std::move(s));
  }
  for (const auto& sets : drug_sets) {
    std::vector<std::vector<int>> s;
    for (int i : items) s.push_back(sets[i]);
    out.drug_sets.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------- transitions

namespace {

struct StepTerms {
  Vec a, v, d;
};

StepTerms ou_terms(const Vec& dt, OuParams ou) {
  const double log_rho = std::log(ou.rho_ou);
  const double s2 = ou.sigma_ou * ou.sigma_ou;
  StepTerms s;
  s.a = (dt.array() * log_rho).exp();
  s.v = (-s2) * (2.0 * dt.array() * log_rho).unaryExpr([](double x) { return std::expm1(x); });
  s.d = s.v.cwiseInverse();
  return s;
}

SparseSymMatrix step_precision(const Vec& d, const SparseSymMatrix& lap, double tau_s,
                               double tau_u, bool spatial) {
  const Index n = d.size();
  SpMat diag(n, n);
  diag.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Index i = 0; i < n; ++i) diag.insert(i, i) = d[i] + (spatial ? tau_u : 0.0);
  if (!spatial) return diag;
  SpMat p = tau_s * lap + diag;
  p.prune(0.0);
  return p;
}

}  // namespace

TransitionStep transition_step(const Vec& phi_prev, const Vec& dt, OuParams ou,
                               const SparseSymMatrix& lap, double tau_s, double tau_u,
                               bool spatial_potential) {
  const auto s = ou_terms(dt, ou);
  TransitionStep out;
  out.a = s.a;
  out.v = s.v;
  out.precision = step_precision(s.d, lap, tau_s, tau_u, spatial_potential);
  const Vec b = s.d.cwiseProduct(s.a).cwiseProduct(phi_prev);
  out.mean = PrecisionMatrix(out.precision).solve(b);
  return out;
}

// ---------------------------------------------------------------- model

DynamicLayout::DynamicLayout(Index n_items_, Index n_visits_, Index n_conditions_,
                             DeltaCovariance mode_)
    : n_items(n_items_), n_visits(n_visits_), n_conditions(n_conditions_), mode(mode_) {
  phi = 0;
  delta = n_items * n_visits;
  tau_s = delta + n_conditions;
  tau_u = tau_s + 1;
  sigma = tau_u + 1;
  n_sigma = mode == DeltaCovariance::Diagonal ? 1 : n_conditions;
  rho = sigma + n_sigma;
  n_rho = mode == DeltaCovariance::Diagonal ? 0 : n_conditions;
  xi = rho + n_rho;
  n_xi = mode == DeltaCovariance::Diagonal ? 0 : 1;
  rho_ou = xi + n_xi;
  sigma_ou = rho_ou + 1;
  dim = sigma_ou + 1;
}

DynamicModel::DynamicModel(LongitudinalDataset data, SparseSymMatrix lap, DynamicConfig cfg)
    : data_(std::move(data)), lap_(std::move(lap)), cfg_(cfg) {
  data_.validate();
  if (lap_.rows() != data_.n_items())
    throw DataError("dynamics", "Laplacian dimension does not match the number of items");
  layout_ = DynamicLayout(data_.n_items(), data_.n_visits(), data_.n_conditions(),
                          cfg_.delta_covariance);
  for (Index t = 0; t < data_.n_visits(); ++t)
    lik_.emplace_back(data_.visit(t), cfg_.epsilon);
  const Index steps = data_.n_visits() - 1;
  dt_.resize(data_.n_items(), steps);
  for (Index t = 0; t < steps; ++t) dt_.col(t) = data_.times.col(t + 1) - data_.times.col(t);
  if (data_.n_items() <= kSpectralMaxItems)
    spectrum_ = std::make_shared<const LaplacianSpectrum>(lap_);
}

DynamicModel DynamicModel::from_dataset(LongitudinalDataset data, int k, DynamicConfig cfg,
                                        const Metric& metric) {
  data.validate();
  SparseSymMatrix lap = dfa::laplacian(build_knn_graph(data.covariates, k, metric));
  return DynamicModel(std::move(data), std::move(lap), cfg);
}

std::vector<std::string> DynamicModel::param_names() const {
  const auto& l = layout_;
  std::vector<std::string> names;
  names.reserve(l.dim);
  for (Index t = 0; t < l.n_visits; ++t)
    for (Index i = 0; i < l.n_items; ++i)
      names.push_back("phi[" + std::to_string(t) + "," + std::to_string(i) + "]");
  for (Index c = 0; c < l.n_conditions; ++c) names.push_back("delta[" + std::to_string(c) + "]");
  names.emplace_back("tau_s");
  names.emplace_back("tau_u");
  if (l.mode == DeltaCovariance::Diagonal) {
    names.emplace_back("sigma_delta");
  } else {
    for (Index c = 0; c < l.n_conditions; ++c)
      names.push_back("sigma[" + std::to_string(c) + "]");
    for (Index c = 0; c < l.n_conditions; ++c) names.push_back("rho[" + std::to_string(c) + "]");
    names.emplace_back("xi");
  }
  names.emplace_back("rho_ou");
  names.emplace_back("sigma_ou");
  return names;
}

TransformSpec DynamicModel::transforms() const {
  const auto& l = layout_;
  TransformSpec t;
  t.add(Constraint::Real, l.n_items * l.n_visits + l.n_conditions)
      .add(Constraint::Positive, 2 + l.n_sigma)
      .add(Constraint::Symmetric, l.n_rho + l.n_xi)
      .add(Constraint::Unit, 1)
      .add(Constraint::Positive, 1);
  return t;
}

Vec DynamicModel::flatten(const DynamicParams& p) const {
  const auto& l = layout_;
  if (p.phi.rows() != l.n_items || p.phi.cols() != l.n_visits ||
      p.delta.size() != l.n_conditions || p.sigma.size() != l.n_sigma || p.rho.size() != l.n_rho)
    throw DataError("dynamics", "parameter block sizes do not match the model");
  Vec x(l.dim);
  x.segment(l.phi, l.n_items * l.n_visits) = p.phi.reshaped();
  x.segment(l.delta, l.n_conditions) = p.delta;
  x[l.tau_s] = p.tau_s;
  x[l.tau_u] = p.tau_u;
  x.segment(l.sigma, l.n_sigma) = p.sigma;
  x.segment(l.rho, l.n_rho) = p.rho;
  if (l.n_xi) x[l.xi] = p.xi;
  x[l.rho_ou] = p.ou.rho_ou;
  x[l.sigma_ou] = p.ou.sigma_ou;
  return x;
}

DynamicParams DynamicModel::unflatten(const Vec& x) const {
  const auto& l = layout_;
  if (x.size() != l.dim) throw DataError("dynamics", "flattened parameter has the wrong length");
  DynamicParams p;
  p.phi = x.segment(l.phi, l.n_items * l.n_visits).reshaped(l.n_items, l.n_visits);
  p.delta = x.segment(l.delta, l.n_conditions);
  p.tau_s = x[l.tau_s];
  p.tau_u = x[l.tau_u];
  p.sigma = x.segment(l.sigma, l.n_sigma);
  p.rho = x.segment(l.rho, l.n_rho);
  p.xi = l.n_xi ? x[l.xi] : 0.0;
  p.ou = {x[l.rho_ou], x[l.sigma_ou]};
  return p;
}

bool DynamicModel::in_support(const DynamicParams& p) const {
  return p.tau_s > 0 && p.tau_u > 0 && std::isfinite(p.tau_s) && std::isfinite(p.tau_u) &&
         (p.sigma.array() > 0).all() && p.sigma.allFinite() && (p.rho.array().abs() < 1).all() &&
         std::abs(p.xi) < 1 && p.phi.allFinite() && p.delta.allFinite() && p.ou.rho_ou > 0 &&
         p.ou.rho_ou < 1 && p.ou.sigma_ou > 0 && std::isfinite(p.ou.sigma_ou);
}

double DynamicModel::initial_log_density(const DynamicParams& p) const {
  return bym_log_density(p.phi.col(0), lap_, p.tau_s, 1.0 + p.tau_u, nullptr, spectrum_.get());
}

double DynamicModel::transition_log_density(const DynamicParams& p) const {
  double total = 0.0;
  const Index n = layout_.n_items;
  for (Index t = 1; t < layout_.n_visits; ++t) {
    const auto step = transition_step(p.phi.col(t - 1), dt_.col(t - 1), p.ou, lap_, p.tau_s,
                                      p.tau_u, cfg_.spatial_potential);
    const PrecisionMatrix q(step.precision);
    const Vec r = p.phi.col(t) - step.mean;
    total += -0.5 * n * kLog2Pi + 0.5 * q.logdet() - 0.5 * r.dot(q.matrix() * r);
  }
  return total;
}

double DynamicModel::log_likelihood(const DynamicParams& p) const {
  double ll = 0.0;
  for (Index t = 0; t < layout_.n_visits; ++t)
    ll += lik_[t].evaluate(p.phi.col(t), p.delta, nullptr, nullptr);
  return ll;
}

double DynamicModel::log_posterior(const Vec& x, Vec* grad) const {
  const auto& l = layout_;
  const DynamicParams p = unflatten(x);
  if (grad) grad->setZero(l.dim);
  if (!in_support(p)) return kNegInf;
  const Index n = l.n_items;
  const bool want = grad != nullptr;

  double g_ts = 0.0, g_tu = 0.0, g_rho_ou = 0.0, g_sigma_ou = 0.0;
  double value = prior::half_cauchy(p.tau_s, prior::kTauScale, want ? &g_ts : nullptr) +
                 prior::half_cauchy(p.tau_u, prior::kTauScale, want ? &g_tu : nullptr) +
                 prior::beta(p.ou.rho_ou, prior::kRhoOuA, prior::kRhoOuB,
                             want ? &g_rho_ou : nullptr) +
                 prior::half_normal(p.ou.sigma_ou, prior::kSigmaOuScale,
                                    want ? &g_sigma_ou : nullptr);

  Mat g_phi = Mat::Zero(n, l.n_visits);
  Vec g0;
  const double init = bym_log_density(p.phi.col(0), lap_, p.tau_s, 1.0 + p.tau_u,
                                      want ? &g0 : nullptr, spectrum_.get());
  if (init == kNegInf) return kNegInf;
  value += init;
  if (want) {
    g_phi.col(0) += g0.head(n);
    g_ts += g0[n];
    g_tu += g0[n + 1];
  }

  DeltaBlockGrad gd;
  const double dp = delta_block_log_prior(p.delta, p.sigma, p.rho, p.xi, l.mode,
                                          want ? &gd : nullptr);
  if (dp == kNegInf) return kNegInf;
  value += dp;

  const double s2 = p.ou.sigma_ou * p.ou.sigma_ou;
  const bool spatial = cfg_.spatial_potential;
  for (Index t = 1; t < l.n_visits; ++t) {
    const Vec dt = dt_.col(t - 1);
    const auto s = ou_terms(dt, p.ou);
    const PrecisionMatrix q(step_precision(s.d, lap_, p.tau_s, p.tau_u, spatial));
    if (!q.positive_definite()) return kNegInf;
    const Vec prev = p.phi.col(t - 1);
    const Vec cur = p.phi.col(t);
    const Vec da = s.d.cwiseProduct(s.a);
    const Vec b = da.cwiseProduct(prev);
    const Vec z = q.solve(b);
    const Vec p_cur = q.matrix() * cur;
    value += -0.5 * n * kLog2Pi + 0.5 * q.logdet() - 0.5 * cur.dot(p_cur) + cur.dot(b) -
             0.5 * b.dot(z);
    if (!want) continue;

    g_phi.col(t) += b - p_cur;
    g_phi.col(t - 1) += da.cwiseProduct(cur - z);
    const Vec diag_inv = q.inverse_diagonal();
    if (spatial) {
      g_ts += 0.5 * q.trace_inverse_times(lap_) - 0.5 * cur.dot(lap_ * cur) + 0.5 * z.dot(lap_ * z);
      g_tu += 0.5 * diag_inv.sum() - 0.5 * cur.squaredNorm() + 0.5 * z.squaredNorm();
    }
    for (Index i = 0; i < n; ++i) {
      const double ap = s.a[i] * prev[i];
      const double g_d = 0.5 * diag_inv[i] - 0.5 * cur[i] * cur[i] + cur[i] * ap - z[i] * ap +
                         0.5 * z[i] * z[i];
      const double g_a = s.d[i] * prev[i] * (cur[i] - z[i]);
      const double dd_drho = 2.0 * dt[i] * s.d[i] * s.d[i] * s2 * s.a[i] * s.a[i] / p.ou.rho_ou;
      const double da_drho = dt[i] * s.a[i] / p.ou.rho_ou;
      g_rho_ou += g_d * dd_drho + g_a * da_drho;
      g_sigma_ou += g_d * (-2.0 * s.d[i] / p.ou.sigma_ou);
    }
  }

  Vec g_delta = want ? gd.delta : Vec();
  for (Index t = 0; t < l.n_visits; ++t) {
    Vec gp;
    if (want) gp = Vec::Zero(n);
    const double ll = lik_[t].evaluate(p.phi.col(t), p.delta, want ? &gp : nullptr,
                                       want ? &g_delta : nullptr);
    if (ll == kNegInf) {
      if (grad) grad->setZero();
      return kNegInf;
    }
    value += ll;
    if (want) g_phi.col(t) += gp;
  }
  if (!want) return value;

  grad->segment(l.phi, n * l.n_visits) = g_phi.reshaped();
  grad->segment(l.delta, l.n_conditions) = g_delta;
  (*grad)[l.tau_s] = g_ts;
  (*grad)[l.tau_u] = g_tu;
  grad->segment(l.sigma, l.n_sigma) = gd.sigma;
  grad->segment(l.rho, l.n_rho) = gd.rho;
  if (l.n_xi) (*grad)[l.xi] = gd.xi;
  (*grad)[l.rho_ou] = g_rho_ou;
  (*grad)[l.sigma_ou] = g_sigma_ou;
  return value;
}

LogDensity dynamic_logpost(const DynamicParams& p, const LongitudinalDataset& data,
                           const ItemGraph& graph, const DynamicConfig& cfg) {
  DynamicModel m(data, laplacian(graph), cfg);
  LogDensity out;
  out.value = m.log_posterior(m.flatten(p), &out.gradient);
  return out;
}

}  // namespace dfa
