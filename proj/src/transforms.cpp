#include "dfa/transforms.hpp"

namespace dfa {

namespace {

constexpr double kLog2 = 0.69314718055994530942;

// log(1 - tanh(u)^2) = log sech(u)^2, stable for large |u|.
double log_sech2(double u) {
  const double a = std::abs(u);
  return 2.0 * (kLog2 - a - std::log1p(std::exp(-2.0 * a)));
}

}  // namespace

TransformSpec& TransformSpec::add(Constraint kind, Index length) {
  if (length <= 0) return *this;
  segments_.push_back({kind, dim_, length});
  dim_ += length;
  return *this;
}

Vec TransformSpec::constrain(const Vec& u) const {
  Vec x = u;
  for (const auto& s : segments_) {
    auto seg = x.segment(s.offset, s.length);
    switch (s.kind) {
      case Constraint::Real: break;
      case Constraint::Positive: seg = seg.array().exp(); break;
      case Constraint::Symmetric: seg = seg.array().tanh(); break;
      case Constraint::Unit:
        for (Index i = 0; i < s.length; ++i) seg[i] = inv_logit(seg[i]);
        break;
    }
  }
  return x;
}

Vec TransformSpec::unconstrain(const Vec& x) const {
  Vec u = x;
  for (const auto& s : segments_) {
    auto seg = u.segment(s.offset, s.length);
    for (Index i = 0; i < s.length; ++i) {
      const double v = seg[i];
      switch (s.kind) {
        case Constraint::Real: break;
        case Constraint::Positive:
          if (!(v > 0)) throw DataError("transforms", "positive parameter out of support");
          seg[i] = std::log(v);
          break;
        case Constraint::Symmetric:
          if (!(v > -1 && v < 1)) throw DataError("transforms", "(-1,1) parameter out of support");
          seg[i] = std::atanh(v);
          break;
        case Constraint::Unit:
          if (!(v > 0 && v < 1)) throw DataError("transforms", "(0,1) parameter out of support");
          seg[i] = std::log(v) - std::log1p(-v);
          break;
      }
    }
  }
  return u;
}

double TransformSpec::log_jacobian(const Vec& u) const {
  double lj = 0.0;
  for (const auto& s : segments_) {
    for (Index i = 0; i < s.length; ++i) {
      const double v = u[s.offset + i];
      switch (s.kind) {
        case Constraint::Real: break;
        case Constraint::Positive: lj += v; break;
        case Constraint::Symmetric: lj += log_sech2(v); break;
        case Constraint::Unit: lj += -log1p_exp(-v) - log1p_exp(v); break;
      }
    }
  }
  return lj;
}

Vec TransformSpec::chain_gradient(const Vec& u, const Vec& x, const Vec& grad_x) const {
  Vec g = grad_x;
  for (const auto& s : segments_) {
    for (Index i = s.offset; i < s.offset + s.length; ++i) {
      switch (s.kind) {
        case Constraint::Real: break;
        case Constraint::Positive: g[i] = grad_x[i] * x[i] + 1.0; break;
        case Constraint::Symmetric: {
          const double t = std::tanh(u[i]);
          g[i] = grad_x[i] * std::exp(log_sech2(u[i])) - 2.0 * t;
          break;
        }
        case Constraint::Unit: g[i] = grad_x[i] * x[i] * (1.0 - x[i]) + 1.0 - 2.0 * x[i]; break;
      }
    }
  }
  return g;
}

}  // namespace dfa
