#include "dfa/gmrf.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include <algorithm>

namespace dfa {

namespace {

using Ldlt = Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;

bool is_symmetric(const SpMat& q) {
  const SpMat t = q.transpose();
  return (q - t).norm() <= 1e-12 * std::max(1.0, q.norm());
}

}  // namespace

struct PrecisionMatrix::Factor {
  Ldlt ldlt;
  bool ok = false;
  double min_pivot = 0.0;
  double max_diag = 0.0;
  std::vector<int> perm;  // original index -> permuted index

  // Selected inverse of the permuted matrix, aligned with the storage of L.
  bool have_selinv = false;
  Vec sel_diag;
  std::vector<double> sel_off;

  const SpMat& lower() const { return ldlt.matrixL().nestedExpression(); }

  double lookup(int a, int b) const {
    if (a == b) return sel_diag[a];
    const int c = std::min(a, b), r = std::max(a, b);
    const SpMat& l = lower();
    const int* begin = l.innerIndexPtr() + l.outerIndexPtr()[c];
    const int* end = l.innerIndexPtr() + l.outerIndexPtr()[c + 1];
    const int* it = std::lower_bound(begin, end, r);
    if (it == end || *it != r)
      throw DataError("gmrf", "requested inverse entry lies outside the factor pattern");
    return sel_off[it - l.innerIndexPtr()];
  }

  // Takahashi recursion: Sigma_ij = delta_ij / D_i - sum_{k>i} L_ki Sigma_kj,
  // evaluated for (i, j) on the pattern of L, columns right to left.
  void selected_inverse() {
    if (have_selinv) return;
    const SpMat& l = lower();
    const Vec& d = ldlt.vectorD();
    const int n = static_cast<int>(l.cols());
    sel_diag.resize(n);
    sel_off.assign(l.nonZeros(), 0.0);
    const int* outer = l.outerIndexPtr();
    const int* inner = l.innerIndexPtr();
    const double* val = l.valuePtr();
    for (int i = n - 1; i >= 0; --i) {
      const int b = outer[i], e = outer[i + 1];
      for (int pj = b; pj < e; ++pj) {
        const int j = inner[pj];
        double s = 0.0;
        for (int pk = b; pk < e; ++pk) s += val[pk] * lookup(inner[pk], j);
        sel_off[pj] = -s;
      }
      double s = 0.0;
      for (int pk = b; pk < e; ++pk) s += val[pk] * sel_off[pk];
      sel_diag[i] = 1.0 / d[i] - s;
    }
    have_selinv = true;
  }
};

PrecisionMatrix::PrecisionMatrix(SparseSymMatrix q) : q_(std::move(q)) {
  if (q_.rows() != q_.cols()) throw DataError("gmrf", "precision matrix must be square");
  q_.makeCompressed();
}

PrecisionMatrix PrecisionMatrix::from_dense(const Mat& q) {
  return PrecisionMatrix(q.sparseView(1.0, 0.0));
}

PrecisionMatrix::~PrecisionMatrix() = default;
PrecisionMatrix::PrecisionMatrix(PrecisionMatrix&&) noexcept = default;
PrecisionMatrix& PrecisionMatrix::operator=(PrecisionMatrix&&) noexcept = default;

const PrecisionMatrix::Factor& PrecisionMatrix::factor() const {
  if (factor_) return *factor_;
  auto f = std::make_unique<Factor>();
  const Index n = q_.rows();
  f->max_diag = 0.0;
  for (Index i = 0; i < n; ++i) f->max_diag = std::max(f->max_diag, std::abs(q_.coeff(i, i)));
  if (n == 0) {
    f->ok = true;
    factor_ = std::move(f);
    return *factor_;
  }
  f->ldlt.compute(q_);
  if (f->ldlt.info() != Eigen::Success || !is_symmetric(q_)) {
    f->ok = false;
    f->min_pivot = f->ldlt.info() == Eigen::Success ? f->ldlt.vectorD().minCoeff() : 0.0;
  } else {
    f->min_pivot = f->ldlt.vectorD().minCoeff();
    f->ok = f->min_pivot > kPivotTolerance * f->max_diag && std::isfinite(f->min_pivot);
  }
  f->perm.resize(n);
  const auto& p = f->ldlt.permutationP();
  for (Index i = 0; i < n; ++i) f->perm[i] = p.size() ? p.indices()[i] : static_cast<int>(i);
  factor_ = std::move(f);
  return *factor_;
}

const PrecisionMatrix::Factor& PrecisionMatrix::pd_factor() const {
  const Factor& f = factor();
  if (!f.ok)
    throw DataError("gmrf", "precision matrix is not positive definite (min pivot " +
                                std::to_string(f.min_pivot) + ")");
  return f;
}

bool PrecisionMatrix::positive_definite() const { return factor().ok; }
double PrecisionMatrix::min_pivot() const { return factor().min_pivot; }

double PrecisionMatrix::logdet() const {
  const Factor& f = pd_factor();
  if (dim() == 0) return 0.0;
  return f.ldlt.vectorD().array().log().sum();
}

Vec PrecisionMatrix::solve(const Vec& b) const {
  if (b.size() != dim()) throw DataError("gmrf", "dimension mismatch in solve");
  return pd_factor().ldlt.solve(b);
}

Vec PrecisionMatrix::sample(Rng& rng) const {
  const Factor& f = pd_factor();
  const Index n = dim();
  std::normal_distribution<double> normal;
  Vec z(n);
  for (Index i = 0; i < n; ++i) z[i] = normal(rng);
  // y = L^{-T} D^{-1/2} z has covariance (L D L^T)^{-1}; then undo the ordering.
  z.array() /= f.ldlt.vectorD().array().sqrt();
  Vec y = f.ldlt.matrixU().solve(z);
  Vec x(n);
  for (Index i = 0; i < n; ++i) x[i] = y[f.perm[i]];
  return x;
}

Vec PrecisionMatrix::inverse_diagonal() const {
  pd_factor();
  Factor& f = *factor_;
  f.selected_inverse();
  Vec out(dim());
  for (Index i = 0; i < dim(); ++i) out[i] = f.sel_diag[f.perm[i]];
  return out;
}

double PrecisionMatrix::trace_inverse_times(const SparseSymMatrix& m) const {
  if (m.rows() != dim() || m.cols() != dim())
    throw DataError("gmrf", "dimension mismatch in trace");
  pd_factor();
  Factor& f = *factor_;
  f.selected_inverse();
  double tr = 0.0;
  for (Index j = 0; j < m.outerSize(); ++j)
    for (SpMat::InnerIterator it(m, j); it; ++it)
      tr += it.value() * f.lookup(f.perm[it.row()], f.perm[j]);
  return tr;
}

PrecisionMatrix bym_precision(const SparseSymMatrix& lap, BymHyper h) {
  if (!(h.tau_s >= 0.0) || !(h.tau_u >= 0.0) || !std::isfinite(h.tau_s) ||
      !std::isfinite(h.tau_u))
    throw DataError("gmrf", "BYM precisions must be finite and non-negative");
  if (lap.rows() != lap.cols()) throw DataError("gmrf", "Laplacian must be square");
  SpMat eye(lap.rows(), lap.cols());
  eye.setIdentity();
  SpMat q = h.tau_s * lap + h.tau_u * eye;
  q.prune(0.0);
  return PrecisionMatrix(std::move(q));
}

double gmrf_logpdf(const Vec& x, const PrecisionMatrix& q) {
  if (x.size() != q.dim()) throw DataError("gmrf", "dimension mismatch in logpdf");
  const double n = static_cast<double>(x.size());
  return -0.5 * n * kLog2Pi + 0.5 * q.logdet() - 0.5 * x.dot(q.matrix() * x);
}

Vec gmrf_grad(const Vec& x, const PrecisionMatrix& q) {
  if (x.size() != q.dim()) throw DataError("gmrf", "dimension mismatch in gradient");
  return -(q.matrix() * x);
}

Vec gmrf_sample(const PrecisionMatrix& q, Rng& rng) { return q.sample(rng); }

LaplacianSpectrum::LaplacianSpectrum(const SparseSymMatrix& lap) {
  if (lap.rows() != lap.cols()) throw DataError("gmrf", "Laplacian must be square");
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(lap), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw DataError("gmrf", "Laplacian eigensolve failed");
  // The spectrum is non-negative; clip round-off below zero.
  lambda_ = es.eigenvalues().cwiseMax(0.0);
}

double LaplacianSpectrum::logdet(BymHyper h) const {
  return (h.tau_s * lambda_.array() + h.tau_u).log().sum();
}

double LaplacianSpectrum::trace_inverse(BymHyper h) const {
  return (h.tau_s * lambda_.array() + h.tau_u).inverse().sum();
}

double LaplacianSpectrum::trace_inverse_laplacian(BymHyper h) const {
  return (lambda_.array() / (h.tau_s * lambda_.array() + h.tau_u)).sum();
}

ValidityReport check_valid_joint(const PrecisionMatrix& q_phi, const PrecisionMatrix& q_delta) {
  ValidityReport r;
  const bool phi_ok = q_phi.positive_definite();
  const bool delta_ok = q_delta.positive_definite();
  r.min_pivot = std::numeric_limits<double>::infinity();
  if (q_phi.dim() > 0) r.min_pivot = std::min(r.min_pivot, q_phi.min_pivot());
  if (q_delta.dim() > 0) r.min_pivot = std::min(r.min_pivot, q_delta.min_pivot());
  r.valid = phi_ok && delta_ok;
  if (!phi_ok) {
    r.failed_block = "phi";
    r.message = "Q_phi is not strictly positive definite";
  } else if (!delta_ok) {
    r.failed_block = "delta";
    r.message = "Q_delta is not strictly positive definite";
  }
  return r;
}

}  // namespace dfa
