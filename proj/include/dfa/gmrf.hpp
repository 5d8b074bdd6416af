#pragma once

#include "dfa/common.hpp"
#include "dfa/graph.hpp"

#include <memory>
#include <string>

namespace dfa {

// Precisions of the structured (ICAR) and unstructured (iid) components.
struct BymHyper {
  double tau_s;
  double tau_u;
};

// Sparse SPD precision with a lazily computed fill-reducing LDL^T factor.
//
// The factor is cached on first use; the object is otherwise immutable. A
// PrecisionMatrix is cheap to build and is meant to be rebuilt whenever the
// hyperparameters change, so it carries no invalidation logic. Instances may be
// moved between threads but must not be shared for concurrent first use.
class PrecisionMatrix {
 public:
  explicit PrecisionMatrix(SparseSymMatrix q);
  static PrecisionMatrix from_dense(const Mat& q);

  ~PrecisionMatrix();
  PrecisionMatrix(PrecisionMatrix&&) noexcept;
  PrecisionMatrix& operator=(PrecisionMatrix&&) noexcept;

  const SparseSymMatrix& matrix() const { return q_; }
  Index dim() const { return q_.rows(); }

  // Pivots are the D of P Q P^T = L D L^T. Positive definiteness is judged
  // with a relative tolerance: min pivot > kPivotTolerance * max |Q_ii|.
  static constexpr double kPivotTolerance = 1e-10;
  bool positive_definite() const;
  double min_pivot() const;

  // Throw DataError when the matrix is not positive definite.
  double logdet() const;
  Vec solve(const Vec& b) const;
  // Draw from N(0, Q^{-1}).
  Vec sample(Rng& rng) const;

  // Diagonal of Q^{-1} by selected inversion on the factor pattern.
  Vec inverse_diagonal() const;
  // tr(Q^{-1} M) for symmetric M whose pattern lies inside the pattern of Q.
  double trace_inverse_times(const SparseSymMatrix& m) const;

 private:
  struct Factor;
  const Factor& factor() const;
  const Factor& pd_factor() const;

  SparseSymMatrix q_;
  mutable std::unique_ptr<Factor> factor_;
};

// tau_s * L + tau_u * I. Zero precisions are accepted here so the degenerate
// cases can be assembled and checked; the model layer keeps both strictly
// positive.
PrecisionMatrix bym_precision(const SparseSymMatrix& lap, BymHyper h);

double gmrf_logpdf(const Vec& x, const PrecisionMatrix& q);
Vec gmrf_grad(const Vec& x, const PrecisionMatrix& q);
Vec gmrf_sample(const PrecisionMatrix& q, Rng& rng);

struct ValidityReport {
  bool valid = false;
  double min_pivot = 0.0;
  std::string failed_block;  // "phi", "delta" or empty
  std::string message;
};

// Checks that blockdiag(Q_phi, Q_delta) is symmetric and strictly positive
// definite. Never throws for non-PD input; the report says which block failed.
// Eigenvalues of a graph Laplacian, for evaluating log-determinants and traces
// of tau_s L + tau_u I in O(n) once the one-off dense eigensolve is paid.
class LaplacianSpectrum {
 public:
  explicit LaplacianSpectrum(const SparseSymMatrix& lap);

  const Vec& eigenvalues() const { return lambda_; }
  double logdet(BymHyper h) const;
  // tr((tau_s L + tau_u I)^{-1}) and tr((tau_s L + tau_u I)^{-1} L).
  double trace_inverse(BymHyper h) const;
  double trace_inverse_laplacian(BymHyper h) const;

 private:
  Vec lambda_;
};

ValidityReport check_valid_joint(const PrecisionMatrix& q_phi, const PrecisionMatrix& q_delta);

}  // namespace dfa
