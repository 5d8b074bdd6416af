#pragma once

#include "dfa/common.hpp"

#include <vector>

namespace dfa {

// Support of a parameter block and its bijection to the real line:
//   Real      identity
//   Positive  x = exp(u)
//   Symmetric x = tanh(u)      on (-1, 1)
//   Unit      x = logistic(u)  on (0, 1)
enum class Constraint { Real, Positive, Symmetric, Unit };

struct TransformSegment {
  Constraint kind;
  Index offset;
  Index length;
};

class TransformSpec {
 public:
  TransformSpec& add(Constraint kind, Index length);

  Index dim() const { return dim_; }
  const std::vector<TransformSegment>& segments() const { return segments_; }

  Vec constrain(const Vec& u) const;
  Vec unconstrain(const Vec& x) const;
  // log |d constrain / du|.
  double log_jacobian(const Vec& u) const;
  // d/du [ f(constrain(u)) + log_jacobian(u) ] given grad_x = df/dx at x = constrain(u).
  Vec chain_gradient(const Vec& u, const Vec& x, const Vec& grad_x) const;

 private:
  std::vector<TransformSegment> segments_;
  Index dim_ = 0;
};

}  // namespace dfa
