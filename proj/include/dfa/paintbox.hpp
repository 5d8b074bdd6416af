#pragma once

#include "dfa/common.hpp"

#include <iosfwd>
#include <vector>

namespace dfa {

// Half-open interval [lo, hi).
struct Interval {
  double lo;
  double hi;
  double length() const { return hi - lo; }
  bool contains(double u) const { return lo <= u && u < hi; }
};

// Feature-frequency paintbox on [0, 1).
//
// Feature c's set is the union, over every atom of the partition generated by
// features 1..c-1, of the leading p_c fraction of that atom. Atoms stay
// intervals throughout, so feature c is a union of 2^(c-1) intervals and
// membership in distinct features is independent under u ~ Uniform[0, 1).
class Paintbox {
 public:
  static constexpr int kMaxFeatures = 24;

  explicit Paintbox(std::vector<double> frequencies);

  int n_features() const { return static_cast<int>(frequencies_.size()); }
  const std::vector<double>& frequencies() const { return frequencies_; }
  // Sorted, disjoint intervals of feature c (0-based).
  const std::vector<Interval>& feature_set(int c) const { return sets_.at(c); }

  bool contains(int c, double u) const;
  double measure(int c) const;

  void write_json(std::ostream& out) const;

 private:
  std::vector<double> frequencies_;
  std::vector<std::vector<Interval>> sets_;
};

Paintbox build_paintbox(const std::vector<double>& p);

// A_ic = 1 iff u_i lies in feature c's set.
IntMat allocate(const Paintbox& pb, const Vec& u);

// Piecewise-constant field on [0,1)^2: x picks the item strip, y the feature
// strip, both equal width.
class EmbeddedSurface {
 public:
  // item_order[s] is the item shown in strip s; empty means input order.
  explicit EmbeddedSurface(Mat values, std::vector<int> item_order = {});

  Index n_items() const { return values_.rows(); }
  Index n_features() const { return values_.cols(); }
  const Mat& values() const { return values_; }

  double query(double x, double y) const;

 private:
  Mat values_;
  std::vector<int> item_order_;
};

EmbeddedSurface embed_surface(const Mat& lambda, std::vector<int> item_order = {});

}  // namespace dfa
