#include "dfa/paintbox.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>
#include <ostream>

namespace dfa {

Paintbox::Paintbox(std::vector<double> frequencies) : frequencies_(std::move(frequencies)) {
  if (frequencies_.empty()) throw DataError("paintbox", "at least one frequency is required");
  if (frequencies_.size() > static_cast<std::size_t>(kMaxFeatures))
    throw DataError("paintbox", "at most " + std::to_string(kMaxFeatures) + " features");
  for (double p : frequencies_)
    if (!(p > 0.0 && p < 1.0))
      throw DataError("paintbox", "frequencies must lie in (0, 1), got " + std::to_string(p));

  // Atoms in positional order. Splitting an atom keeps its leading part first,
  // so the ordering never needs re-sorting.
  std::vector<Interval> atoms{{0.0, 1.0}};
  for (double p : frequencies_) {
    std::vector<Interval> set;
    std::vector<Interval> next;
    set.reserve(atoms.size());
    next.reserve(2 * atoms.size());
    for (const Interval& a : atoms) {
      const double cut = a.lo + p * a.length();
      set.push_back({a.lo, cut});
      next.push_back({a.lo, cut});
      next.push_back({cut, a.hi});
    }
    sets_.push_back(std::move(set));
    atoms = std::move(next);
  }
}

bool Paintbox::contains(int c, double u) const {
  const auto& set = sets_.at(c);
  auto it = std::upper_bound(set.begin(), set.end(), u,
                             [](double v, const Interval& iv) { return v < iv.lo; });
  if (it == set.begin()) return false;
  return std::prev(it)->contains(u);
}

double Paintbox::measure(int c) const {
  const auto& set = sets_.at(c);
  return std::accumulate(set.begin(), set.end(), 0.0,
                         [](double s, const Interval& iv) { return s + iv.length(); });
}

void Paintbox::write_json(std::ostream& out) const {
  nlohmann::json j;
  j["frequencies"] = frequencies_;
  auto& features = j["features"] = nlohmann::json::array();
  for (int c = 0; c < n_features(); ++c) {
    nlohmann::json ivs = nlohmann::json::array();
    for (const Interval& iv : sets_[c]) ivs.push_back({iv.lo, iv.hi});
    features.push_back({{"feature", c}, {"measure", measure(c)}, {"intervals", ivs}});
  }
  out << j.dump(2) << '\n';
}

Paintbox build_paintbox(const std::vector<double>& p) { return Paintbox(p); }

IntMat allocate(const Paintbox& pb, const Vec& u) {
  IntMat a(u.size(), pb.n_features());
  for (Index i = 0; i < u.size(); ++i) {
    if (!(u[i] >= 0.0 && u[i] < 1.0))
      throw DataError("paintbox", "allocation draws must lie in [0, 1)");
    for (int c = 0; c < pb.n_features(); ++c) a(i, c) = pb.contains(c, u[i]) ? 1 : 0;
  }
  return a;
}

EmbeddedSurface::EmbeddedSurface(Mat values, std::vector<int> item_order)
    : values_(std::move(values)), item_order_(std::move(item_order)) {
  if (values_.rows() == 0 || values_.cols() == 0)
    throw DataError("paintbox", "surface needs at least one item and one feature");
  if (!values_.allFinite()) throw DataError("paintbox", "surface values must be finite");
  if (item_order_.empty()) {
    item_order_.resize(values_.rows());
    std::iota(item_order_.begin(), item_order_.end(), 0);
  }
  std::vector<int> check = item_order_;
  std::sort(check.begin(), check.end());
  for (std::size_t s = 0; s < check.size(); ++s)
    if (check[s] != static_cast<int>(s) || check.size() != static_cast<std::size_t>(values_.rows()))
      throw DataError("paintbox", "item order must be a permutation of the items");
}

double EmbeddedSurface::query(double x, double y) const {
  if (!(x >= 0.0 && x < 1.0 && y >= 0.0 && y < 1.0))
    throw DataError("paintbox", "surface query outside [0,1)^2");
  const Index strip = std::min<Index>(static_cast<Index>(x * n_items()), n_items() - 1);
  const Index c = std::min<Index>(static_cast<Index>(y * n_features()), n_features() - 1);
  return values_(item_order_[strip], c);
}

EmbeddedSurface embed_surface(const Mat& lambda, std::vector<int> item_order) {
  return EmbeddedSurface(lambda, std::move(item_order));
}

}  // namespace dfa
