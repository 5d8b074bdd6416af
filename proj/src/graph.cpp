#include "dfa/graph.hpp"

#include <algorithm>
#include <ostream>

namespace dfa {

Metric Metric::euclidean() {
  return {"euclidean", [](const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b) {
            return (a - b).norm();
          }};
}

std::vector<std::pair<int, int>> ItemGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (Index j = 0; j < adjacency.outerSize(); ++j)
    for (SpMat::InnerIterator it(adjacency, j); it; ++it)
      if (it.row() < j) out.emplace_back(static_cast<int>(it.row()), static_cast<int>(j));
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// Items are the columns of `cols` so each one is contiguous.
std::vector<Neighbor> neighbors_of(const Mat& cols, const Eigen::Ref<const Vec>& query, int k,
                                   const Metric& metric, int exclude) {
  std::vector<Neighbor> all;
  all.reserve(cols.cols());
  for (Index j = 0; j < cols.cols(); ++j) {
    if (j == exclude) continue;
    all.push_back({static_cast<int>(j), metric.distance(cols.col(j), query)});
  }
  if (k < 0 || static_cast<std::size_t>(k) > all.size())
    throw DataError("graph", "k=" + std::to_string(k) + " exceeds the " +
                                 std::to_string(all.size()) + " available neighbors");
  auto by_distance = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  };
  if (k < static_cast<int>(all.size()))
    std::nth_element(all.begin(), all.begin() + k, all.end(), by_distance);
  all.resize(k);
  std::sort(all.begin(), all.end(), by_distance);
  return all;
}

}  // namespace

std::vector<Neighbor> nearest_neighbors(const Mat& points, const Eigen::Ref<const Vec>& query,
                                        int k, const Metric& metric, int exclude) {
  if (points.cols() == 0) throw DataError("graph", "points must have at least one dimension");
  if (query.size() != points.cols())
    throw DataError("graph", "query dimension " + std::to_string(query.size()) +
                                 " does not match points dimension " +
                                 std::to_string(points.cols()));
  return neighbors_of(points.transpose(), query, k, metric, exclude);
}

ItemGraph build_knn_graph(const Mat& points, int k, const Metric& metric) {
  const Index n = points.rows();
  if (k < 1) throw DataError("graph", "k must be at least 1");
  if (points.cols() == 0) throw DataError("graph", "points must have at least one dimension");
  if (n < k + 1)
    throw DataError("graph", "need at least k+1=" + std::to_string(k + 1) + " items, got " +
                                 std::to_string(n));

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * n * k);
  const Mat cols = points.transpose();
  for (Index i = 0; i < n; ++i) {
    for (const auto& nb : neighbors_of(cols, cols.col(i), k, metric, static_cast<int>(i))) {
      trip.emplace_back(i, nb.index, 1.0);
      trip.emplace_back(nb.index, i, 1.0);
    }
  }
  ItemGraph g;
  g.n_items = n;
  g.k = k;
  g.metric_id = metric.id;
  g.adjacency.resize(n, n);
  // Duplicates (mutual neighbors) collapse to 1: union symmetrization.
  g.adjacency.setFromTriplets(trip.begin(), trip.end(), [](double, double) { return 1.0; });
  g.adjacency.makeCompressed();
  g.degrees.resize(n);
  for (Index j = 0; j < n; ++j)
    g.degrees[j] = static_cast<int>(g.adjacency.outerIndexPtr()[j + 1] -
                                    g.adjacency.outerIndexPtr()[j]);
  return g;
}

SparseSymMatrix laplacian(const ItemGraph& g) {
  const Index n = g.n_items;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.adjacency.nonZeros() + n);
  for (Index j = 0; j < n; ++j) {
    if (g.degrees[j] > 0) trip.emplace_back(j, j, static_cast<double>(g.degrees[j]));
    for (SpMat::InnerIterator it(g.adjacency, j); it; ++it)
      trip.emplace_back(it.row(), j, -it.value());
  }
  SparseSymMatrix lap(n, n);
  lap.setFromTriplets(trip.begin(), trip.end());
  lap.makeCompressed();
  return lap;
}

void write_edge_list_csv(const ItemGraph& g, std::ostream& out) {
  out << "i,j\n";
  for (auto [i, j] : g.edges()) out << i << ',' << j << '\n';
}

void write_triplets_csv(const SparseSymMatrix& m, std::ostream& out) {
  out << "row,col,value\n";
  out.precision(17);
  for (Index j = 0; j < m.outerSize(); ++j)
    for (SpMat::InnerIterator it(m, j); it; ++it)
      if (it.row() <= j) out << it.row() << ',' << j << ',' << it.value() << '\n';
}

}  // namespace dfa
