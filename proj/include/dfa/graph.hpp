#pragma once

#include "dfa/common.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace dfa {

// Sparse symmetric matrix. Both triangles are stored; explicit zeros are pruned.
using SparseSymMatrix = SpMat;

// Distance between two items given as rows of a covariate matrix.
struct Metric {
  std::string id;
  std::function<double(const Eigen::Ref<const Vec>&, const Eigen::Ref<const Vec>&)> distance;

  static Metric euclidean();
};

// k-NN item graph with 0/1 adjacency, symmetrized by union.
struct ItemGraph {
  Index n_items = 0;
  int k = 0;
  SpMat adjacency;
  std::vector<int> degrees;
  std::string metric_id;

  std::vector<std::pair<int, int>> edges() const;  // i < j, lexicographic
};

struct Neighbor {
  int index;
  double distance;
};

// The k nearest rows of `points` to `query`, ordered by (distance, index).
// `exclude` (if >= 0) is skipped, which is how self-distances are excluded.
std::vector<Neighbor> nearest_neighbors(const Mat& points, const Eigen::Ref<const Vec>& query,
                                        int k, const Metric& metric, int exclude = -1);

// Rows of `points` are items. Ties in distance go to the lower index.
ItemGraph build_knn_graph(const Mat& points, int k, const Metric& metric = Metric::euclidean());

// L = D - W.
SparseSymMatrix laplacian(const ItemGraph& g);

void write_edge_list_csv(const ItemGraph& g, std::ostream& out);
void write_triplets_csv(const SparseSymMatrix& m, std::ostream& out);

}  // namespace dfa
