#pragma once

#include <cstddef>
#include <vector>

#include "kdstr/core.hpp"

namespace kdstr {

// One agglomeration step. Leaves are nodes 0..n-1; merge i creates node n+i.
struct Merge {
  int child_a = 0;
  int child_b = 0;
  double height = 0.0;
  int node = 0;
  int size = 0;
};

struct ClusterTree {
  int leaf_count = 0;
  std::vector<Merge> merges;  // heights non-decreasing
};

inline constexpr std::size_t kDefaultInstanceCap = 200'000;

// Ward linkage over z-scored feature vectors (constant features contribute
// nothing). Space and time never enter the distance.
ClusterTree build_cluster_tree(const Dataset& d, std::size_t instance_cap = kDefaultInstanceCap);

// Same, over an explicit row-major n x f matrix (already normalized).
ClusterTree build_cluster_tree(const std::vector<double>& points, int n, int f);

// Labels each leaf with the node id of its cluster when the tree is cut into
// k clusters. A cluster that survives from one k to the next keeps its id.
std::vector<int> cut_tree(const ClusterTree& tree, int k);

}  // namespace kdstr
