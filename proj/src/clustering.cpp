#include "kdstr/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

namespace kdstr {
namespace {

struct RawMerge {
  int a;  // provisional node ids
  int b;
  double height;
};

}  // namespace

ClusterTree build_cluster_tree(const Dataset& d, std::size_t instance_cap) {
  if (d.empty()) throw Error(ErrorCode::EmptyDataset, "cannot cluster an empty dataset");
  if (d.size() > instance_cap)
    throw Error(ErrorCode::TooManyInstances, std::to_string(d.size()) + " instances exceed the clustering cap of " +
                                                 std::to_string(instance_cap));
  const int n = static_cast<int>(d.size());
  const int f = d.num_features();
  std::vector<double> z(d.raw_values());
  for (int j = 0; j < f; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += d.value(i, j);
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (d.value(i, j) - mean) * (d.value(i, j) - mean);
    const double sd = std::sqrt(var / n);
    for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i) * f + j] = sd > 0.0 ? (d.value(i, j) - mean) / sd : 0.0;
  }
  return build_cluster_tree(z, n, f);
}

ClusterTree build_cluster_tree(const std::vector<double>& points, int n, int f) {
  if (n <= 0) throw Error(ErrorCode::EmptyDataset, "cannot cluster zero points");
  ClusterTree tree;
  tree.leaf_count = n;
  if (n == 1) return tree;

  // Nearest-neighbour chain over cluster centroids; Ward's criterion is
  // reducible, so the chain finds exactly the greedy merges.
  std::vector<double> centroid(points);
  std::vector<double> size(n, 1.0);
  std::vector<int> node_of(n);  // slot -> provisional node id
  std::iota(node_of.begin(), node_of.end(), 0);
  std::vector<int> min_leaf(2 * n - 1);
  std::iota(min_leaf.begin(), min_leaf.begin() + n, 0);
  std::vector<int> active(n);
  std::iota(active.begin(), active.end(), 0);
  std::vector<int> position(n);
  std::iota(position.begin(), position.end(), 0);

  auto ward = [&](int a, int b) {
    double sq = 0.0;
    const double* ca = &centroid[static_cast<std::size_t>(a) * f];
    const double* cb = &centroid[static_cast<std::size_t>(b) * f];
    for (int j = 0; j < f; ++j) sq += (ca[j] - cb[j]) * (ca[j] - cb[j]);
    return size[a] * size[b] / (size[a] + size[b]) * sq;
  };
  // Tie order between candidate partners: smaller (minLeaf) pair first.
  auto pair_key = [&](int a, int b) {
    const int la = min_leaf[node_of[a]];
    const int lb = min_leaf[node_of[b]];
    return std::make_pair(std::min(la, lb), std::max(la, lb));
  };

  std::vector<RawMerge> raw;
  raw.reserve(n - 1);
  std::vector<int> chain;
  int next_node = n;
  while (active.size() > 1) {
    if (chain.empty()) chain.push_back(*std::min_element(active.begin(), active.end()));
    const int a = chain.back();
    const int prev = chain.size() > 1 ? chain[chain.size() - 2] : -1;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    if (prev >= 0) {
      best = prev;
      best_d = ward(a, prev);
    }
    for (int c : active) {
      if (c == a || c == prev) continue;
      const double dc = ward(a, c);
      if (dc < best_d || (dc == best_d && best != prev && pair_key(a, c) < pair_key(a, best))) {
        best = c;
        best_d = dc;
      }
    }
    if (best != prev) {
      chain.push_back(best);
      continue;
    }
    chain.pop_back();
    chain.pop_back();
    const int keep = std::min(a, best);
    const int drop = std::max(a, best);
    raw.push_back({node_of[a], node_of[best], std::sqrt(2.0 * best_d)});
    const int node = next_node++;
    min_leaf[node] = std::min(min_leaf[node_of[a]], min_leaf[node_of[best]]);
    double* ck = &centroid[static_cast<std::size_t>(keep) * f];
    const double* cd = &centroid[static_cast<std::size_t>(drop) * f];
    const double total = size[keep] + size[drop];
    for (int j = 0; j < f; ++j) ck[j] = (size[keep] * ck[j] + size[drop] * cd[j]) / total;
    size[keep] = total;
    node_of[keep] = node;
    const int pos = position[drop];
    active[pos] = active.back();
    position[active[pos]] = pos;
    active.pop_back();
  }

  // Emit merges in height order; equal heights go by smallest (minLeaf,
  // maxLeaf) pair, and a merge never precedes the merges of its children.
  const int m = static_cast<int>(raw.size());
  std::vector<int> waiting(m, 0);
  std::vector<int> parent_of(2 * n - 1, -1);
  for (int i = 0; i < m; ++i) {
    for (int c : {raw[i].a, raw[i].b}) {
      parent_of[c] = i;
      if (c >= n) ++waiting[i];
    }
  }
  using Entry = std::tuple<double, int, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> ready;
  auto push = [&](int i) {
    const int la = min_leaf[raw[i].a];
    const int lb = min_leaf[raw[i].b];
    ready.emplace(raw[i].height, std::min(la, lb), std::max(la, lb), i);
  };
  for (int i = 0; i < m; ++i)
    if (waiting[i] == 0) push(i);
  std::vector<int> final_id(2 * n - 1);
  std::iota(final_id.begin(), final_id.begin() + n, 0);
  double last_height = 0.0;
  while (!ready.empty()) {
    const int i = std::get<3>(ready.top());
    ready.pop();
    Merge out;
    out.child_a = final_id[raw[i].a];
    out.child_b = final_id[raw[i].b];
    if (out.child_a > out.child_b) std::swap(out.child_a, out.child_b);
    out.height = std::max(raw[i].height, last_height);
    last_height = out.height;
    out.node = n + static_cast<int>(tree.merges.size());
    const auto child_size = [&](int id) { return id < n ? 1 : tree.merges[id - n].size; };
    out.size = child_size(out.child_a) + child_size(out.child_b);
    final_id[n + i] = out.node;
    tree.merges.push_back(out);
    const int p = parent_of[n + i];
    if (p >= 0 && --waiting[p] == 0) push(p);
  }
  return tree;
}

std::vector<int> cut_tree(const ClusterTree& tree, int k) {
  const int n = tree.leaf_count;
  if (k < 1 || k > n) throw Error(ErrorCode::OutOfRange, "cluster count " + std::to_string(k) + " outside [1, " +
                                                             std::to_string(n) + "]");
  // Union-find over nodes; each root records the node id of its cluster.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<int> label(n);
  std::iota(label.begin(), label.end(), 0);
  std::vector<int> rep(2 * n - 1, -1);  // node id -> some leaf in it
  for (int i = 0; i < n; ++i) rep[i] = i;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int i = 0; i < n - k; ++i) {
    const auto& mg = tree.merges[i];
    const int ra = find(rep[mg.child_a]);
    const int rb = find(rep[mg.child_b]);
    parent[rb] = ra;
    label[ra] = mg.node;
    rep[mg.node] = ra;
  }
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) out[i] = label[find(i)];
  return out;
}

}  // namespace kdstr
