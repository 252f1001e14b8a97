#include <doctest.h>

#include "kdstr/clustering.hpp"
#include "oracles.hpp"

using namespace kdstr;

namespace {

// Plain greedy Ward: repeatedly merge the pair with the smallest increase
// in within-cluster sum of squares. Returns the partition with k clusters
// as a canonical label vector (first-appearance numbering).
std::vector<int> naive_ward(const std::vector<double>& pts, int n, int f, int k) {
  std::vector<std::vector<int>> members(n);
  std::vector<std::vector<double>> centroid(n);
  for (int i = 0; i < n; ++i) {
    members[i] = {i};
    centroid[i].assign(pts.begin() + i * f, pts.begin() + (i + 1) * f);
  }
  while (static_cast<int>(members.size()) > k) {
    double best = 1e300;
    std::size_t ba = 0, bb = 1;
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        double dist = 0.0;
        for (int j = 0; j < f; ++j) dist += std::pow(centroid[a][j] - centroid[b][j], 2);
        const double na = members[a].size(), nb = members[b].size();
        const double inc = na * nb / (na + nb) * dist;
        if (inc < best) {
          best = inc;
          ba = a;
          bb = b;
        }
      }
    const double na = members[ba].size(), nb = members[bb].size();
    for (int j = 0; j < f; ++j) centroid[ba][j] = (na * centroid[ba][j] + nb * centroid[bb][j]) / (na + nb);
    members[ba].insert(members[ba].end(), members[bb].begin(), members[bb].end());
    members.erase(members.begin() + bb);
    centroid.erase(centroid.begin() + bb);
  }
  std::vector<int> label(n);
  for (std::size_t c = 0; c < members.size(); ++c)
    for (int i : members[c]) label[i] = static_cast<int>(c);
  return label;
}

std::vector<int> canonical(const std::vector<int>& labels) {
  std::map<int, int> renum;
  std::vector<int> out;
  for (int l : labels) out.push_back(renum.emplace(l, static_cast<int>(renum.size())).first->second);
  return out;
}

}  // namespace

TEST_CASE("cuts match a naive Ward agglomeration") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int round = 0; round < 20; ++round) {
    const int n = std::uniform_int_distribution<int>(2, 40)(rng);
    const int f = std::uniform_int_distribution<int>(1, 3)(rng);
    std::vector<double> pts(static_cast<std::size_t>(n) * f);
    for (auto& v : pts) v = g(rng) + (g(rng) > 0.5 ? 4.0 : 0.0);
    const auto tree = build_cluster_tree(pts, n, f);
    REQUIRE(tree.merges.size() == static_cast<std::size_t>(n - 1));
    for (int k = 1; k <= n; ++k) CHECK(canonical(cut_tree(tree, k)) == canonical(naive_ward(pts, n, f, k)));
  }
}

TEST_CASE("merge heights are non-decreasing and sizes add up") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pts(200);
  for (auto& v : pts) v = u(rng);
  const auto tree = build_cluster_tree(pts, 100, 2);
  for (std::size_t i = 1; i < tree.merges.size(); ++i) CHECK(tree.merges[i].height >= tree.merges[i - 1].height);
  CHECK(tree.merges.back().size == 100);
  CHECK(tree.merges.back().node == 198);
}

TEST_CASE("two points merge at their distance") {
  const auto tree = build_cluster_tree({0.0, 0.0, 3.0, 4.0}, 2, 2);
  REQUIRE(tree.merges.size() == 1);
  CHECK(tree.merges[0].height == doctest::Approx(5.0));
}

TEST_CASE("cuts refine: each cluster at k+1 lies inside one cluster at k") {
  const auto d = oracle::footfall();
  const auto tree = build_cluster_tree(d);
  for (int k = 1; k < static_cast<int>(d.size()); ++k) {
    const auto a = cut_tree(tree, k), b = cut_tree(tree, k + 1);
    std::map<int, std::set<int>> parents;
    for (std::size_t i = 0; i < a.size(); ++i) parents[b[i]].insert(a[i]);
    for (const auto& [child, ps] : parents) CHECK(ps.size() == 1);
    CHECK(std::set<int>(b.begin(), b.end()).size() == static_cast<std::size_t>(k + 1));
    // all but one cluster keep their label
    std::set<int> la(a.begin(), a.end()), lb(b.begin(), b.end());
    std::vector<int> common;
    std::set_intersection(la.begin(), la.end(), lb.begin(), lb.end(), std::back_inserter(common));
    CHECK(common.size() == static_cast<std::size_t>(k - 1));
  }
}

TEST_CASE("footfall splits: the low-traffic pair separates first") {
  const auto d = oracle::footfall();
  const auto labels = cut_tree(build_cluster_tree(d), 2);
  // sensors I and K (ids 8 and 10) have the lowest counts
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int s = d.key(i).sensor;
    const bool low = s == 8 || s == 10;
    CHECK((labels[i] == labels[d.find(0, 8)]) == low);
  }
}

TEST_CASE("clustering ignores affine feature scaling") {
  std::mt19937_64 rng(8);
  auto d = oracle::random_dataset(rng, 300);
  const auto base = build_cluster_tree(d);
  std::vector<double> scaled(d.raw_values());
  for (auto& v : scaled) v = 1000.0 * v - 7.0;
  const auto tree = build_cluster_tree(d.with_values(scaled));
  for (int k : {1, 2, 3, 5}) {
    if (k > static_cast<int>(d.size())) continue;
    CHECK(canonical(cut_tree(base, k)) == canonical(cut_tree(tree, k)));
  }
}

TEST_CASE("clustering is deterministic") {
  std::mt19937_64 rng(9);
  const auto d = oracle::random_dataset(rng, 500);
  const auto a = build_cluster_tree(d), b = build_cluster_tree(d);
  REQUIRE(a.merges.size() == b.merges.size());
  for (std::size_t i = 0; i < a.merges.size(); ++i) {
    CHECK(a.merges[i].child_a == b.merges[i].child_a);
    CHECK(a.merges[i].child_b == b.merges[i].child_b);
    CHECK(a.merges[i].height == b.merges[i].height);
  }
}

TEST_CASE("clustering errors") {
  auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  const auto d = oracle::footfall();
  CHECK(code([&] { build_cluster_tree(Dataset()); }) == ErrorCode::EmptyDataset);
  CHECK(code([&] { build_cluster_tree(d, 10); }) == ErrorCode::TooManyInstances);
  const auto tree = build_cluster_tree(d);
  CHECK(code([&] { cut_tree(tree, 0); }) == ErrorCode::OutOfRange);
  CHECK(code([&] { cut_tree(tree, 34); }) == ErrorCode::OutOfRange);
  CHECK(cut_tree(tree, 33).size() == 33);
}
