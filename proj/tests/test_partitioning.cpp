#include <doctest.h>

#include "oracles.hpp"

using namespace kdstr;

namespace {

std::vector<int> labels_at(const ReductionContext& ctx, int k) { return cut_tree(ctx.tree(), k); }

std::string block(const Region& r) {
  std::string s = "[" + std::to_string(r.t_begin) + "," + std::to_string(r.t_end) + "]";
  for (int x : r.sensors) s += char('A' + x);
  return s;
}

}  // namespace

TEST_CASE("a hand-labelled line of three sensors") {
  // timestep rows, sensors 0..2 left to right:
  //   t0: 0 0 1
  //   t1: 0 0 1
  //   t2: 1 1 1
  const auto d = oracle::grid_dataset({{0}, {1}, {2}}, {0, 1, 2}, 1, [](int t, int s, int) {
    return (t == 2 || s == 2) ? 1.0 : 0.0;
  });
  std::vector<int> labels;
  for (std::size_t i = 0; i < d.size(); ++i) labels.push_back(static_cast<int>(d.value(i, 0)));
  const auto vd = voronoi_cells(d);
  const auto g = build_adjacency(d, vd);
  GrowthStats stats;
  const auto level = grow_regions(d, labels, g, vd, {}, &stats);
  std::vector<std::string> blocks;
  for (const auto& r : level.regions) blocks.push_back(block(r));
  CHECK(blocks == std::vector<std::string>{"[0,1]AB", "[0,2]C", "[2,2]AB"});
  CHECK(oracle::check_level(d, level, labels, vd).total() == 0);
  CHECK(stats.max_examinations() <= 2);
}

TEST_CASE("footfall levels") {
  ReductionContext ctx(oracle::footfall());
  const std::size_t expected[] = {1, 2, 7, 9};
  for (int k = 1; k <= 4; ++k) {
    const auto level = ctx.level(k);
    CHECK(level->k == k);
    CHECK(level->regions.size() == expected[k - 1]);
    CHECK(oracle::check_level(ctx.dataset(), *level, labels_at(ctx, k), ctx.cells()).total() == 0);
  }
  SUBCASE("moving from three to four clusters keeps six blocks") {
    const auto r = refine_level(*ctx.level(3), *ctx.level(4));
    CHECK(r.kept.size() == 6);
    CHECK(r.fresh.size() == 3);
    std::vector<std::string> fresh;
    for (int id : r.fresh) fresh.push_back(block(ctx.level(4)->regions[id]));
    std::sort(fresh.begin(), fresh.end());
    CHECK(fresh == std::vector<std::string>{"[0,0]D", "[0,2]C", "[1,2]D"});
    for (auto [a, b] : r.kept) CHECK(ctx.level(3)->regions[a].same_block(ctx.level(4)->regions[b]));
  }
  SUBCASE("non-consecutive levels are refused") {
    try {
      refine_level(*ctx.level(1), *ctx.level(3));
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::LevelMismatch);
    }
  }
  SUBCASE("outlines cover the member cells") {
    for (const auto& r : ctx.level(4)->regions) {
      REQUIRE(r.outline.size() >= 3);
      for (int s : r.sensors) {
        const auto& c = ctx.dataset().coords(s);
        CHECK(point_in_polygon({c[0], c[1]}, r.outline));
      }
    }
  }
}

TEST_CASE("levels are memoized per seeding") {
  ReductionContext ctx(oracle::footfall());
  CHECK(ctx.level(3) == ctx.level(3));
  GrowthOptions random;
  random.random_seeding = true;
  random.seed = 4;
  CHECK(ctx.level(3, random) != ctx.level(3));
  CHECK(oracle::check_level(ctx.dataset(), *ctx.level(3, random), labels_at(ctx, 3), ctx.cells()).total() == 0);
}

TEST_CASE("random datasets: every level is a valid partition") {
  std::mt19937_64 rng(77);
  for (int round = 0; round < 25; ++round) {
    const auto d = oracle::random_dataset(rng, 600);
    ReductionContext ctx(d);
    const int n = static_cast<int>(d.size());
    for (int k : {1, 2, 3, std::min(n, 7), n}) {
      const auto labels = labels_at(ctx, k);
      for (bool random : {false, true}) {
        GrowthOptions opt;
        opt.random_seeding = random;
        opt.seed = static_cast<std::uint64_t>(round);
        GrowthStats stats;
        const auto level = grow_regions(d, labels, ctx.graph(), ctx.cells(), opt, &stats);
        const auto v = oracle::check_level(d, level, labels, ctx.cells());
        CHECK(v.total() == 0);
        CHECK(stats.max_examinations() <= 2);
        if (k == 1) CHECK(level.regions.size() == 1);
      }
    }
  }
}

TEST_CASE("labels must cover the dataset") {
  ReductionContext ctx(oracle::footfall());
  std::vector<int> labels(5, 0);
  CHECK_THROWS_AS(grow_regions(ctx.dataset(), labels, ctx.graph(), ctx.cells()), Error);
}
