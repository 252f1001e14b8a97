#include <doctest.h>

#include "oracles.hpp"

using namespace kdstr;

namespace {

ErrorCode code_of(auto fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

Dataset line_table(std::vector<double> values, int features = 1) {
  const int n = static_cast<int>(values.size()) / features;
  std::vector<std::vector<double>> coords;
  for (int s = 0; s < n; ++s) coords.push_back({double(s)});
  return oracle::grid_dataset(coords, {0.0}, features,
                              [&](int, int s, int f) { return values[static_cast<std::size_t>(s) * features + f]; });
}

ModelArtifact constant_model(double v) {
  ModelArtifact m;
  m.technique = Technique::PLR;
  m.num_features = 1;
  m.num_predictors = 3;
  m.payload = PlrPayload{0, {{0, 0, 0}, {1, 1, 1}}, {v}};
  return m;
}

Region square(int id, double lo, double hi) {
  Region r;
  r.id = id;
  r.sensors = {id};
  r.outline = {{lo, lo}, {hi, lo}, {hi, hi}, {lo, hi}};
  return r;
}

}  // namespace

TEST_CASE("nrmse hand examples") {
  const auto d = line_table({0, 10, 5, 5});
  CHECK(nrmse(d, d) == 0.0);
  CHECK(nrmse(d, line_table({1, 9, 6, 4})) == doctest::Approx(0.1));
  // feature 0 exact, feature 1 has range 4 and RMSE 2
  const auto two = line_table({1, 0, 2, 4, 3, 0, 4, 4}, 2);
  const auto off = line_table({1, 2, 2, 2, 3, 2, 4, 2}, 2);
  const auto rep = nrmse_report(two, off);
  CHECK(rep.rmse[0] == 0.0);
  CHECK(rep.rmse[1] == doctest::Approx(2.0));
  CHECK(rep.range[1] == 4.0);
  CHECK(rep.value == doctest::Approx(0.25));
}

TEST_CASE("zero-range features are left out of the average") {
  const auto d = line_table({7, 0, 7, 10}, 2);
  const auto dp = line_table({7, 1, 7, 9}, 2);
  const auto rep = nrmse_report(d, dp);
  CHECK(rep.excluded_features == std::vector<int>{0});
  CHECK(rep.rmse[0] == 0.0);
  CHECK(rep.value == doctest::Approx(0.1));
  CHECK(nrmse(line_table({3, 3}), line_table({3, 3})) == 0.0);
}

TEST_CASE("mape hand examples") {
  CHECK(mape(line_table({100}), line_table({90})) == doctest::Approx(0.10));
  const auto d = line_table({1, 2, 4});
  CHECK(mape(d, d) == 0.0);
  CHECK(code_of([] { mape(line_table({0, 1}), line_table({0, 1})); }) == ErrorCode::ZeroValueInData);
  CHECK(error_metric(ErrorMetric::MAPE, line_table({100}), line_table({110})) == doctest::Approx(0.10));
}

TEST_CASE("metrics require matching keys") {
  CHECK(code_of([] { nrmse(line_table({1, 2}), line_table({1, 2, 3})); }) == ErrorCode::KeyMismatch);
  CHECK(code_of([] { mape(line_table({1, 2}), line_table({1, 2}, 2)); }) == ErrorCode::KeyMismatch);
}

TEST_CASE("metrics match brute-force sums on random tables") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.5, 100.0);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int round = 0; round < 50; ++round) {
    const auto d = oracle::random_dataset(rng, 400);
    std::vector<double> v(d.raw_values());
    for (auto& x : v) x = u(rng);
    const auto base = d.with_values(v);
    for (auto& x : v) x += g(rng);
    const auto noisy = base.with_values(v);
    CHECK(nrmse(base, noisy) == doctest::Approx(oracle::brute_nrmse(base, noisy)).epsilon(1e-12));
    CHECK(mape(base, noisy) == doctest::Approx(oracle::brute_mape(base, noisy)).epsilon(1e-12));
  }
}

TEST_CASE("nrmse is unchanged by a consistent affine rescaling") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> scale(0.01, 100.0), shift(-1e3, 1e3), u(0.0, 10.0);
  const auto d = oracle::random_dataset(rng, 300);
  std::vector<double> a(d.raw_values()), b(d.raw_values());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = u(rng);
    b[i] = a[i] + u(rng) - 5.0;
  }
  const double ref = nrmse(d.with_values(a), d.with_values(b));
  for (int round = 0; round < 100; ++round) {
    const int nf = d.num_features();
    std::vector<double> sc(nf), sh(nf);
    for (int f = 0; f < nf; ++f) {
      sc[f] = scale(rng) * (round % 2 ? -1.0 : 1.0);
      sh[f] = shift(rng);
    }
    auto a2 = a, b2 = b;
    for (std::size_t i = 0; i < a.size(); ++i) {
      a2[i] = sc[i % nf] * a[i] + sh[i % nf];
      b2[i] = sc[i % nf] * b[i] + sh[i % nf];
    }
    CHECK(nrmse(d.with_values(a2), d.with_values(b2)) == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("reconstruct with one constant region gives the mean") {
  const auto d = oracle::footfall();
  ReductionConfig cfg;
  cfg.alpha = 1.0;
  const auto r = reduce(d, cfg).reduction;
  const auto dp = reconstruct(d, r);
  double mean = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) mean += d.value(i, 0);
  mean /= static_cast<double>(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(dp.value(i, 0) == doctest::Approx(mean));
  CHECK(dp.keys() == d.keys());

  auto broken = r;
  broken.regions[0].sensors.pop_back();
  CHECK(code_of([&] { reconstruct(d, broken); }) == ErrorCode::UnassignedInstance);
  broken = r;
  broken.region_model[0] = 3;
  CHECK(code_of([&] { reconstruct(d, broken); }) == ErrorCode::CorruptPayload);
}

TEST_CASE("impute agrees with reconstruct at sampled instances") {
  ReductionContext ctx(oracle::footfall());
  const Dataset& d = ctx.dataset();
  for (auto t : {Technique::PLR, Technique::DTR})
    for (auto link : {LinkMode::PerRegion, LinkMode::PerCluster}) {
      ReductionConfig cfg;
      cfg.alpha = 0.1;
      cfg.technique = t;
      cfg.link_mode = link;
      const auto r = reduce(ctx, cfg).reduction;
      const auto dp = reconstruct(d, r);
      for (std::size_t i = 0; i < d.size(); ++i) {
        const auto key = d.key(i);
        CHECK(impute(r, d.times()[key.timestep], d.coords(key.sensor))[0] == doctest::Approx(dp.value(i, 0)));
      }
    }
}

TEST_CASE("impute evaluates a linear model off the samples") {
  std::vector<std::vector<double>> coords;
  for (int s = 0; s < 5; ++s) coords.push_back({double(s)});
  const auto d = oracle::grid_dataset(coords, {0, 1, 2, 3, 4}, 1, [&](int t, int s, int) { return 2.0 * t + 3.0 * s; });
  ReductionConfig cfg;
  cfg.alpha = 0.01;
  const auto r = reduce(d, cfg).reduction;
  REQUIRE(r.final_error <= 1e-9);
  CHECK(impute(r, 1.3, std::vector<double>{2.2})[0] == doctest::Approx(2.0 * 1.3 + 3.0 * 2.2).epsilon(1e-6));
  CHECK(impute(r, 4.5, std::vector<double>{0.0})[0] == doctest::Approx(9.0).epsilon(1e-6));
  CHECK(code_of([&] { impute(r, 4.6, std::vector<double>{0.0}); }) == ErrorCode::OutsideAllRegions);
  CHECK(code_of([&] { impute(r, 1.0, std::vector<double>{0.0, 1.0}); }) == ErrorCode::InvalidParams);
  auto dct = r;
  dct.technique = Technique::DCT;
  CHECK(code_of([&] { impute(dct, 1.0, std::vector<double>{1.0}); }) == ErrorCode::TechniqueCannotImpute);
}

TEST_CASE("impute on shared boundaries and inside holes") {
  Reduction r;
  r.spatial_dims = 2;
  r.feature_names = {"v"};
  r.time_axis = {{0.0}, {-0.5, 0.5}};
  r.regions = {square(0, 0, 3), square(1, 1, 2), square(2, 3, 4)};
  r.models = {constant_model(1), constant_model(2), constant_model(3)};
  r.region_model = {0, 1, 2};
  auto at = [&](double x, double y) { return impute(r, 0.0, std::vector<double>{x, y})[0]; };
  CHECK(at(0.5, 0.5) == 1);
  CHECK(at(1.5, 1.5) == 2);   // inside the hole of region 0
  CHECK(at(1.0, 1.5) == 1);   // edge of the inner square: lowest id
  CHECK(at(3.0, 3.0) == 1);   // corner shared with region 2: lowest id
  CHECK(at(3.5, 3.5) == 3);
  CHECK(impute(r, 0.5, std::vector<double>{3.5, 3.5})[0] == 3);  // closed time bound
  CHECK(code_of([&] { impute(r, 0.6, std::vector<double>{0.5, 0.5}); }) == ErrorCode::OutsideAllRegions);
  CHECK(code_of([&] { at(5.0, 5.0); }) == ErrorCode::OutsideAllRegions);
}

TEST_CASE("footfall run to zero error reconstructs the table") {
  const auto d = oracle::footfall();
  ReductionConfig cfg;
  cfg.alpha = 0.01;
  const auto r = reduce(d, cfg).reduction;
  REQUIRE(r.final_error <= 1e-9);
  const auto dp = reconstruct(d, r);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(dp.value(i, 0) == doctest::Approx(d.value(i, 0)).epsilon(1e-9));
}
