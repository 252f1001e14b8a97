#include "kdstr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kdstr/geometry.hpp"
#include "kdstr/modeling.hpp"

namespace kdstr {
namespace {

void require_same_keys(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size() || a.num_features() != b.num_features() || a.keys() != b.keys())
    throw Error(ErrorCode::KeyMismatch, "datasets do not share the same instance keys");
}

bool on_boundary(Point2 p, std::span<const Point2> ring, double tol) {
  const std::size_t n = ring.size();
  if (n == 2) return std::abs(p.x - ring[0].x) <= tol || std::abs(p.x - ring[1].x) <= tol;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = ring[i];
    const Point2 b = ring[(i + 1) % n];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double u = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    if (std::hypot(p.x - (a.x + u * dx), p.y - (a.y + u * dy)) <= tol) return true;
  }
  return false;
}

}  // namespace

Dataset reconstruct(const Dataset& d, const Reduction& r) {
  const int nf = d.num_features();
  if (static_cast<int>(r.feature_names.size()) != nf)
    throw Error(ErrorCode::KeyMismatch, "reduction and dataset have different feature counts");
  if (r.region_model.size() != r.regions.size())
    throw Error(ErrorCode::CorruptPayload, "region/model links do not match the region table");
  std::vector<double> values(d.size() * nf, 0.0);
  std::vector<char> covered(d.size(), 0);
  std::vector<std::size_t> position(r.models.size(), 0);  // running DCT sequence position per model

  std::vector<std::size_t> order(r.regions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.regions[a].id < r.regions[b].id; });

  std::vector<double> x(d.k());
  for (std::size_t ri : order) {
    const Region& region = r.regions[ri];
    const int mi = r.region_model[ri];
    if (mi < 0 || static_cast<std::size_t>(mi) >= r.models.size())
      throw Error(ErrorCode::CorruptPayload, "region " + std::to_string(region.id) + " links to a missing model");
    const ModelArtifact& model = r.models[mi];
    if (region.t_begin < 0 || region.t_end >= d.num_timesteps() || region.t_begin > region.t_end)
      throw Error(ErrorCode::KeyMismatch, "region time bounds fall outside the dataset");
    for (int t = region.t_begin; t <= region.t_end; ++t) {
      for (int s : region.sensors) {
        if (s < 0 || s >= d.num_sensors()) throw Error(ErrorCode::KeyMismatch, "region references an unknown sensor");
        const auto idx = d.find(t, s);
        if (idx < 0) continue;
        if (covered[idx]) throw Error(ErrorCode::CorruptPayload, "instance covered by two regions");
        covered[idx] = 1;
        x[0] = d.times()[t];
        for (int j = 1; j < d.k(); ++j) x[j] = d.coords(s)[j - 1];
        const auto v = model.technique == Technique::DCT ? predict(model, x, position[mi]++) : predict(model, x);
        std::copy(v.begin(), v.end(), values.begin() + idx * nf);
      }
    }
  }
  for (std::size_t i = 0; i < covered.size(); ++i)
    if (!covered[i])
      throw Error(ErrorCode::UnassignedInstance, "instance at timestep " + std::to_string(d.key(i).timestep) +
                                                     ", sensor " + std::to_string(d.key(i).sensor) +
                                                     " lies in no region");
  return d.with_values(std::move(values));
}

std::vector<double> impute(const Reduction& r, double time, std::span<const double> location) {
  if (r.technique == Technique::DCT)
    throw Error(ErrorCode::TechniqueCannotImpute, "DCT models are sequence-indexed and cannot impute off-sample points");
  if (static_cast<int>(location.size()) != r.spatial_dims)
    throw Error(ErrorCode::InvalidParams, "location needs " + std::to_string(r.spatial_dims) + " coordinates");
  const auto& b = r.time_axis.boundaries;
  const Point2 p{location[0], r.spatial_dims > 1 ? location[1] : 0.0};
  const double tol = 1e-9 * std::max(1.0, std::abs(p.x) + std::abs(p.y));
  struct Match {
    int index;
    int id;
    bool strict;
    double area;
  };
  std::vector<Match> matches;
  for (std::size_t i = 0; i < r.regions.size(); ++i) {
    const Region& region = r.regions[i];
    if (static_cast<std::size_t>(region.t_end + 1) >= b.size()) continue;
    if (time < b[region.t_begin] || time > b[region.t_end + 1]) continue;
    if (!point_in_polygon(p, region.outline, tol)) continue;
    const double area = region.outline.size() == 2 ? std::abs(region.outline[1].x - region.outline[0].x)
                                                   : std::abs(polygon_area(region.outline));
    matches.push_back({static_cast<int>(i), region.id, !on_boundary(p, region.outline, tol), area});
  }
  int best = -1;
  const auto strict = std::count_if(matches.begin(), matches.end(), [](const Match& m) { return m.strict; });
  if (strict >= 2) {
    // Strictly inside two outer rings: one region sits in a hole of the other.
    const Match* pick = nullptr;
    for (const auto& m : matches)
      if (m.strict && (!pick || m.area < pick->area || (m.area == pick->area && m.id < pick->id))) pick = &m;
    best = pick->index;
  } else if (!matches.empty()) {
    best = std::min_element(matches.begin(), matches.end(), [](const Match& a, const Match& c) { return a.id < c.id; })
               ->index;
  }
  if (best < 0) throw Error(ErrorCode::OutsideAllRegions, "query point lies outside every region");
  std::vector<double> x{time};
  x.insert(x.end(), location.begin(), location.end());
  return predict(r.models[r.region_model[best]], x);
}

NrmseReport nrmse_report(const Dataset& d, const Dataset& dp) {
  require_same_keys(d, dp);
  const int nf = d.num_features();
  NrmseReport rep;
  rep.rmse.assign(nf, 0.0);
  rep.range.assign(nf, 0.0);
  if (d.empty()) return rep;
  std::vector<double> lo(nf, std::numeric_limits<double>::infinity());
  std::vector<double> hi(nf, -std::numeric_limits<double>::infinity());
  std::vector<double> sse(nf, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (int f = 0; f < nf; ++f) {
      const double v = d.value(i, f);
      lo[f] = std::min(lo[f], v);
      hi[f] = std::max(hi[f], v);
      const double e = v - dp.value(i, f);
      sse[f] += e * e;
    }
  double sum = 0.0;
  int counted = 0;
  for (int f = 0; f < nf; ++f) {
    rep.rmse[f] = std::sqrt(sse[f] / static_cast<double>(d.size()));
    rep.range[f] = hi[f] - lo[f];
    if (rep.range[f] > 0.0) {
      sum += rep.rmse[f] / rep.range[f];
      ++counted;
    } else {
      rep.excluded_features.push_back(f);
    }
  }
  rep.value = counted ? sum / counted : 0.0;
  return rep;
}

double nrmse(const Dataset& d, const Dataset& dp) { return nrmse_report(d, dp).value; }

double mape(const Dataset& d, const Dataset& dp) {
  require_same_keys(d, dp);
  if (d.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (int f = 0; f < d.num_features(); ++f) {
      const double v = d.value(i, f);
      if (v == 0.0) throw Error(ErrorCode::ZeroValueInData, "MAPE is undefined for zero-valued features");
      sum += std::abs((v - dp.value(i, f)) / v);
    }
  return sum / (static_cast<double>(d.size()) * d.num_features());
}

double error_metric(ErrorMetric metric, const Dataset& d, const Dataset& dp) {
  return metric == ErrorMetric::NRMSE ? nrmse(d, dp) : mape(d, dp);
}

}  // namespace kdstr
