#pragma once

// Independent re-implementations used to check the library. Nothing here
// calls the code path it is checking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kdstr/bench.hpp"
#include "kdstr/geometry.hpp"
#include "kdstr/metrics.hpp"
#include "kdstr/modeling.hpp"
#include "kdstr/partitioning.hpp"
#include "kdstr/reduction.hpp"

namespace oracle {

using namespace kdstr;

inline std::string data_path(const std::string& name) { return std::string(KDSTR_DATA_DIR) + "/" + name; }

inline Dataset footfall() {
  CsvSchema schema;
  schema.ignore_columns = {"sensor"};
  return load_csv(data_path("footfall.csv"), schema);
}

// Dense grid dataset: value(t, s, f) for every timestep and sensor.
template <class F>
Dataset grid_dataset(std::vector<std::vector<double>> coords, std::vector<double> times, int features, F value) {
  std::vector<InstanceKey> keys;
  std::vector<double> values;
  for (int t = 0; t < static_cast<int>(times.size()); ++t)
    for (int s = 0; s < static_cast<int>(coords.size()); ++s) {
      keys.push_back({t, s});
      for (int f = 0; f < features; ++f) values.push_back(value(t, s, f));
    }
  std::vector<std::string> names;
  for (int f = 0; f < features; ++f) names.push_back("f" + std::to_string(f));
  return Dataset(std::move(coords), std::move(times), std::move(names), std::move(keys), std::move(values));
}

// Random layout with spatially and temporally correlated discrete levels and
// some missing cells, at most `max_instances` instances.
inline Dataset random_dataset(std::mt19937_64& rng, int max_instances = 2000) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int sensors = std::uniform_int_distribution<int>(2, 30)(rng);
  const int max_t = std::max(1, max_instances / sensors);
  const int timesteps = std::uniform_int_distribution<int>(1, std::min(max_t, 60))(rng);
  const int features = std::uniform_int_distribution<int>(1, 2)(rng);
  const bool one_d = unit(rng) < 0.15;
  std::vector<std::vector<double>> coords;
  std::set<std::vector<double>> used;
  while (static_cast<int>(coords.size()) < sensors) {
    std::vector<double> c{std::round(unit(rng) * 1000.0) / 100.0};
    if (!one_d) c.push_back(std::round(unit(rng) * 1000.0) / 100.0);
    if (used.insert(c).second) coords.push_back(c);
  }
  std::vector<double> times;
  double t = unit(rng) * 10.0;
  for (int i = 0; i < timesteps; ++i) {
    times.push_back(t);
    t += 0.5 + std::floor(unit(rng) * 3.0);
  }
  const int levels = std::uniform_int_distribution<int>(1, 5)(rng);
  const double missing = unit(rng) < 0.5 ? 0.0 : 0.2 * unit(rng);
  // Level field: a few random centres in space-time, nearest centre wins.
  const int centres = std::uniform_int_distribution<int>(1, 6)(rng);
  std::vector<std::vector<double>> ctr;
  for (int c = 0; c < centres; ++c) ctr.push_back({unit(rng) * 10.0, unit(rng) * 10.0, unit(rng) * timesteps});
  std::vector<int> ctr_level;
  for (int c = 0; c < centres; ++c) ctr_level.push_back(std::uniform_int_distribution<int>(0, levels - 1)(rng));
  std::vector<InstanceKey> keys;
  std::vector<double> values;
  for (int ti = 0; ti < timesteps; ++ti)
    for (int s = 0; s < sensors; ++s) {
      if (unit(rng) < missing) continue;
      int best = 0;
      double bd = 1e300;
      for (int c = 0; c < centres; ++c) {
        const double dx = coords[s][0] - ctr[c][0];
        const double dy = (one_d ? 0.0 : coords[s][1]) - ctr[c][1];
        const double dt = (ti - ctr[c][2]) * 0.7;
        const double dd = dx * dx + dy * dy + dt * dt;
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      keys.push_back({ti, s});
      for (int f = 0; f < features; ++f)
        values.push_back(10.0 * ctr_level[best] + f + 0.05 * unit(rng) * (unit(rng) < 0.5 ? 1 : 0));
    }
  if (keys.empty()) {
    keys.push_back({0, 0});
    for (int f = 0; f < features; ++f) values.push_back(1.0);
  }
  std::vector<std::string> names;
  for (int f = 0; f < features; ++f) names.push_back("f" + std::to_string(f));
  return Dataset(std::move(coords), std::move(times), std::move(names), std::move(keys), std::move(values));
}

// ---------------------------------------------------------------- metrics

inline double brute_nrmse(const Dataset& d, const Dataset& dp) {
  const int nf = d.num_features();
  double total = 0.0;
  int counted = 0;
  for (int f = 0; f < nf; ++f) {
    double lo = 1e300, hi = -1e300, sq = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      lo = std::min(lo, d.value(i, f));
      hi = std::max(hi, d.value(i, f));
      sq += std::pow(d.value(i, f) - dp.value(i, f), 2);
    }
    if (hi - lo <= 0.0) continue;
    total += std::sqrt(sq / static_cast<double>(d.size())) / (hi - lo);
    ++counted;
  }
  return counted ? total / counted : 0.0;
}

inline double brute_mape(const Dataset& d, const Dataset& dp) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (int f = 0; f < d.num_features(); ++f) total += std::abs(d.value(i, f) - dp.value(i, f)) / std::abs(d.value(i, f));
  return total / (static_cast<double>(d.size()) * d.num_features());
}

// ---------------------------------------------------------------- storage

// Counts stored scalars straight from the payload containers.
inline std::int64_t recount_storage(const Reduction& r) {
  std::int64_t units = 0;
  for (const auto& g : r.regions) {
    units += static_cast<std::int64_t>(g.outline.size()) * r.spatial_dims;  // coordinates per vertex
    units += 2;                                                            // begin and end time
  }
  for (const auto& m : r.models) {
    if (const auto* p = std::get_if<PlrPayload>(&m.payload)) {
      units += static_cast<std::int64_t>(p->coefficients.size());
    } else if (const auto* p = std::get_if<DctPayload>(&m.payload)) {
      for (const auto& s : p->features)
        units += 1 + static_cast<std::int64_t>(s.indices.size()) + static_cast<std::int64_t>(s.values.size());
    } else {
      for (const auto& n : std::get<DtrPayload>(m.payload).nodes)
        units += n.is_leaf() ? static_cast<std::int64_t>(n.value.size()) : 2;
    }
  }
  if (r.link_mode == LinkMode::PerCluster) units += static_cast<std::int64_t>(r.region_model.size());
  return units;
}

// ---------------------------------------------------------------- DCT

inline std::vector<double> brute_dct(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += x[j] * std::cos(std::numbers::pi * k * (j + 0.5) / n);
    out[k] = s * (k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n));
  }
  return out;
}

// ---------------------------------------------------------------- partitions

struct Violations {
  int cover = 0;
  int disjoint = 0;
  int homogeneity = 0;
  int block = 0;
  int connectivity = 0;
  int total() const { return cover + disjoint + homogeneity + block + connectivity; }
};

inline Violations check_level(const Dataset& d, const PartitionLevel& level, const std::vector<int>& labels,
                              const VoronoiDiagram& cells) {
  Violations v;
  std::vector<int> owner(d.size(), -1);
  std::map<std::pair<int, int>, int> cell_owner;
  for (const auto& r : level.regions) {
    if (r.t_begin > r.t_end || r.sensors.empty()) ++v.block;
    if (!std::is_sorted(r.sensors.begin(), r.sensors.end())) ++v.block;
    bool any = false;
    for (int t = r.t_begin; t <= r.t_end; ++t)
      for (int s : r.sensors) {
        if (!cell_owner.emplace(std::make_pair(t, s), r.id).second) ++v.disjoint;
        const auto i = d.find(t, s);
        if (i < 0) continue;
        any = true;
        if (owner[i] >= 0) ++v.disjoint;
        owner[i] = r.id;
        if (labels[i] != r.cluster) ++v.homogeneity;
        if (level.instance_region[i] != r.id) ++v.block;
      }
    if (!any) ++v.block;
    // connectivity through shared Voronoi edges
    std::set<int> members(r.sensors.begin(), r.sensors.end());
    std::set<int> seen{r.sensors.front()};
    std::queue<int> q;
    q.push(r.sensors.front());
    while (!q.empty()) {
      const int s = q.front();
      q.pop();
      for (int nb : cells.cells[s].neighbors)
        if (members.count(nb) && seen.insert(nb).second) q.push(nb);
    }
    if (seen.size() != members.size()) ++v.connectivity;
  }
  for (std::size_t i = 0; i < d.size(); ++i)
    if (owner[i] < 0) ++v.cover;
  return v;
}

// Nearest sensor by brute force.
inline int nearest_sensor(const std::vector<std::vector<double>>& coords, double x, double y) {
  int best = 0;
  double bd = 1e300;
  for (std::size_t s = 0; s < coords.size(); ++s) {
    const double dx = coords[s][0] - x;
    const double dy = (coords[s].size() > 1 ? coords[s][1] : 0.0) - y;
    const double dd = dx * dx + dy * dy;
    if (dd < bd) {
      bd = dd;
      best = static_cast<int>(s);
    }
  }
  return best;
}

// ---------------------------------------------------------------- greedy

// Reference greedy loop without caches: every candidate is fitted from
// scratch and scored by reconstructing the whole dataset.
struct GreedyTrace {
  std::vector<double> h;
  int clusters = 1;
};

inline Reduction assemble(const ReductionContext& ctx, const ReductionConfig& cfg, const PartitionLevel& level,
                          const std::vector<std::vector<int>>& units, const std::vector<ModelArtifact>& models) {
  Reduction r;
  r.spatial_dims = ctx.dataset().spatial_dims();
  r.feature_names = ctx.dataset().feature_names();
  r.time_axis = ctx.time_axis();
  r.technique = cfg.technique;
  r.link_mode = cfg.link_mode;
  r.error_metric = cfg.error_metric;
  r.alpha = cfg.alpha;
  r.regions = level.regions;
  r.models = models;
  r.region_model.assign(r.regions.size(), -1);
  for (std::size_t u = 0; u < units.size(); ++u)
    for (int rid : units[u]) r.region_model[rid] = static_cast<int>(u);
  return r;
}

inline double brute_objective(const Dataset& d, const Reduction& r) {
  const Dataset dp = reconstruct(d, r);
  const double e = r.error_metric == ErrorMetric::NRMSE ? brute_nrmse(d, dp) : brute_mape(d, dp);
  const double q = static_cast<double>(recount_storage(r)) / static_cast<double>(d.size() * (d.num_features() + d.k()));
  return r.alpha * q + (1.0 - r.alpha) * e;
}

inline std::vector<std::vector<int>> units_of(const PartitionLevel& level, LinkMode mode) {
  std::vector<std::vector<int>> units;
  if (mode == LinkMode::PerRegion) {
    for (const auto& r : level.regions) units.push_back({r.id});
    return units;
  }
  std::map<int, std::size_t> idx;
  for (const auto& r : level.regions) {
    auto [it, fresh] = idx.emplace(r.cluster, units.size());
    if (fresh) units.emplace_back();
    units[it->second].push_back(r.id);
  }
  return units;
}

inline ModelArtifact fit_unit(const Dataset& d, const PartitionLevel& level, const std::vector<int>& unit,
                              Technique technique, int complexity) {
  std::vector<FitInput> parts;
  for (int rid : unit) {
    const Region& r = level.regions[rid];
    std::vector<std::int64_t> idx;
    for (int t = r.t_begin; t <= r.t_end; ++t)
      for (int s : r.sensors)
        if (auto i = d.find(t, s); i >= 0) idx.push_back(i);
    auto [lo, hi] = region_bounds(d, r);
    parts.push_back(make_fit_input(d, idx, lo, hi));
  }
  return fit_cluster(technique, parts, complexity);
}

inline GreedyTrace brute_greedy(const ReductionContext& ctx, const ReductionConfig& cfg) {
  const Dataset& d = ctx.dataset();
  GreedyTrace trace;
  int k = 1;
  auto level = ctx.level(k);
  auto units = units_of(*level, cfg.link_mode);
  std::vector<ModelArtifact> models;
  for (const auto& u : units) models.push_back(fit_unit(d, *level, u, cfg.technique, 1));
  double h = brute_objective(d, assemble(ctx, cfg, *level, units, models));
  trace.h.push_back(h);
  auto better = [](double a, double b) { return a < b - 1e-12 * std::max(1.0, std::abs(b)); };
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    double h1 = INFINITY;
    int best = -1;
    ModelArtifact best_model;
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (models[u].saturated || models[u].complexity >= cfg.max_complexity) continue;
      auto trial = models;
      trial[u] = fit_unit(d, *level, units[u], cfg.technique, models[u].complexity + 1);
      const double hc = brute_objective(d, assemble(ctx, cfg, *level, units, trial));
      if (hc < h1) {
        h1 = hc;
        best = static_cast<int>(u);
        best_model = trial[u];
      }
    }
    double h2 = INFINITY;
    std::shared_ptr<const PartitionLevel> next;
    std::vector<std::vector<int>> next_units;
    std::vector<ModelArtifact> next_models;
    if (k + 1 <= static_cast<int>(d.size())) {
      next = ctx.level(k + 1);
      next_units = units_of(*next, cfg.link_mode);
      for (const auto& nu : next_units) {
        // keep a model whose unit covers the same blocks, with the same cluster for cluster models
        int keep = -1;
        for (std::size_t u = 0; u < units.size() && keep < 0; ++u) {
          if (units[u].size() != nu.size()) continue;
          bool same = true;
          for (std::size_t j = 0; j < nu.size() && same; ++j)
            same = level->regions[units[u][j]].same_block(next->regions[nu[j]]) &&
                   (cfg.link_mode == LinkMode::PerRegion ||
                    level->regions[units[u][j]].cluster == next->regions[nu[j]].cluster);
          if (same) keep = static_cast<int>(u);
        }
        next_models.push_back(keep >= 0 ? models[keep] : fit_unit(d, *next, nu, cfg.technique, 1));
      }
      h2 = brute_objective(d, assemble(ctx, cfg, *next, next_units, next_models));
    }
    if (best >= 0 && h1 <= h2 && better(h1, h)) {
      models[best] = best_model;
      h = h1;
    } else if (better(h2, h)) {
      level = next;
      units = next_units;
      models = next_models;
      ++k;
      h = h2;
    } else {
      break;
    }
    trace.h.push_back(h);
  }
  trace.clusters = k;
  return trace;
}

}  // namespace oracle
