#include "kdstr/partitioning.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <tuple>

namespace kdstr {

int GrowthStats::max_examinations() const {
  int m = 0;
  for (const auto& [edge, count] : edge_examinations) m = std::max(m, count);
  return m;
}

PartitionLevel grow_regions(const Dataset& d, std::span<const int> labels, const AdjacencyGraph& graph,
                            const VoronoiDiagram& cells, const GrowthOptions& options, GrowthStats* stats) {
  if (labels.size() != d.size()) throw Error(ErrorCode::InvalidDataset, "labels do not cover every instance");
  const int num_t = d.num_timesteps();
  const int num_s = d.num_sensors();
  const auto n = static_cast<std::int64_t>(d.size());

  PartitionLevel level;
  {
    std::vector<int> distinct(labels.begin(), labels.end());
    std::sort(distinct.begin(), distinct.end());
    level.k = static_cast<int>(std::unique(distinct.begin(), distinct.end()) - distinct.begin());
  }
  level.instance_region.assign(n, -1);

  // Region id owning each grid cell, present or not.
  std::vector<int> claimed(static_cast<std::size_t>(num_t) * num_s, -1);
  auto cell = [&](int t, int s) -> int& { return claimed[static_cast<std::size_t>(t) * num_s + s]; };

  std::vector<std::int64_t> seeds(n);
  std::iota(seeds.begin(), seeds.end(), 0);
  if (options.random_seeding) {
    std::mt19937_64 rng(options.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(level.k)));
    std::shuffle(seeds.begin(), seeds.end(), rng);
  }

  std::vector<int> member_of(num_s, -1);    // region id whose sensor set holds s
  std::vector<int> rejected_by(num_s, -1);  // region id that refused s
  std::vector<int> frontier;
  std::vector<int> pending;

  for (std::int64_t seed : seeds) {
    if (level.instance_region[seed] >= 0) continue;
    const int region_id = static_cast<int>(level.regions.size());
    const int label = labels[seed];
    const InstanceKey origin = d.key(seed);
    Region region;
    region.id = region_id;
    region.cluster = label;
    region.t_begin = region.t_end = origin.timestep;
    region.sensors.push_back(origin.sensor);
    member_of[origin.sensor] = region_id;
    cell(origin.timestep, origin.sensor) = region_id;
    level.instance_region[seed] = region_id;

    // Examines the cell (t, s) for inclusion; records the edges between it and
    // the region's current instances.
    auto admissible = [&](int t, int s) {
      if (cell(t, s) >= 0) return false;
      const std::int64_t idx = d.find(t, s);
      if (idx < 0) return true;
      if (stats) {
        for (std::int64_t nb : graph.neighbors(idx)) {
          if (level.instance_region[nb] != region_id) continue;
          const auto lo = static_cast<std::uint64_t>(std::min(idx, nb));
          const auto hi = static_cast<std::uint64_t>(std::max(idx, nb));
          ++stats->edge_examinations[lo * static_cast<std::uint64_t>(n) + hi];
          ++stats->total_examinations;
        }
      }
      return labels[idx] == label;
    };
    auto claim = [&](int t, int s) {
      cell(t, s) = region_id;
      const std::int64_t idx = d.find(t, s);
      if (idx >= 0) level.instance_region[idx] = region_id;
    };

    pending.assign(cells.cells[origin.sensor].neighbors.begin(), cells.cells[origin.sensor].neighbors.end());
    bool before_closed = false;
    bool after_closed = false;
    bool changed = true;
    while (changed) {
      changed = false;
      // Spatial step: one ring of neighbouring sensors, whole columns.
      frontier.swap(pending);
      pending.clear();
      std::sort(frontier.begin(), frontier.end());
      frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
      for (int s : frontier) {
        if (member_of[s] == region_id || rejected_by[s] == region_id) continue;
        bool ok = true;
        for (int t = region.t_begin; t <= region.t_end && ok; ++t) ok = admissible(t, s);
        if (!ok) {
          rejected_by[s] = region_id;
          continue;
        }
        for (int t = region.t_begin; t <= region.t_end; ++t) claim(t, s);
        member_of[s] = region_id;
        region.sensors.push_back(s);
        for (int nb : cells.cells[s].neighbors)
          if (member_of[nb] != region_id && rejected_by[nb] != region_id) pending.push_back(nb);
        changed = true;
      }
      // Temporal step: one timestep before, then one after, whole rows.
      auto try_row = [&](int t) {
        for (int s : region.sensors)
          if (!admissible(t, s)) return false;
        for (int s : region.sensors) claim(t, s);
        return true;
      };
      if (!before_closed) {
        if (region.t_begin > 0 && try_row(region.t_begin - 1)) {
          --region.t_begin;
          changed = true;
        } else {
          before_closed = true;
        }
      }
      if (!after_closed) {
        if (region.t_end + 1 < num_t && try_row(region.t_end + 1)) {
          ++region.t_end;
          changed = true;
        } else {
          after_closed = true;
        }
      }
    }
    std::sort(region.sensors.begin(), region.sensors.end());
    level.regions.push_back(std::move(region));
  }

  if (options.compute_outlines)
    for (auto& r : level.regions) r.outline = region_outline(r.sensors, cells);
  return level;
}

Refinement refine_level(const PartitionLevel& prev, const PartitionLevel& next) {
  if (next.k != prev.k + 1)
    throw Error(ErrorCode::LevelMismatch, "levels " + std::to_string(prev.k) + " and " + std::to_string(next.k) +
                                              " are not consecutive");
  std::map<std::tuple<int, int, std::vector<int>>, int> blocks;
  for (const auto& r : prev.regions) blocks.emplace(std::make_tuple(r.t_begin, r.t_end, r.sensors), r.id);
  Refinement out;
  for (const auto& r : next.regions) {
    auto it = blocks.find(std::make_tuple(r.t_begin, r.t_end, r.sensors));
    if (it != blocks.end()) out.kept.emplace_back(it->second, r.id);
    else out.fresh.push_back(r.id);
  }
  return out;
}

}  // namespace kdstr
