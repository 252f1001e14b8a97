#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kdstr/core.hpp"
#include "kdstr/geometry.hpp"

namespace kdstr {

struct PartitionLevel {
  int k = 0;
  std::vector<Region> regions;         // region id == index
  std::vector<int> instance_region;    // instance index -> region id
};

struct GrowthOptions {
  // Seed each region from a random unassigned instance instead of the
  // smallest (timestep, sensor).
  bool random_seeding = false;
  std::uint64_t seed = 0;
  bool compute_outlines = true;
};

// Counts how often each adjacency edge is looked at while regions grow.
struct GrowthStats {
  std::unordered_map<std::uint64_t, int> edge_examinations;
  std::size_t total_examinations = 0;

  int max_examinations() const;
};

// Grows block-shaped regions (sensor set x timestep interval) that are
// homogeneous in `labels`. Absent (timestep, sensor) cells never block
// growth, but each cell is claimed by at most one region.
PartitionLevel grow_regions(const Dataset& d, std::span<const int> labels, const AdjacencyGraph& graph,
                            const VoronoiDiagram& cells, const GrowthOptions& options = {},
                            GrowthStats* stats = nullptr);

struct Refinement {
  std::vector<std::pair<int, int>> kept;  // (previous region id, next region id)
  std::vector<int> fresh;                 // next-level region ids with no counterpart
};

// Pairs regions whose block is unchanged between consecutive levels.
Refinement refine_level(const PartitionLevel& prev, const PartitionLevel& next);

}  // namespace kdstr
