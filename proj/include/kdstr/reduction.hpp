#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "kdstr/clustering.hpp"
#include "kdstr/core.hpp"
#include "kdstr/geometry.hpp"
#include "kdstr/partitioning.hpp"

namespace kdstr {

struct ReductionConfig {
  double alpha = 0.5;
  Technique technique = Technique::PLR;
  LinkMode link_mode = LinkMode::PerRegion;
  ErrorMetric error_metric = ErrorMetric::NRMSE;
  int max_iterations = 10'000;
  int max_complexity = 32;
  bool random_seeding = false;
  std::uint64_t seed = 0;

  // Throws InvalidConfig; MAPE is refused when `d` holds a zero value.
  void validate(const Dataset& d) const;
};

// Everything about a dataset that does not depend on alpha or technique:
// the cluster tree, Voronoi cells, instance graph and memoized partition
// levels. Safe to share between concurrent reductions.
class ReductionContext {
 public:
  explicit ReductionContext(Dataset d, std::size_t instance_cap = kDefaultInstanceCap);

  const Dataset& dataset() const { return dataset_; }
  const ClusterTree& tree() const { return tree_; }
  const VoronoiDiagram& cells() const { return cells_; }
  const AdjacencyGraph& graph() const { return graph_; }
  const TimeAxis& time_axis() const { return time_axis_; }

  std::shared_ptr<const PartitionLevel> level(int k, const GrowthOptions& options = {}) const;

 private:
  Dataset dataset_;
  ClusterTree tree_;
  VoronoiDiagram cells_;
  AdjacencyGraph graph_;
  TimeAxis time_axis_;
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<bool, std::uint64_t, int>, std::shared_ptr<const PartitionLevel>> levels_;
};

enum class StepKind { Initialize, Complexity, Partition };

struct IterationRecord {
  int iteration = 0;
  StepKind kind = StepKind::Initialize;
  double h = 0.0;
  double error = 0.0;
  double storage_ratio = 0.0;
  int clusters = 1;
  int regions = 1;
  int models = 1;
  int target = -1;  // model raised by a complexity step
};

struct ReduceResult {
  Reduction reduction;
  std::vector<IterationRecord> history;  // committed states, initialization first
  std::vector<std::string> warnings;
  int clusters = 1;
  std::int64_t original_units = 0;
  std::int64_t reduced_units = 0;
  // Artifact serials carried over unchanged by each committed partition step.
  std::vector<std::vector<std::uint64_t>> persisted_serials;
};

double objective(double alpha, double storage_ratio, double error);
// h recomputed from scratch: reconstruct, error metric, storage ratio.
double objective(const Dataset& d, const Reduction& r);

ReduceResult reduce(const ReductionContext& ctx, const ReductionConfig& cfg);
ReduceResult reduce(const Dataset& d, const ReductionConfig& cfg);

// ---------------------------------------------------------------- files

inline constexpr std::uint16_t kFormatMajor = 1;
inline constexpr std::uint16_t kFormatMinor = 0;

std::vector<std::uint8_t> serialize(const Reduction& r);
Reduction deserialize(std::span<const std::uint8_t> bytes);

std::string to_json(const Reduction& r, int indent = -1);
Reduction from_json(const std::string& text);

void write_reduction(const std::string& path, const Reduction& r);
Reduction read_reduction(const std::string& path);

}  // namespace kdstr
