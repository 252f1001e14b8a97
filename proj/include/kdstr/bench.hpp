#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "kdstr/core.hpp"
#include "kdstr/reduction.hpp"

namespace kdstr {

enum class Archetype { Continuous, HighTemporalVariance, EventDriven };

std::string_view to_string(Archetype a);
Archetype parse_archetype(std::string_view s);

struct SyntheticParams {
  int sensors = 25;
  int timesteps = 400;
  int features = 1;
  double noise = 0.0;              // standard deviation of additive noise
  double event_probability = 0.02; // per (timestep, sensor), event-driven only
};

// Sensors on a jittered grid in a 10 x 10 square, hourly timesteps.
Dataset gen_synthetic(Archetype archetype, const SyntheticParams& params, std::uint64_t seed);

struct SweepCell {
  double alpha = 0.5;
  Technique technique = Technique::PLR;
  LinkMode link_mode = LinkMode::PerRegion;
};

inline const std::vector<double> kDefaultAlphas{0.1, 0.25, 0.5, 0.75, 0.9};

// alphas x {PLR, DCT, DTR} x {per region, per cluster}
std::vector<SweepCell> sweep_grid(const std::vector<double>& alphas = kDefaultAlphas);

struct SweepOptions {
  ErrorMetric error_metric = ErrorMetric::NRMSE;
  int max_complexity = 32;
  bool random_seeding = false;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct SweepRow {
  SweepCell cell;
  bool ok = false;
  std::string message;
  double nrmse = 0.0;
  double error = 0.0;  // in the configured metric
  double storage_ratio = 0.0;
  int regions = 0;
  int models = 0;
  int clusters = 0;
  int iterations = 0;
  int max_model_complexity = 0;
  double seconds = 0.0;
};

// Rows come back in grid order whatever the job count.
std::vector<SweepRow> sweep(const ReductionContext& ctx, const std::vector<SweepCell>& grid,
                            const SweepOptions& options = {});

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct DeflateReport {
  std::size_t raw_bytes = 0;
  std::size_t compressed_bytes = 0;
  double ratio = 0.0;  // compressed / raw, in bytes
};

// Instances as (int32 timestep, int32 sensor, float64 x |F|) rows in canonical order.
std::vector<std::uint8_t> canonical_bytes(const Dataset& d);
DeflateReport deflate_baseline(const Dataset& d);

}  // namespace kdstr
