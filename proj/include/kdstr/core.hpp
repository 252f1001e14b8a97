#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kdstr/error.hpp"

namespace kdstr {

enum class Technique { PLR, DCT, DTR };
enum class LinkMode { PerRegion, PerCluster };
enum class ErrorMetric { NRMSE, MAPE };

std::string_view to_string(Technique t);
std::string_view to_string(LinkMode m);
std::string_view to_string(ErrorMetric m);
Technique parse_technique(std::string_view s);
LinkMode parse_link_mode(std::string_view s);
ErrorMetric parse_error_metric(std::string_view s);

struct InstanceKey {
  int timestep = 0;
  int sensor = 0;
  auto operator<=>(const InstanceKey&) const = default;
};

// Immutable table of sensor readings. Sensor ids are dense indices into the
// coordinate list; instances are held in canonical (timestep, sensor) order.
class Dataset {
 public:
  Dataset() = default;
  // `values` is row-major, one row of |F| values per key, in the same order
  // as `keys`. Rows are re-sorted into canonical order.
  Dataset(std::vector<std::vector<double>> sensor_coords, std::vector<double> times,
          std::vector<std::string> feature_names, std::vector<InstanceKey> keys,
          std::vector<double> values);

  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }
  int num_features() const { return static_cast<int>(feature_names_.size()); }
  int spatial_dims() const { return spatial_dims_; }
  int k() const { return 1 + spatial_dims_; }
  int num_sensors() const { return static_cast<int>(sensor_coords_.size()); }
  int num_timesteps() const { return static_cast<int>(times_.size()); }

  const std::vector<double>& times() const { return times_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::span<const double> coords(int sensor) const { return sensor_coords_[sensor]; }
  const std::vector<std::vector<double>>& sensor_coords() const { return sensor_coords_; }

  InstanceKey key(std::size_t i) const { return keys_[i]; }
  const std::vector<InstanceKey>& keys() const { return keys_; }
  std::span<const double> values(std::size_t i) const {
    return {values_.data() + i * feature_names_.size(), feature_names_.size()};
  }
  double value(std::size_t i, int feature) const { return values_[i * feature_names_.size() + feature]; }
  const std::vector<double>& raw_values() const { return values_; }

  // Instance index at (timestep, sensor), or -1 when nothing was recorded.
  std::int64_t find(int timestep, int sensor) const {
    return cell_index_[static_cast<std::size_t>(timestep) * sensor_coords_.size() + sensor];
  }

  // Same keys, geometry and times; replaced feature values (canonical order).
  Dataset with_values(std::vector<double> values) const;

 private:
  std::vector<std::vector<double>> sensor_coords_;
  std::vector<double> times_;
  std::vector<std::string> feature_names_;
  std::vector<InstanceKey> keys_;
  std::vector<double> values_;
  std::vector<std::int64_t> cell_index_;
  int spatial_dims_ = 0;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

// A block of instances: sensors x [t_begin, t_end] (timestep indices,
// inclusive), bounded spatially by the union of the member Voronoi cells.
struct Region {
  int id = 0;
  std::vector<int> sensors;  // ascending
  int t_begin = 0;
  int t_end = 0;
  std::vector<Point2> outline;
  int cluster = 0;

  bool same_block(const Region& o) const {
    return t_begin == o.t_begin && t_end == o.t_end && sensors == o.sensors;
  }
  bool operator==(const Region&) const = default;
};

// Affine map of each predictor onto roughly [-1, 1]: x' = (x - center) / scale.
struct Standardizer {
  std::vector<double> center;
  std::vector<double> scale;

  double apply(int dim, double x) const { return (x - center[dim]) / scale[dim]; }
  bool operator==(const Standardizer&) const = default;
};

struct PlrPayload {
  int degree = 0;
  Standardizer standardizer;
  // num_features x num_monomials, feature-major.
  std::vector<double> coefficients;
  bool operator==(const PlrPayload&) const = default;
};

struct DctSeries {
  int length = 0;
  std::vector<int> indices;
  std::vector<double> values;
  bool operator==(const DctSeries&) const = default;
};

struct DctPayload {
  std::vector<DctSeries> features;
  bool operator==(const DctPayload&) const = default;
};

struct DtrNode {
  int dimension = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> value;  // leaf prediction, |F| entries
  bool is_leaf() const { return dimension < 0; }
  bool operator==(const DtrNode&) const = default;
};

struct DtrPayload {
  Standardizer standardizer;
  std::vector<DtrNode> nodes;  // nodes[0] is the root
  bool operator==(const DtrPayload&) const = default;
};

struct ModelArtifact {
  Technique technique = Technique::PLR;
  int complexity = 1;
  int num_features = 0;
  int num_predictors = 0;
  // Raising complexity further cannot change the fit.
  bool saturated = false;
  // Unique per fit; lets callers tell a reused artifact from a refit one.
  std::uint64_t serial = 0;
  std::variant<PlrPayload, DctPayload, DtrPayload> payload;

  bool operator==(const ModelArtifact&) const = default;
};

struct TimeAxis {
  std::vector<double> times;       // raw time per timestep
  std::vector<double> boundaries;  // |times| + 1 cell edges
  bool operator==(const TimeAxis&) const = default;
};

struct Reduction {
  int spatial_dims = 2;
  std::vector<std::string> feature_names;
  TimeAxis time_axis;
  Technique technique = Technique::PLR;
  LinkMode link_mode = LinkMode::PerRegion;
  ErrorMetric error_metric = ErrorMetric::NRMSE;
  double alpha = 0.5;
  std::vector<Region> regions;
  std::vector<ModelArtifact> models;
  std::vector<int> region_model;  // region index -> model index
  double final_error = 0.0;
  double final_storage_ratio = 0.0;

  int k() const { return spatial_dims + 1; }
  bool operator==(const Reduction&) const = default;
};

// Number of monomials of total degree <= degree in `vars` variables.
std::int64_t monomial_count(int vars, int degree);

// Storage units (one scalar = one unit).
std::int64_t dataset_storage(const Dataset& d);
std::int64_t model_storage_cost(const ModelArtifact& m);
std::int64_t region_storage_cost(const Region& r, int k);
std::int64_t reduction_storage(const Reduction& r, int k);
double storage_ratio(const Dataset& d, const Reduction& r);

}  // namespace kdstr
