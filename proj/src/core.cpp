#include "kdstr/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace kdstr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateInstance: return "DuplicateInstance";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::DisconnectedSensorSet: return "DisconnectedSensorSet";
    case ErrorCode::MissingOutline: return "MissingOutline";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::TooManyInstances: return "TooManyInstances";
    case ErrorCode::LevelMismatch: return "LevelMismatch";
    case ErrorCode::ComplexityExceedsData: return "ComplexityExceedsData";
    case ErrorCode::OutsideModelDomain: return "OutsideModelDomain";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::ZeroValueInData: return "ZeroValueInData";
    case ErrorCode::UnassignedInstance: return "UnassignedInstance";
    case ErrorCode::OutsideAllRegions: return "OutsideAllRegions";
    case ErrorCode::TechniqueCannotImpute: return "TechniqueCannotImpute";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptPayload: return "CorruptPayload";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(Technique t) {
  switch (t) {
    case Technique::PLR: return "plr";
    case Technique::DCT: return "dct";
    case Technique::DTR: return "dtr";
  }
  return "?";
}

std::string_view to_string(LinkMode m) { return m == LinkMode::PerRegion ? "region" : "cluster"; }

std::string_view to_string(ErrorMetric m) { return m == ErrorMetric::NRMSE ? "nrmse" : "mape"; }

Technique parse_technique(std::string_view s) {
  if (s == "plr" || s == "PLR") return Technique::PLR;
  if (s == "dct" || s == "DCT") return Technique::DCT;
  if (s == "dtr" || s == "DTR") return Technique::DTR;
  throw Error(ErrorCode::InvalidConfig, "unknown technique '" + std::string(s) + "'");
}

LinkMode parse_link_mode(std::string_view s) {
  if (s == "region" || s == "perRegion") return LinkMode::PerRegion;
  if (s == "cluster" || s == "perCluster") return LinkMode::PerCluster;
  throw Error(ErrorCode::InvalidConfig, "unknown link mode '" + std::string(s) + "'");
}

ErrorMetric parse_error_metric(std::string_view s) {
  if (s == "nrmse" || s == "NRMSE") return ErrorMetric::NRMSE;
  if (s == "mape" || s == "MAPE") return ErrorMetric::MAPE;
  throw Error(ErrorCode::InvalidConfig, "unknown error metric '" + std::string(s) + "'");
}

Dataset::Dataset(std::vector<std::vector<double>> sensor_coords, std::vector<double> times,
                 std::vector<std::string> feature_names, std::vector<InstanceKey> keys,
                 std::vector<double> values)
    : sensor_coords_(std::move(sensor_coords)),
      times_(std::move(times)),
      feature_names_(std::move(feature_names)) {
  if (feature_names_.empty()) throw Error(ErrorCode::InvalidDataset, "at least one feature is required");
  const std::size_t nf = feature_names_.size();
  if (values.size() != keys.size() * nf)
    throw Error(ErrorCode::InvalidDataset, "value table does not match instance count");

  spatial_dims_ = sensor_coords_.empty() ? 2 : static_cast<int>(sensor_coords_.front().size());
  if (spatial_dims_ < 1) throw Error(ErrorCode::InvalidDataset, "sensors need at least one coordinate");
  std::set<std::vector<double>> seen;
  for (const auto& c : sensor_coords_) {
    if (static_cast<int>(c.size()) != spatial_dims_)
      throw Error(ErrorCode::InvalidDataset, "inconsistent sensor coordinate dimensionality");
    for (double v : c)
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "sensor coordinate is not finite");
    if (!seen.insert(c).second) throw Error(ErrorCode::InvalidDataset, "two sensors share a location");
  }
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i])) throw Error(ErrorCode::NonFiniteValue, "time is not finite");
    if (i > 0 && !(times_[i] > times_[i - 1]))
      throw Error(ErrorCode::InvalidDataset, "times must be strictly increasing");
  }

  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

  keys_.reserve(keys.size());
  values_.reserve(values.size());
  cell_index_.assign(times_.size() * sensor_coords_.size(), -1);
  for (std::size_t i : order) {
    const InstanceKey key = keys[i];
    if (key.timestep < 0 || key.timestep >= num_timesteps() || key.sensor < 0 || key.sensor >= num_sensors())
      throw Error(ErrorCode::InvalidDataset, "instance key out of range");
    auto& slot = cell_index_[static_cast<std::size_t>(key.timestep) * sensor_coords_.size() + key.sensor];
    if (slot >= 0)
      throw Error(ErrorCode::DuplicateInstance, "two instances at timestep " + std::to_string(key.timestep) +
                                                    ", sensor " + std::to_string(key.sensor));
    slot = static_cast<std::int64_t>(keys_.size());
    keys_.push_back(key);
    for (std::size_t f = 0; f < nf; ++f) {
      const double v = values[i * nf + f];
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "feature value is not finite");
      values_.push_back(v);
    }
  }
}

Dataset Dataset::with_values(std::vector<double> values) const {
  if (values.size() != values_.size()) throw Error(ErrorCode::KeyMismatch, "replacement values have wrong size");
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "feature value is not finite");
  Dataset out = *this;
  out.values_ = std::move(values);
  return out;
}

std::int64_t monomial_count(int vars, int degree) {
  // C(vars + degree, vars)
  std::int64_t r = 1;
  for (int i = 1; i <= vars; ++i) r = r * (degree + i) / i;
  return r;
}

std::int64_t dataset_storage(const Dataset& d) {
  return static_cast<std::int64_t>(d.size()) * (d.num_features() + d.k());
}

std::int64_t model_storage_cost(const ModelArtifact& m) {
  struct Visitor {
    const ModelArtifact& m;
    std::int64_t operator()(const PlrPayload& p) const {
      return static_cast<std::int64_t>(m.num_features) * monomial_count(m.num_predictors, p.degree);
    }
    std::int64_t operator()(const DctPayload& p) const {
      std::int64_t units = 0;
      for (const auto& s : p.features) units += 1 + 2 * static_cast<std::int64_t>(s.indices.size());
      return units;
    }
    std::int64_t operator()(const DtrPayload& p) const {
      std::int64_t units = 0;
      for (const auto& n : p.nodes) units += n.is_leaf() ? m.num_features : 2;
      return units;
    }
  };
  return std::visit(Visitor{m}, m.payload);
}

std::int64_t region_storage_cost(const Region& r, int k) {
  return static_cast<std::int64_t>(r.outline.size()) * (k - 1) + 2;
}

std::int64_t reduction_storage(const Reduction& r, int k) {
  std::int64_t units = 0;
  for (const auto& region : r.regions) {
    if (region.outline.empty())
      throw Error(ErrorCode::MissingOutline, "region " + std::to_string(region.id) + " has no outline");
    units += region_storage_cost(region, k);
  }
  for (const auto& m : r.models) units += model_storage_cost(m);
  // One model pointer per region when regions share cluster models.
  if (r.link_mode == LinkMode::PerCluster) units += static_cast<std::int64_t>(r.regions.size());
  return units;
}

double storage_ratio(const Dataset& d, const Reduction& r) {
  const auto denom = dataset_storage(d);
  if (denom <= 0) throw Error(ErrorCode::EmptyDataset, "storage ratio of an empty dataset");
  return static_cast<double>(reduction_storage(r, d.k())) / static_cast<double>(denom);
}

}  // namespace kdstr
