#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kdstr/core.hpp"

namespace kdstr {

// ---------------------------------------------------------------- ingestion

struct CsvSchema {
  std::string time_column = "time";
  std::vector<std::string> coord_columns = {"x", "y"};
  std::vector<std::string> feature_columns;  // empty: every unmapped column except `ignore_columns`
  std::vector<std::string> ignore_columns;
};

// Seconds since the epoch. Accepts plain numbers and ISO-8601 date/date-time
// strings ("2019-03-01", "2019-03-01T12:30:00Z", "2019-03-01 12:30:00+01:00").
double parse_time(std::string_view text);

Dataset parse_csv(std::istream& in, const CsvSchema& schema);
Dataset load_csv(const std::string& path, const CsvSchema& schema);

// Columns: sensor, time, one per coordinate ("x", "y"), then the features.
// Reads back with parse_csv given ignore_columns = {"sensor"}.
void write_csv(std::ostream& out, const Dataset& d);

// Timestep cell edges: midpoints between consecutive times, the ends padded
// by half the (lower) median gap, or by 0.5 when there is a single time.
std::vector<double> discretize_time(const std::vector<double>& times);

// ---------------------------------------------------------------- geometry

struct Window {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
  double diagonal() const;
};

// Sensor bounding box padded by 5% of each extent, at least 1.0 unit.
Window clipping_window(const std::vector<std::vector<double>>& sensor_coords);

struct VoronoiCell {
  int sensor = 0;
  std::vector<int> ring;          // vertex ids into VoronoiDiagram::vertices, CCW
  std::vector<Point2> vertices;   // same ring as coordinates
  std::vector<int> neighbors;     // sensors sharing an edge, ascending
};

struct VoronoiDiagram {
  int spatial_dims = 2;
  Window window;
  double tolerance = 0.0;         // vertex snapping distance
  std::vector<Point2> vertices;   // shared, snapped vertex table
  std::vector<VoronoiCell> cells; // indexed by sensor id
};

// One cell per sensor clipped to `window`. Supports 1 or 2 spatial
// dimensions; in 1-D cells are intervals stored as two points with y = 0.
VoronoiDiagram voronoi_cells(const std::vector<std::vector<double>>& sensor_coords, const Window& window);
VoronoiDiagram voronoi_cells(const Dataset& d);

// Undirected instance graph in CSR form. Node ids are dataset instance indices.
struct AdjacencyGraph {
  std::vector<std::size_t> offsets;
  std::vector<std::int64_t> targets;

  std::size_t num_nodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t num_edges() const { return targets.size() / 2; }
  std::span<const std::int64_t> neighbors(std::int64_t node) const {
    return {targets.data() + offsets[node], offsets[node + 1] - offsets[node]};
  }
};

// Edges: consecutive records of one sensor (gaps do not break the chain) and
// same-timestep records of Voronoi-adjacent sensors.
AdjacencyGraph build_adjacency(const Dataset& d, const VoronoiDiagram& cells);

// Outer boundary of the union of the member cells, collinear vertices pruned.
std::vector<Point2> region_outline(std::span<const int> sensors, const VoronoiDiagram& cells);

double polygon_area(std::span<const Point2> ring);
// Closed test: points on the boundary (within `tolerance`) count as inside.
bool point_in_polygon(Point2 p, std::span<const Point2> ring, double tolerance = 1e-9);

}  // namespace kdstr
