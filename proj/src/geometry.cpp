#include "kdstr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

namespace kdstr {
namespace {

using Ring = std::vector<Point2>;

double cross(Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }
double dist(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Keeps the part of `poly` closer to `site` than to `other`.
Ring clip_to_bisector(const Ring& poly, Point2 site, Point2 other, double eps) {
  const Point2 mid{0.5 * (site.x + other.x), 0.5 * (site.y + other.y)};
  const double nx = other.x - site.x;
  const double ny = other.y - site.y;
  const double norm = std::hypot(nx, ny);
  auto side = [&](Point2 p) { return ((p.x - mid.x) * nx + (p.y - mid.y) * ny) / norm; };

  Ring out;
  out.reserve(poly.size() + 1);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2 a = poly[i];
    const Point2 b = poly[(i + 1) % poly.size()];
    const double sa = side(a);
    const double sb = side(b);
    const bool ina = sa <= eps;
    const bool inb = sb <= eps;
    if (ina) out.push_back(a);
    if (ina != inb) {
      const double t = sa / (sa - sb);
      out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
  }
  return out;
}

// Snaps coordinates that lie within `tol` of each other onto one shared id.
class VertexTable {
 public:
  explicit VertexTable(double tol) : tol_(tol) {}

  int intern(Point2 p) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x / tol_));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y / tol_));
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = buckets_.find(key(cx + dx, cy + dy));
        if (it == buckets_.end()) continue;
        for (int id : it->second)
          if (dist(points_[id], p) <= tol_) return id;
      }
    const int id = static_cast<int>(points_.size());
    points_.push_back(p);
    buckets_[key(cx, cy)].push_back(id);
    return id;
  }

  std::vector<Point2> take() { return std::move(points_); }

 private:
  static std::uint64_t key(std::int64_t x, std::int64_t y) {
    return static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(y);
  }
  double tol_;
  std::vector<Point2> points_;
  std::unordered_map<std::uint64_t, std::vector<int>> buckets_;
};

VoronoiDiagram voronoi_1d(const std::vector<std::vector<double>>& coords, const Window& window) {
  VoronoiDiagram vd;
  vd.spatial_dims = 1;
  vd.window = window;
  vd.tolerance = 1e-9 * window.diagonal();
  const int n = static_cast<int>(coords.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return coords[a][0] < coords[b][0]; });

  // Boundary i separates order[i-1] and order[i]; 0 and n are the window ends.
  for (int i = 0; i <= n; ++i) {
    double x = 0.0;
    if (i == 0) x = window.min_x;
    else if (i == n) x = window.max_x;
    else x = 0.5 * (coords[order[i - 1]][0] + coords[order[i]][0]);
    vd.vertices.push_back({x, 0.0});
  }
  vd.cells.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& cell = vd.cells[order[i]];
    cell.sensor = order[i];
    cell.ring = {i, i + 1};
    cell.vertices = {vd.vertices[i], vd.vertices[i + 1]};
    if (i > 0) cell.neighbors.push_back(order[i - 1]);
    if (i + 1 < n) cell.neighbors.push_back(order[i + 1]);
    std::sort(cell.neighbors.begin(), cell.neighbors.end());
  }
  return vd;
}

bool sensor_set_connected(std::span<const int> sensors, const VoronoiDiagram& vd) {
  std::vector<char> member(vd.cells.size(), 0);
  for (int s : sensors) member.at(s) = 1;
  std::vector<char> seen(vd.cells.size(), 0);
  std::vector<int> stack{sensors.front()};
  seen[sensors.front()] = 1;
  std::size_t reached = 0;
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    ++reached;
    for (int n : vd.cells[s].neighbors)
      if (member[n] && !seen[n]) {
        seen[n] = 1;
        stack.push_back(n);
      }
  }
  std::size_t distinct = 0;
  for (char m : member) distinct += m;
  return reached == distinct;
}

Ring prune_collinear(Ring ring) {
  bool changed = true;
  while (changed && ring.size() > 3) {
    changed = false;
    for (std::size_t i = 0; i < ring.size() && ring.size() > 3; ++i) {
      const Point2 p = ring[(i + ring.size() - 1) % ring.size()];
      const Point2 v = ring[i];
      const Point2 n = ring[(i + 1) % ring.size()];
      const double lp = dist(p, v);
      const double ln = dist(v, n);
      const bool duplicate = lp == 0.0 || ln == 0.0;
      const bool straight = std::abs(cross(p, v, n)) <= 1e-9 * lp * ln &&
                            ((v.x - p.x) * (n.x - v.x) + (v.y - p.y) * (n.y - v.y)) > 0.0;
      if (duplicate || straight) {
        ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        --i;
      }
    }
  }
  return ring;
}

}  // namespace

double Window::diagonal() const { return std::hypot(max_x - min_x, max_y - min_y); }

Window clipping_window(const std::vector<std::vector<double>>& sensor_coords) {
  if (sensor_coords.empty()) throw Error(ErrorCode::DegenerateGeometry, "no sensors");
  const std::size_t dims = sensor_coords.front().size();
  double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double hi[2] = {-lo[0], -lo[1]};
  for (const auto& c : sensor_coords)
    for (std::size_t d = 0; d < std::min<std::size_t>(dims, 2); ++d) {
      lo[d] = std::min(lo[d], c[d]);
      hi[d] = std::max(hi[d], c[d]);
    }
  Window w;
  auto pad = [](double a, double b) { return std::max(0.05 * (b - a), 1.0); };
  w.min_x = lo[0] - pad(lo[0], hi[0]);
  w.max_x = hi[0] + pad(lo[0], hi[0]);
  if (dims >= 2) {
    w.min_y = lo[1] - pad(lo[1], hi[1]);
    w.max_y = hi[1] + pad(lo[1], hi[1]);
  }
  return w;
}

VoronoiDiagram voronoi_cells(const std::vector<std::vector<double>>& coords, const Window& window) {
  if (coords.empty()) throw Error(ErrorCode::DegenerateGeometry, "no sensors");
  const std::size_t dims = coords.front().size();
  if (dims == 1) return voronoi_1d(coords, window);
  if (dims != 2) throw Error(ErrorCode::DegenerateGeometry, "Voronoi cells need 1 or 2 spatial dimensions");

  const int n = static_cast<int>(coords.size());
  std::vector<Point2> sites(n);
  for (int i = 0; i < n; ++i) sites[i] = {coords[i][0], coords[i][1]};
  {
    auto sorted = sites;
    std::sort(sorted.begin(), sorted.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw Error(ErrorCode::DegenerateGeometry, "two sensors share a location");
  }

  VoronoiDiagram vd;
  vd.spatial_dims = 2;
  vd.window = window;
  vd.tolerance = 1e-9 * window.diagonal();
  const double eps = 1e-12 * window.diagonal();

  std::vector<Ring> raw(n);
  std::vector<int> by_distance(n);
  for (int i = 0; i < n; ++i) {
    Ring poly{{window.min_x, window.min_y}, {window.max_x, window.min_y}, {window.max_x, window.max_y},
              {window.min_x, window.max_y}};
    std::iota(by_distance.begin(), by_distance.end(), 0);
    std::sort(by_distance.begin(), by_distance.end(), [&](int a, int b) {
      const double da = dist(sites[a], sites[i]);
      const double db = dist(sites[b], sites[i]);
      return da < db || (da == db && a < b);
    });
    for (int j : by_distance) {
      if (j == i) continue;
      // A bisector farther than twice the cell radius cannot cut the cell.
      double radius = 0.0;
      for (const auto& p : poly) radius = std::max(radius, dist(p, sites[i]));
      if (dist(sites[j], sites[i]) > 2.0 * radius + eps) break;
      poly = clip_to_bisector(poly, sites[i], sites[j], eps);
      if (poly.empty()) break;
    }
    raw[i] = std::move(poly);
  }

  VertexTable table(vd.tolerance);
  vd.cells.resize(n);
  std::map<std::pair<int, int>, int> edge_owner;
  for (int i = 0; i < n; ++i) {
    auto& cell = vd.cells[i];
    cell.sensor = i;
    for (const auto& p : raw[i]) {
      const int id = table.intern(p);
      if (cell.ring.empty() || cell.ring.back() != id) cell.ring.push_back(id);
    }
    while (cell.ring.size() > 1 && cell.ring.front() == cell.ring.back()) cell.ring.pop_back();
    if (cell.ring.size() < 3) throw Error(ErrorCode::DegenerateGeometry, "sensor " + std::to_string(i) + " has an empty cell");
    for (std::size_t e = 0; e < cell.ring.size(); ++e)
      edge_owner[{cell.ring[e], cell.ring[(e + 1) % cell.ring.size()]}] = i;
  }
  vd.vertices = table.take();
  for (auto& cell : vd.cells) {
    for (int id : cell.ring) cell.vertices.push_back(vd.vertices[id]);
    for (std::size_t e = 0; e < cell.ring.size(); ++e) {
      auto it = edge_owner.find({cell.ring[(e + 1) % cell.ring.size()], cell.ring[e]});
      if (it != edge_owner.end() && it->second != cell.sensor) cell.neighbors.push_back(it->second);
    }
    std::sort(cell.neighbors.begin(), cell.neighbors.end());
    cell.neighbors.erase(std::unique(cell.neighbors.begin(), cell.neighbors.end()), cell.neighbors.end());
  }
  return vd;
}

VoronoiDiagram voronoi_cells(const Dataset& d) {
  return voronoi_cells(d.sensor_coords(), clipping_window(d.sensor_coords()));
}

AdjacencyGraph build_adjacency(const Dataset& d, const VoronoiDiagram& cells) {
  if (static_cast<int>(cells.cells.size()) < d.num_sensors())
    throw Error(ErrorCode::DegenerateGeometry, "Voronoi cells do not cover every sensor");
  const auto n = static_cast<std::int64_t>(d.size());
  std::vector<std::vector<std::int64_t>> adj(n);
  auto link = [&](std::int64_t a, std::int64_t b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  // (i) consecutive records per sensor
  std::vector<std::int64_t> last(d.num_sensors(), -1);
  for (std::int64_t i = 0; i < n; ++i) {
    const int s = d.key(i).sensor;
    if (last[s] >= 0) link(last[s], i);
    last[s] = i;
  }
  // (ii) same timestep, adjacent cells
  for (std::int64_t i = 0; i < n; ++i) {
    const auto key = d.key(i);
    for (int nb : cells.cells[key.sensor].neighbors) {
      if (nb <= key.sensor) continue;
      const auto j = d.find(key.timestep, nb);
      if (j >= 0) link(i, j);
    }
  }
  AdjacencyGraph g;
  g.offsets.reserve(n + 1);
  g.offsets.push_back(0);
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    g.targets.insert(g.targets.end(), list.begin(), list.end());
    g.offsets.push_back(g.targets.size());
  }
  return g;
}

double polygon_area(std::span<const Point2> ring) {
  double a = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point2 p = ring[i];
    const Point2 q = ring[(i + 1) % ring.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

bool point_in_polygon(Point2 p, std::span<const Point2> ring, double tolerance) {
  if (ring.empty()) return false;
  if (ring.size() == 2) {  // 1-D segment
    const double lo = std::min(ring[0].x, ring[1].x);
    const double hi = std::max(ring[0].x, ring[1].x);
    return p.x >= lo - tolerance && p.x <= hi + tolerance;
  }
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const Point2 a = ring[j];
    const Point2 b = ring[i];
    // on-edge check
    const double len = dist(a, b);
    if (len > 0.0) {
      const double t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len);
      if (t >= 0.0 && t <= 1.0 && std::abs(cross(a, b, p)) / len <= tolerance) return true;
    }
    if ((b.y > p.y) != (a.y > p.y)) {
      const double x = (a.x - b.x) * (p.y - b.y) / (a.y - b.y) + b.x;
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

std::vector<Point2> region_outline(std::span<const int> sensors, const VoronoiDiagram& vd) {
  if (sensors.empty()) throw Error(ErrorCode::DisconnectedSensorSet, "empty sensor set");
  if (!sensor_set_connected(sensors, vd))
    throw Error(ErrorCode::DisconnectedSensorSet, "sensor set is not connected through shared cell edges");

  if (vd.spatial_dims == 1) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int s : sensors)
      for (const auto& p : vd.cells[s].vertices) {
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
      }
    return {{lo, 0.0}, {hi, 0.0}};
  }

  if (sensors.size() == 1) return prune_collinear(vd.cells[sensors.front()].vertices);

  // Directed boundary edges; an edge shared by two member cells appears in
  // both directions and cancels.
  std::map<std::pair<int, int>, int> directed;
  for (int s : sensors) {
    const auto& ring = vd.cells[s].ring;
    for (std::size_t e = 0; e < ring.size(); ++e) ++directed[{ring[e], ring[(e + 1) % ring.size()]}];
  }
  std::multimap<int, int> outgoing;
  for (const auto& [edge, count] : directed) {
    if (directed.count({edge.second, edge.first})) continue;
    outgoing.emplace(edge.first, edge.second);
  }

  std::vector<Ring> rings;
  while (!outgoing.empty()) {
    auto it = outgoing.begin();
    const int start = it->first;
    int prev = start;
    int cur = it->second;
    outgoing.erase(it);
    std::vector<int> ids{start};
    while (cur != start) {
      ids.push_back(cur);
      auto [lo, hi] = outgoing.equal_range(cur);
      if (lo == hi) break;  // open chain: malformed, dropped below
      // At a pinch vertex, take the most counter-clockwise continuation.
      auto best = lo;
      double best_angle = -std::numeric_limits<double>::infinity();
      const Point2 a = vd.vertices[prev];
      const Point2 b = vd.vertices[cur];
      for (auto cand = lo; cand != hi; ++cand) {
        const Point2 c = vd.vertices[cand->second];
        const double ang = std::atan2(cross(a, b, c), (b.x - a.x) * (c.x - b.x) + (b.y - a.y) * (c.y - b.y));
        if (ang > best_angle) {
          best_angle = ang;
          best = cand;
        }
      }
      prev = cur;
      cur = best->second;
      outgoing.erase(best);
    }
    if (cur != start || ids.size() < 3) continue;
    Ring ring;
    for (int id : ids) ring.push_back(vd.vertices[id]);
    rings.push_back(std::move(ring));
  }
  if (rings.empty()) throw Error(ErrorCode::DegenerateGeometry, "sensor set has no boundary");
  const auto outer = std::max_element(rings.begin(), rings.end(),
                                      [](const Ring& a, const Ring& b) { return polygon_area(a) < polygon_area(b); });
  return prune_collinear(*outer);
}

}  // namespace kdstr
