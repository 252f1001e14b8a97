#include "kdstr/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include <zlib.h>

#include "kdstr/metrics.hpp"

namespace kdstr {

std::string_view to_string(Archetype a) {
  switch (a) {
    case Archetype::Continuous: return "continuous";
    case Archetype::HighTemporalVariance: return "highTemporalVariance";
    case Archetype::EventDriven: return "eventDriven";
  }
  return "?";
}

Archetype parse_archetype(std::string_view s) {
  if (s == "continuous") return Archetype::Continuous;
  if (s == "highTemporalVariance" || s == "high-temporal-variance" || s == "htv") return Archetype::HighTemporalVariance;
  if (s == "eventDriven" || s == "event-driven" || s == "event") return Archetype::EventDriven;
  throw Error(ErrorCode::InvalidParams, "unknown archetype '" + std::string(s) + "'");
}

namespace {

constexpr double kSide = 10.0;
constexpr double kDay = 24.0;

std::vector<std::vector<double>> jittered_grid(int n, std::mt19937_64& rng) {
  const int g = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const double cell = kSide / g;
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::vector<std::vector<double>> coords;
  for (int i = 0; i < n; ++i) {
    const double x = (i % g + 0.5 + jitter(rng)) * cell;
    const double y = (i / g + 0.5 + jitter(rng)) * cell;
    coords.push_back({x, y});
  }
  return coords;
}

struct Event {
  int start = 0;
  int duration = 1;
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;
  double intensity = 1.0;
};

}  // namespace

Dataset gen_synthetic(Archetype archetype, const SyntheticParams& p, std::uint64_t seed) {
  if (p.sensors < 1 || p.timesteps < 1 || p.features < 1)
    throw Error(ErrorCode::InvalidParams, "sensor, timestep and feature counts must be positive");
  if (!(p.noise >= 0.0) || !std::isfinite(p.noise)) throw Error(ErrorCode::InvalidParams, "noise must be non-negative");
  if (!(p.event_probability >= 0.0 && p.event_probability <= 1.0))
    throw Error(ErrorCode::InvalidParams, "event probability must lie in [0, 1]");

  std::mt19937_64 rng(seed);
  auto coords = jittered_grid(p.sensors, rng);
  std::vector<double> times(p.timesteps);
  for (int t = 0; t < p.timesteps; ++t) times[t] = t;
  std::vector<std::string> names;
  for (int f = 0; f < p.features; ++f) names.push_back("f" + std::to_string(f));

  const double two_pi = 2.0 * std::numbers::pi;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Slip-road sensors: a quarter of the population follows its own
  // piecewise-constant regime on top of the shared cycle.
  std::vector<std::vector<double>> regime(p.sensors);
  if (archetype == Archetype::HighTemporalVariance) {
    const double levels[] = {-40.0, 0.0, 30.0};
    for (int s = 0; s < p.sensors; ++s) {
      if (unit(rng) >= 0.25) continue;
      regime[s].resize(p.timesteps);
      int t = 0;
      while (t < p.timesteps) {
        const double level = levels[std::uniform_int_distribution<int>(0, 2)(rng)];
        const int len = std::uniform_int_distribution<int>(12, 48)(rng);
        for (int u = t; u < std::min(p.timesteps, t + len); ++u) regime[s][u] = level;
        t += len;
      }
    }
  }

  // Rain cells start next to a sensor with the given probability per
  // (timestep, sensor) and cover a handful of neighbours for a few hours.
  std::vector<Event> events;
  if (archetype == Archetype::EventDriven && p.event_probability > 0.0) {
    std::uniform_real_distribution<double> offset(-0.5, 0.5);
    for (int t = 0; t < p.timesteps; ++t) {
      for (int s = 0; s < p.sensors; ++s) {
        if (unit(rng) >= p.event_probability) continue;
        Event e;
        e.start = t;
        e.duration = std::uniform_int_distribution<int>(1, 3)(rng);
        e.cx = coords[s][0] + offset(rng);
        e.cy = coords[s][1] + offset(rng);
        e.radius = 0.8 + 1.2 * unit(rng);
        e.intensity = 0.5 + std::exponential_distribution<double>(0.5)(rng);
        events.push_back(e);
      }
    }
  }

  std::vector<InstanceKey> keys;
  std::vector<double> values;
  keys.reserve(static_cast<std::size_t>(p.sensors) * p.timesteps);
  values.reserve(keys.capacity() * p.features);
  for (int t = 0; t < p.timesteps; ++t) {
    for (int s = 0; s < p.sensors; ++s) {
      keys.push_back({t, s});
      const double x = coords[s][0];
      const double y = coords[s][1];
      for (int f = 0; f < p.features; ++f) {
        double v = 0.0;
        switch (archetype) {
          case Archetype::Continuous:
            v = 10.0 + 2.0 * f + 0.3 * x + 0.2 * y + 5.0 * std::sin(two_pi * t / kDay - 0.05 * (x + y) + 0.5 * f);
            v += p.noise * gauss(rng);
            break;
          case Archetype::HighTemporalVariance:
            v = 50.0 + 10.0 * f + 30.0 * std::sin(two_pi * t / kDay + 0.5 * f) +
                10.0 * std::sin(two_pi * t / 6.0 + 0.3 * x);
            if (!regime[s].empty()) v += regime[s][t];
            v += p.noise * gauss(rng);
            break;
          case Archetype::EventDriven: {
            for (const auto& e : events) {
              if (t < e.start || t >= e.start + e.duration) continue;
              const double dist = std::hypot(x - e.cx, y - e.cy);
              if (dist < e.radius) v += e.intensity * (1.0 - dist / e.radius) * (1.0 + 0.2 * f);
            }
            // gauge resolution of 0.2
            v = std::round(v * 5.0) / 5.0;
            if (v > 0.0) v = std::max(0.0, v + p.noise * gauss(rng));
            break;
          }
        }
        values.push_back(v);
      }
    }
  }
  return Dataset(std::move(coords), std::move(times), std::move(names), std::move(keys), std::move(values));
}

std::vector<SweepCell> sweep_grid(const std::vector<double>& alphas) {
  std::vector<SweepCell> grid;
  for (double a : alphas)
    for (Technique t : {Technique::PLR, Technique::DCT, Technique::DTR})
      for (LinkMode m : {LinkMode::PerRegion, LinkMode::PerCluster}) grid.push_back({a, t, m});
  return grid;
}

namespace {

SweepRow run_cell(const ReductionContext& ctx, const SweepCell& cell, const SweepOptions& options) {
  SweepRow row;
  row.cell = cell;
  const auto start = std::chrono::steady_clock::now();
  try {
    ReductionConfig cfg;
    cfg.alpha = cell.alpha;
    cfg.technique = cell.technique;
    cfg.link_mode = cell.link_mode;
    cfg.error_metric = options.error_metric;
    cfg.max_complexity = options.max_complexity;
    cfg.random_seeding = options.random_seeding;
    cfg.seed = options.seed;
    const auto result = reduce(ctx, cfg);
    const Reduction& r = result.reduction;
    row.ok = true;
    row.error = r.final_error;
    row.nrmse = options.error_metric == ErrorMetric::NRMSE ? r.final_error
                                                            : nrmse(ctx.dataset(), reconstruct(ctx.dataset(), r));
    row.storage_ratio = r.final_storage_ratio;
    row.regions = static_cast<int>(r.regions.size());
    row.models = static_cast<int>(r.models.size());
    row.clusters = result.clusters;
    row.iterations = static_cast<int>(result.history.size()) - 1;
    for (const auto& m : r.models) row.max_model_complexity = std::max(row.max_model_complexity, m.complexity);
    if (!result.warnings.empty()) row.message = result.warnings.front();
  } catch (const std::exception& e) {
    row.ok = false;
    row.message = e.what();
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<SweepRow> sweep(const ReductionContext& ctx, const std::vector<SweepCell>& grid, const SweepOptions& options) {
  std::vector<SweepRow> rows(grid.size());
  const int jobs = std::clamp(options.jobs, 1, std::max<int>(1, static_cast<int>(grid.size())));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < grid.size();) rows[i] = run_cell(ctx, grid[i], options);
  };
  if (jobs == 1) {
    worker();
    return rows;
  }
  std::vector<std::jthread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  pool.clear();
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "alpha,technique,link,nrmse,error,storage_ratio,regions,models,clusters,iterations,max_complexity,seconds,"
         "status,message\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.cell.alpha << ',' << to_string(r.cell.technique) << ',' << to_string(r.cell.link_mode) << ',';
    if (r.ok)
      out << r.nrmse << ',' << r.error << ',' << r.storage_ratio << ',' << r.regions << ',' << r.models << ','
          << r.clusters << ',' << r.iterations << ',' << r.max_model_complexity << ',';
    else
      out << ",,,,,,,,";
    out << r.seconds << ',' << (r.ok ? "ok" : "error") << ',' << csv_field(r.message) << '\n';
  }
}

std::vector<std::uint8_t> canonical_bytes(const Dataset& d) {
  std::vector<std::uint8_t> out;
  out.reserve(d.size() * (8 + 8 * d.num_features()));
  auto put = [&](const auto& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(v));
  };
  for (std::size_t i = 0; i < d.size(); ++i) {
    put(static_cast<std::int32_t>(d.key(i).timestep));
    put(static_cast<std::int32_t>(d.key(i).sensor));
    for (double v : d.values(i)) put(v);
  }
  return out;
}

DeflateReport deflate_baseline(const Dataset& d) {
  const auto raw = canonical_bytes(d);
  DeflateReport rep;
  rep.raw_bytes = raw.size();
  if (raw.empty()) return rep;
  uLongf size = compressBound(raw.size());
  std::vector<Bytef> buf(size);
  if (compress2(buf.data(), &size, raw.data(), raw.size(), Z_BEST_COMPRESSION) != Z_OK)
    throw Error(ErrorCode::IoError, "DEFLATE compression failed");
  rep.compressed_bytes = size;
  rep.ratio = static_cast<double>(size) / static_cast<double>(raw.size());
  return rep;
}

}  // namespace kdstr
