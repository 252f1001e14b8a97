#include "kdstr/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "kdstr/metrics.hpp"
#include "kdstr/modeling.hpp"

namespace kdstr {
namespace {

constexpr double kNoCandidate = std::numeric_limits<double>::infinity();

// Strict improvement, ignoring differences at the level of rounding noise.
bool improves(double candidate, double current) {
  return candidate < current - 1e-12 * std::max(1.0, std::abs(current));
}

struct FitEntry {
  ModelArtifact artifact;
  std::vector<double> sse;  // per feature, over the unit's instances
  double ape = 0.0;         // sum of absolute percentage errors
  std::int64_t cost = 0;
};
using EntryPtr = std::shared_ptr<const FitEntry>;

// The instances one model is fitted to: a region, or every region of a cluster.
struct Unit {
  std::string key;
  std::vector<int> regions;
  int cluster = 0;
};

struct State {
  std::shared_ptr<const PartitionLevel> level;
  std::vector<Unit> units;
  std::vector<EntryPtr> models;
};

struct Totals {
  std::vector<double> sse;
  double ape = 0.0;
  std::int64_t units = 0;
};

std::string block_key(const Region& r) {
  std::string key = std::to_string(r.t_begin) + ":" + std::to_string(r.t_end) + ":";
  for (int s : r.sensors) key += std::to_string(s) + ",";
  return key;
}

class Engine {
 public:
  Engine(const ReductionContext& ctx, const ReductionConfig& cfg) : ctx_(ctx), cfg_(cfg), d_(ctx.dataset()) {
    growth_.random_seeding = cfg.random_seeding;
    growth_.seed = cfg.seed;
    const int nf = d_.num_features();
    range_.assign(nf, 0.0);
    for (int f = 0; f < nf; ++f) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t i = 0; i < d_.size(); ++i) {
        lo = std::min(lo, d_.value(i, f));
        hi = std::max(hi, d_.value(i, f));
      }
      range_[f] = hi - lo;
    }
    storage_d_ = static_cast<double>(dataset_storage(d_));
  }

  ReduceResult run() {
    ReduceResult result;
    result.original_units = dataset_storage(d_);
    int k = 1;
    State state = make_state(ctx_.level(k, growth_), nullptr);
    double h = objective_of(totals(state));
    record(result, state, StepKind::Initialize, h, k, -1);

    int iteration = 0;
    while (true) {
      if (iteration >= cfg_.max_iterations) {
        result.warnings.push_back("iteration limit of " + std::to_string(cfg_.max_iterations) +
                                  " reached; returning the best reduction so far");
        break;
      }
      // (a) raise one model's complexity
      const Totals base = totals(state);
      double h1 = kNoCandidate;
      int best_unit = -1;
      EntryPtr best_entry;
      for (std::size_t u = 0; u < state.units.size(); ++u) {
        const auto& current = state.models[u]->artifact;
        if (current.saturated || current.complexity >= cfg_.max_complexity) continue;
        EntryPtr cand = entry(state.units[u], *state.level, current.complexity + 1);
        Totals t = base;
        for (std::size_t f = 0; f < t.sse.size(); ++f) t.sse[f] += cand->sse[f] - state.models[u]->sse[f];
        t.ape += cand->ape - state.models[u]->ape;
        t.units += cand->cost - state.models[u]->cost;
        const double hc = objective_of(t);
        if (hc < h1) {
          h1 = hc;
          best_unit = static_cast<int>(u);
          best_entry = std::move(cand);
        }
      }
      // (b) one more cluster
      double h2 = kNoCandidate;
      State refined;
      std::vector<std::uint64_t> persisted;
      if (k + 1 <= ctx_.tree().leaf_count) {
        refined = make_state(ctx_.level(k + 1, growth_), &state, &persisted);
        h2 = objective_of(totals(refined));
      }

      if (best_unit >= 0 && h1 <= h2 && improves(h1, h)) {
        state.models[best_unit] = std::move(best_entry);
        h = objective_of(totals(state));
        ++iteration;
        record(result, state, StepKind::Complexity, h, k, best_unit);
      } else if (improves(h2, h)) {
        state = std::move(refined);
        ++k;
        h = objective_of(totals(state));
        ++iteration;
        result.persisted_serials.push_back(std::move(persisted));
        record(result, state, StepKind::Partition, h, k, -1);
      } else {
        break;
      }
    }

    for (const auto& m : state.models)
      if (!m->artifact.saturated && m->artifact.complexity >= cfg_.max_complexity) {
        result.warnings.push_back("a model reached the complexity limit of " + std::to_string(cfg_.max_complexity));
        break;
      }

    const Totals t = totals(state);
    Reduction& r = result.reduction;
    r.spatial_dims = d_.spatial_dims();
    r.feature_names = d_.feature_names();
    r.time_axis = ctx_.time_axis();
    r.technique = cfg_.technique;
    r.link_mode = cfg_.link_mode;
    r.error_metric = cfg_.error_metric;
    r.alpha = cfg_.alpha;
    r.regions = state.level->regions;
    r.region_model.assign(r.regions.size(), -1);
    for (std::size_t u = 0; u < state.units.size(); ++u) {
      r.models.push_back(state.models[u]->artifact);
      for (int rid : state.units[u].regions) r.region_model[rid] = static_cast<int>(u);
    }
    r.final_error = error_of(t);
    r.final_storage_ratio = static_cast<double>(t.units) / storage_d_;
    result.clusters = k;
    result.reduced_units = t.units;
    return result;
  }

 private:
  std::vector<Unit> units_for(const PartitionLevel& level) const {
    std::vector<Unit> units;
    if (cfg_.link_mode == LinkMode::PerRegion) {
      for (const auto& r : level.regions) units.push_back({block_key(r), {r.id}, r.cluster});
      return units;
    }
    std::unordered_map<int, std::size_t> by_cluster;
    for (const auto& r : level.regions) {
      auto [it, fresh] = by_cluster.emplace(r.cluster, units.size());
      if (fresh) units.push_back({"c" + std::to_string(r.cluster) + "|", {}, r.cluster});
      Unit& u = units[it->second];
      u.regions.push_back(r.id);
      u.key += block_key(r) + "|";
    }
    return units;
  }

  std::int64_t region_units(const PartitionLevel& level) const {
    std::int64_t units = 0;
    for (const auto& r : level.regions) units += region_storage_cost(r, d_.k());
    if (cfg_.link_mode == LinkMode::PerCluster) units += static_cast<std::int64_t>(level.regions.size());
    return units;
  }

  // Models persist for units whose instances and layout are unchanged;
  // every other unit starts at complexity 1.
  State make_state(std::shared_ptr<const PartitionLevel> level, const State* prev,
                   std::vector<std::uint64_t>* persisted = nullptr) {
    State s;
    s.level = std::move(level);
    s.units = units_for(*s.level);
    s.models.resize(s.units.size());
    std::unordered_map<std::string, EntryPtr> carried;
    if (prev) {
      if (cfg_.link_mode == LinkMode::PerRegion) {
        const Refinement ref = refine_level(*prev->level, *s.level);
        for (auto [old_id, new_id] : ref.kept) s.models[new_id] = prev->models[old_id];
      } else {
        for (std::size_t u = 0; u < prev->units.size(); ++u) carried.emplace(prev->units[u].key, prev->models[u]);
      }
    }
    for (std::size_t u = 0; u < s.units.size(); ++u) {
      if (!s.models[u]) {
        if (auto it = carried.find(s.units[u].key); it != carried.end()) s.models[u] = it->second;
      }
      if (s.models[u]) {
        if (persisted) persisted->push_back(s.models[u]->artifact.serial);
        continue;
      }
      s.models[u] = entry(s.units[u], *s.level, 1);
    }
    units_cache_[s.level.get()] = region_units(*s.level);
    return s;
  }

  const FitInput& input_for(const Unit& unit, const PartitionLevel& level) {
    auto it = inputs_.find(unit.key);
    if (it != inputs_.end()) return *it->second;
    std::vector<FitInput> parts;
    for (int rid : unit.regions) {
      const Region& r = level.regions[rid];
      std::vector<std::int64_t> idx;
      for (int t = r.t_begin; t <= r.t_end; ++t)
        for (int s : r.sensors)
          if (auto i = d_.find(t, s); i >= 0) idx.push_back(i);
      auto [lo, hi] = region_bounds(d_, r);
      parts.push_back(make_fit_input(d_, idx, std::move(lo), std::move(hi)));
    }
    auto in = std::make_shared<const FitInput>(parts.size() == 1 ? std::move(parts.front()) : concatenate(parts));
    return *inputs_.emplace(unit.key, std::move(in)).first->second;
  }

  EntryPtr entry(const Unit& unit, const PartitionLevel& level, int complexity) {
    const std::string key = unit.key + "#" + std::to_string(complexity);
    if (auto it = fits_.find(key); it != fits_.end()) return it->second;
    const FitInput& in = input_for(unit, level);
    auto e = std::make_shared<FitEntry>();
    e->artifact = fit(cfg_.technique, in, complexity);
    e->cost = model_storage_cost(e->artifact);
    const auto pred = predict_all(e->artifact, in);
    const int nf = in.num_features;
    e->sse.assign(nf, 0.0);
    for (std::size_t i = 0; i < in.size(); ++i)
      for (int f = 0; f < nf; ++f) {
        const double y = in.responses[i * nf + f];
        const double r = y - pred[i * nf + f];
        e->sse[f] += r * r;
        if (cfg_.error_metric == ErrorMetric::MAPE) e->ape += std::abs(r / y);
      }
    EntryPtr out = std::move(e);
    fits_.emplace(key, out);
    return out;
  }

  Totals totals(const State& s) const {
    Totals t;
    t.sse.assign(d_.num_features(), 0.0);
    t.units = units_cache_.at(s.level.get());
    for (const auto& m : s.models) {
      for (std::size_t f = 0; f < t.sse.size(); ++f) t.sse[f] += m->sse[f];
      t.ape += m->ape;
      t.units += m->cost;
    }
    return t;
  }

  double error_of(const Totals& t) const {
    const double n = static_cast<double>(d_.size());
    if (cfg_.error_metric == ErrorMetric::MAPE) return t.ape / (n * d_.num_features());
    double sum = 0.0;
    int counted = 0;
    for (std::size_t f = 0; f < t.sse.size(); ++f) {
      if (!(range_[f] > 0.0)) continue;
      sum += std::sqrt(std::max(0.0, t.sse[f]) / n) / range_[f];
      ++counted;
    }
    return counted ? sum / counted : 0.0;
  }

  double objective_of(const Totals& t) const {
    return objective(cfg_.alpha, static_cast<double>(t.units) / storage_d_, error_of(t));
  }

  void record(ReduceResult& result, const State& s, StepKind kind, double h, int k, int target) const {
    const Totals t = totals(s);
    IterationRecord rec;
    rec.iteration = static_cast<int>(result.history.size());
    rec.kind = kind;
    rec.h = h;
    rec.error = error_of(t);
    rec.storage_ratio = static_cast<double>(t.units) / storage_d_;
    rec.clusters = k;
    rec.regions = static_cast<int>(s.level->regions.size());
    rec.models = static_cast<int>(s.models.size());
    rec.target = target;
    result.history.push_back(rec);
  }

  const ReductionContext& ctx_;
  const ReductionConfig& cfg_;
  const Dataset& d_;
  GrowthOptions growth_;
  std::vector<double> range_;
  double storage_d_ = 0.0;
  std::unordered_map<const PartitionLevel*, std::int64_t> units_cache_;
  std::unordered_map<std::string, std::shared_ptr<const FitInput>> inputs_;
  std::unordered_map<std::string, EntryPtr> fits_;
};

}  // namespace

void ReductionConfig::validate(const Dataset& d) const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidConfig, "alpha must lie in [0, 1]");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidConfig, "max iterations must be at least 1");
  if (max_complexity < 1) throw Error(ErrorCode::InvalidConfig, "max complexity must be at least 1");
  if (error_metric == ErrorMetric::MAPE)
    for (double v : d.raw_values())
      if (v == 0.0) throw Error(ErrorCode::InvalidConfig, "MAPE is undefined for data containing zero values");
}

ReductionContext::ReductionContext(Dataset d, std::size_t instance_cap) : dataset_(std::move(d)) {
  if (dataset_.empty()) throw Error(ErrorCode::EmptyDataset, "cannot reduce an empty dataset");
  tree_ = build_cluster_tree(dataset_, instance_cap);
  cells_ = voronoi_cells(dataset_);
  graph_ = build_adjacency(dataset_, cells_);
  time_axis_.times = dataset_.times();
  time_axis_.boundaries = discretize_time(dataset_.times());
}

std::shared_ptr<const PartitionLevel> ReductionContext::level(int k, const GrowthOptions& options) const {
  const auto key = std::make_tuple(options.random_seeding, options.random_seeding ? options.seed : 0, k);
  std::lock_guard lock(mutex_);
  if (auto it = levels_.find(key); it != levels_.end()) return it->second;
  const auto labels = cut_tree(tree_, k);
  auto lvl = std::make_shared<const PartitionLevel>(grow_regions(dataset_, labels, graph_, cells_, options));
  levels_.emplace(key, lvl);
  return lvl;
}

double objective(double alpha, double storage_ratio, double error) {
  return alpha * storage_ratio + (1.0 - alpha) * error;
}

double objective(const Dataset& d, const Reduction& r) {
  const double e = error_metric(r.error_metric, d, reconstruct(d, r));
  return objective(r.alpha, storage_ratio(d, r), e);
}

ReduceResult reduce(const ReductionContext& ctx, const ReductionConfig& cfg) {
  cfg.validate(ctx.dataset());
  return Engine(ctx, cfg).run();
}

ReduceResult reduce(const Dataset& d, const ReductionConfig& cfg) {
  if (d.empty()) throw Error(ErrorCode::EmptyDataset, "cannot reduce an empty dataset");
  cfg.validate(d);
  const ReductionContext ctx(d);
  return Engine(ctx, cfg).run();
}

}  // namespace kdstr
