#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kdstr/bench.hpp"
#include "kdstr/metrics.hpp"
#include "kdstr/reduction.hpp"

using nlohmann::json;
using namespace kdstr;

namespace {

constexpr const char* kStatsSchema = "kdstr.stats/1";

enum Exit { kOk = 0, kConfigError = 2, kDataError = 3 };

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidParams:
    case ErrorCode::OutOfRange:
    case ErrorCode::TechniqueCannotImpute:
      return kConfigError;
    default:
      return kDataError;
  }
}

struct Options {
  std::string input;
  std::string output;
  std::string data;
  double alpha = 0.5;
  std::string technique = "plr";
  std::string link = "region";
  std::string metric = "nrmse";
  std::uint64_t seed = 0;
  bool random_seeding = false;
  int jobs = 1;
  int max_complexity = 32;
  int max_iterations = 10'000;
  std::string dump_partitions;
  std::string dump_dendrogram;
  bool json_output = false;

  std::string time_column = "time";
  std::vector<std::string> coord_columns{"x", "y"};
  std::vector<std::string> feature_columns;
  std::vector<std::string> ignore_columns{"sensor", "sensor_id", "id"};

  std::vector<double> alphas = kDefaultAlphas;
  std::vector<std::string> techniques{"plr", "dct", "dtr"};
  std::vector<std::string> links{"region", "cluster"};

  std::string time;
  std::vector<double> location;

  std::string archetype = "continuous";
  SyntheticParams synthetic;
};

CsvSchema schema_of(const Options& o) {
  CsvSchema s;
  s.time_column = o.time_column;
  s.coord_columns = o.coord_columns;
  s.feature_columns = o.feature_columns;
  s.ignore_columns = o.ignore_columns;
  return s;
}

ReductionConfig config_of(const Options& o) {
  ReductionConfig c;
  c.alpha = o.alpha;
  c.technique = parse_technique(o.technique);
  c.link_mode = parse_link_mode(o.link);
  c.error_metric = parse_error_metric(o.metric);
  c.max_complexity = o.max_complexity;
  c.max_iterations = o.max_iterations;
  c.random_seeding = o.random_seeding;
  c.seed = o.seed;
  return c;
}

bool has_zero(const Dataset& d) {
  for (double v : d.raw_values())
    if (v == 0.0) return true;
  return false;
}

json errors_of(const Dataset& d, const Dataset& dp) {
  const auto rep = nrmse_report(d, dp);
  json e{{"nrmse", rep.value}, {"nrmse_excluded_features", rep.excluded_features}};
  e["mape"] = has_zero(d) ? json(nullptr) : json(mape(d, dp));
  return e;
}

json outline_json(const Region& r, int dims) {
  json pts = json::array();
  for (const auto& p : r.outline) pts.push_back(dims == 1 ? json::array({p.x}) : json::array({p.x, p.y}));
  return pts;
}

json level_json(const PartitionLevel& level, int dims) {
  json regions = json::array();
  for (const auto& r : level.regions)
    regions.push_back({{"id", r.id},
                       {"cluster", r.cluster},
                       {"t_begin", r.t_begin},
                       {"t_end", r.t_end},
                       {"sensors", r.sensors},
                       {"outline", outline_json(r, dims)}});
  return {{"k", level.k}, {"regions", std::move(regions)}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << text << '\n';
}

void write_reduction_file(const std::string& path, const Reduction& r, bool as_json) {
  if (as_json)
    write_text(path, to_json(r, 1));
  else
    write_reduction(path, r);
}

Reduction read_reduction_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (!bytes.empty() && bytes.front() == '{') return from_json(bytes);
  return deserialize(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

const char* step_name(StepKind k) {
  switch (k) {
    case StepKind::Initialize: return "initialize";
    case StepKind::Complexity: return "complexity";
    case StepKind::Partition: return "partition";
  }
  return "?";
}

int cmd_reduce(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset d = load_csv(o.input, schema_of(o));
  const ReductionConfig cfg = config_of(o);
  cfg.validate(d);
  const ReductionContext ctx(d);
  const auto result = reduce(ctx, cfg);
  const Reduction& r = result.reduction;
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.output.empty()) write_reduction_file(o.output, r, o.json_output);

  if (!o.dump_partitions.empty()) {
    json levels = json::array();
    GrowthOptions g;
    g.random_seeding = cfg.random_seeding;
    g.seed = cfg.seed;
    for (int k = 1; k <= result.clusters; ++k) levels.push_back(level_json(*ctx.level(k, g), d.spatial_dims()));
    write_text(o.dump_partitions, json{{"levels", std::move(levels)}}.dump(1));
  }
  if (!o.dump_dendrogram.empty()) {
    json merges = json::array();
    for (const auto& m : ctx.tree().merges)
      merges.push_back({{"node", m.node}, {"a", m.child_a}, {"b", m.child_b}, {"height", m.height}, {"size", m.size}});
    write_text(o.dump_dendrogram, json{{"leaves", ctx.tree().leaf_count}, {"merges", std::move(merges)}}.dump(1));
  }

  json history = json::array();
  for (const auto& h : result.history)
    history.push_back({{"iteration", h.iteration},
                       {"step", step_name(h.kind)},
                       {"h", h.h},
                       {"error", h.error},
                       {"storage_ratio", h.storage_ratio},
                       {"clusters", h.clusters},
                       {"regions", h.regions},
                       {"models", h.models}});
  json stats{{"schema", kStatsSchema},
             {"command", "reduce"},
             {"instances", d.size()},
             {"sensors", d.num_sensors()},
             {"timesteps", d.num_timesteps()},
             {"features", d.num_features()},
             {"regions", r.regions.size()},
             {"models", r.models.size()},
             {"clusters", result.clusters},
             {"alpha", r.alpha},
             {"technique", to_string(r.technique)},
             {"link", to_string(r.link_mode)},
             {"metric", to_string(r.error_metric)},
             {"objective", result.history.back().h},
             {"error", errors_of(d, reconstruct(d, r))},
             {"storage", {{"original_units", result.original_units},
                          {"reduced_units", result.reduced_units},
                          {"ratio", r.final_storage_ratio}}},
             {"iterations", static_cast<int>(result.history.size()) - 1},
             {"wall_seconds", seconds},
             {"warnings", result.warnings},
             {"history", std::move(history)}};
  std::cout << stats.dump(2) << '\n';
  return kOk;
}

int cmd_sweep(const Options& o) {
  const Dataset d = load_csv(o.input, schema_of(o));
  SweepOptions so;
  so.error_metric = parse_error_metric(o.metric);
  so.max_complexity = o.max_complexity;
  so.random_seeding = o.random_seeding;
  so.seed = o.seed;
  so.jobs = o.jobs;
  std::vector<SweepCell> grid;
  for (double a : o.alphas)
    for (const auto& t : o.techniques)
      for (const auto& l : o.links) grid.push_back({a, parse_technique(t), parse_link_mode(l)});
  for (const auto& c : grid)
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw Error(ErrorCode::InvalidConfig, "alpha must lie in [0, 1]");
  const ReductionContext ctx(d);
  const auto rows = sweep(ctx, grid, so);
  if (o.output.empty()) {
    write_sweep_csv(std::cout, rows);
  } else {
    std::ofstream out(o.output);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + o.output + "'");
    write_sweep_csv(out, rows);
  }
  return kOk;
}

int cmd_impute(const Options& o) {
  const Reduction r = read_reduction_file(o.input);
  const double t = parse_time(o.time);
  const auto v = impute(r, t, o.location);
  json values;
  for (std::size_t f = 0; f < v.size(); ++f) values[r.feature_names[f]] = v[f];
  std::cout << json{{"time", t}, {"location", o.location}, {"values", values}}.dump(2) << '\n';
  return kOk;
}

int cmd_reconstruct(const Options& o) {
  const Reduction r = read_reduction_file(o.input);
  const Dataset d = load_csv(o.data, schema_of(o));
  const Dataset dp = reconstruct(d, r);
  if (o.output.empty()) {
    write_csv(std::cout, dp);
  } else {
    std::ofstream out(o.output);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + o.output + "'");
    write_csv(out, dp);
    std::cout << json{{"schema", kStatsSchema}, {"command", "reconstruct"}, {"instances", d.size()},
                      {"error", errors_of(d, dp)}}
                     .dump(2)
              << '\n';
  }
  return kOk;
}

int cmd_stats(const Options& o) {
  const Reduction r = read_reduction_file(o.input);
  json stats{{"schema", kStatsSchema},
             {"command", "stats"},
             {"regions", r.regions.size()},
             {"models", r.models.size()},
             {"alpha", r.alpha},
             {"technique", to_string(r.technique)},
             {"link", to_string(r.link_mode)},
             {"metric", to_string(r.error_metric)},
             {"recorded_error", r.final_error},
             {"recorded_storage_ratio", r.final_storage_ratio},
             {"storage", {{"reduced_units", reduction_storage(r, r.k())}}}};
  if (!o.data.empty()) {
    const Dataset d = load_csv(o.data, schema_of(o));
    stats["instances"] = d.size();
    stats["storage"]["original_units"] = dataset_storage(d);
    stats["storage"]["ratio"] = storage_ratio(d, r);
    stats["error"] = errors_of(d, reconstruct(d, r));
    stats["objective"] = objective(d, r);
  }
  std::cout << stats.dump(2) << '\n';
  return kOk;
}

int cmd_gen(const Options& o) {
  const Dataset d = gen_synthetic(parse_archetype(o.archetype), o.synthetic, o.seed);
  if (o.output.empty()) {
    write_csv(std::cout, d);
    return kOk;
  }
  std::ofstream out(o.output);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + o.output + "'");
  write_csv(out, d);
  return kOk;
}

int cmd_baseline(const Options& o) {
  const Dataset d = load_csv(o.input, schema_of(o));
  const auto rep = deflate_baseline(d);
  const auto result = reduce(d, config_of(o));
  json out{{"schema", kStatsSchema},
           {"command", "baseline"},
           {"instances", d.size()},
           {"deflate", {{"raw_bytes", rep.raw_bytes}, {"compressed_bytes", rep.compressed_bytes}, {"ratio", rep.ratio}}},
           {"reduction", {{"alpha", o.alpha},
                          {"technique", o.technique},
                          {"link", o.link},
                          {"original_units", result.original_units},
                          {"reduced_units", result.reduced_units},
                          {"ratio", result.reduction.final_storage_ratio},
                          {"error", result.reduction.final_error}}},
           {"note", "deflate ratio counts bytes of a canonical binary table; the reduction ratio counts stored "
                    "scalars. The two bases are not directly comparable."}};
  std::cout << out.dump(2) << '\n';
  return kOk;
}

void add_schema_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--time-column", o.time_column, "CSV column holding the timestamp")->capture_default_str();
  cmd->add_option("--coord-columns", o.coord_columns, "CSV columns holding sensor coordinates")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--features", o.feature_columns, "feature columns (default: all other columns)")->delimiter(',');
  cmd->add_option("--ignore", o.ignore_columns, "columns to skip")->delimiter(',')->capture_default_str();
}

void add_reduce_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--alpha", o.alpha, "storage/error weight in [0, 1]")->capture_default_str();
  cmd->add_option("--technique", o.technique, "plr, dct or dtr")->capture_default_str();
  cmd->add_option("--link", o.link, "region or cluster")->capture_default_str();
  cmd->add_option("--metric", o.metric, "nrmse or mape")->capture_default_str();
  cmd->add_option("--seed", o.seed, "seed for random region seeding")->capture_default_str();
  cmd->add_flag("--random-seeding", o.random_seeding, "seed regions from random instances");
  cmd->add_option("--max-complexity", o.max_complexity, "largest model complexity")->capture_default_str();
  cmd->add_option("--max-iterations", o.max_iterations, "iteration limit")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal sensor data reduction"};
  app.require_subcommand(1);
  Options o;

  auto* reduce_cmd = app.add_subcommand("reduce", "reduce a CSV dataset and print a stats record");
  reduce_cmd->add_option("--input", o.input, "input CSV")->required();
  reduce_cmd->add_option("--output", o.output, "reduction file to write");
  reduce_cmd->add_flag("--json", o.json_output, "write the reduction as JSON instead of binary");
  reduce_cmd->add_option("--dump-partitions", o.dump_partitions, "write every partition level as JSON");
  reduce_cmd->add_option("--dump-dendrogram", o.dump_dendrogram, "write the cluster tree merges as JSON");
  add_reduce_flags(reduce_cmd, o);
  add_schema_flags(reduce_cmd, o);

  auto* sweep_cmd = app.add_subcommand("sweep", "run an alpha x technique x link grid, CSV out");
  sweep_cmd->add_option("--input", o.input, "input CSV")->required();
  sweep_cmd->add_option("--output", o.output, "CSV file (default stdout)");
  sweep_cmd->add_option("--alphas", o.alphas, "alpha values")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--techniques", o.techniques, "techniques")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--links", o.links, "link modes")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--jobs", o.jobs, "parallel reductions")->capture_default_str();
  sweep_cmd->add_option("--metric", o.metric, "nrmse or mape")->capture_default_str();
  sweep_cmd->add_option("--seed", o.seed, "seed for random region seeding")->capture_default_str();
  sweep_cmd->add_flag("--random-seeding", o.random_seeding, "seed regions from random instances");
  sweep_cmd->add_option("--max-complexity", o.max_complexity, "largest model complexity")->capture_default_str();
  add_schema_flags(sweep_cmd, o);

  auto* impute_cmd = app.add_subcommand("impute", "evaluate a reduction at an arbitrary time and place");
  impute_cmd->add_option("--input", o.input, "reduction file")->required();
  impute_cmd->add_option("--time", o.time, "number or ISO-8601 timestamp")->required();
  impute_cmd->add_option("--location", o.location, "coordinates, comma separated")->delimiter(',')->required();

  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "rebuild the dataset from a reduction");
  reconstruct_cmd->add_option("--input", o.input, "reduction file")->required();
  reconstruct_cmd->add_option("--data", o.data, "original CSV (supplies the instance keys)")->required();
  reconstruct_cmd->add_option("--output", o.output, "CSV file (default stdout)");
  add_schema_flags(reconstruct_cmd, o);

  auto* stats_cmd = app.add_subcommand("stats", "describe a reduction file");
  stats_cmd->add_option("--input", o.input, "reduction file")->required();
  stats_cmd->add_option("--data", o.data, "original CSV, to measure error and storage ratio");
  add_schema_flags(stats_cmd, o);

  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--archetype", o.archetype, "continuous, highTemporalVariance or eventDriven")
      ->capture_default_str();
  gen_cmd->add_option("--sensors", o.synthetic.sensors)->capture_default_str();
  gen_cmd->add_option("--timesteps", o.synthetic.timesteps)->capture_default_str();
  gen_cmd->add_option("--features", o.synthetic.features)->capture_default_str();
  gen_cmd->add_option("--noise", o.synthetic.noise)->capture_default_str();
  gen_cmd->add_option("--event-probability", o.synthetic.event_probability)->capture_default_str();
  gen_cmd->add_option("--seed", o.seed)->capture_default_str();
  gen_cmd->add_option("--output", o.output, "CSV file (default stdout)");

  auto* baseline_cmd = app.add_subcommand("baseline", "compare against lossless DEFLATE compression");
  baseline_cmd->add_option("--input", o.input, "input CSV")->required();
  add_reduce_flags(baseline_cmd, o);
  add_schema_flags(baseline_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (!e.get_exit_code()) return kOk;
    std::cerr << app.help();
    return kConfigError;
  }

  try {
    if (*reduce_cmd) return cmd_reduce(o);
    if (*sweep_cmd) return cmd_sweep(o);
    if (*impute_cmd) return cmd_impute(o);
    if (*reconstruct_cmd) return cmd_reconstruct(o);
    if (*stats_cmd) return cmd_stats(o);
    if (*gen_cmd) return cmd_gen(o);
    if (*baseline_cmd) return cmd_baseline(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}
