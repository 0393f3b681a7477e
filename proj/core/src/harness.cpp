#include "dq/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "dq/checkpoint.hpp"
#include "dq/json_io.hpp"
#include "dq/util.hpp"

namespace dq {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("I/O failure while writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> method_names(const std::vector<Method>& methods) {
  std::vector<std::string> out;
  for (auto m : methods) out.push_back(to_string(m));
  return out;
}

std::string cell_name(Method method, std::size_t m, std::uint64_t seed) {
  return to_string(method) + "_m" + std::to_string(m) + "_s" + std::to_string(seed);
}

}  // namespace

// --- configuration --------------------------------------------------------------

ModelConfig default_sweep_model() {
  ModelConfig m;
  m.learning_rate = 0.5;
  m.momentum = 0.9;
  m.id_lr_scale = 50.0;
  return m;
}

void RunConfig::validate() const {
  gen.validate();
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("RunConfig: " + what);
  };
  require(!methods.empty(), "methods must not be empty");
  require(!seeds.empty(), "seeds must not be empty");
  require(!group_counts.empty(), "group_counts must not be empty");
  for (auto m : group_counts) require(m >= 1, "group counts must be >= 1");
  require(train_size >= 1, "train_size must be >= 1");
  require(test_size >= 2, "test_size must be >= 2");
  require(diagnostic_groups >= 1, "diagnostic_groups must be >= 1");
  for (const auto& [method, lr] : learning_rates) {
    require(std::isfinite(lr) && lr > 0, "learning_rates." + to_string(method) + " must be > 0");
  }
}

json to_json(const RunConfig& c) {
  json lrs = json::object();
  for (const auto& [method, lr] : c.learning_rates) lrs[to_string(method)] = lr;
  return json{{"gen", c.gen},
              {"model", c.model},
              {"methods", method_names(c.methods)},
              {"group_counts", c.group_counts},
              {"train_size", c.train_size},
              {"test_size", c.test_size},
              {"seeds", c.seeds},
              {"output_dir", c.output_dir.string()},
              {"min_group_samples", c.min_group_samples},
              {"wlr_mode", to_string(c.wlr_mode)},
              {"tower_dims", c.tower_dims},
              {"learning_rates", lrs},
              {"diagnostic_groups", c.diagnostic_groups},
              {"xauc_pairs", c.xauc_pairs},
              {"quantile_grid", c.quantile_grid},
              {"record_wall_time", c.record_wall_time}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  if (j.contains("gen")) j.at("gen").get_to(c.gen);
  if (j.contains("model")) j.at("model").get_to(c.model);
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
  }
  if (j.contains("group_counts")) j.at("group_counts").get_to(c.group_counts);
  if (j.contains("train_size")) j.at("train_size").get_to(c.train_size);
  if (j.contains("test_size")) j.at("test_size").get_to(c.test_size);
  if (j.contains("seeds")) j.at("seeds").get_to(c.seeds);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("min_group_samples")) j.at("min_group_samples").get_to(c.min_group_samples);
  if (j.contains("wlr_mode")) c.wlr_mode = parse_wlr_mode(j.at("wlr_mode").get<std::string>());
  if (j.contains("tower_dims")) j.at("tower_dims").get_to(c.tower_dims);
  if (j.contains("learning_rates")) {
    c.learning_rates.clear();
    for (const auto& [name, lr] : j.at("learning_rates").items()) c.learning_rates[parse_method(name)] = lr.get<double>();
  }
  if (j.contains("diagnostic_groups")) j.at("diagnostic_groups").get_to(c.diagnostic_groups);
  if (j.contains("xauc_pairs")) j.at("xauc_pairs").get_to(c.xauc_pairs);
  if (j.contains("quantile_grid")) j.at("quantile_grid").get_to(c.quantile_grid);
  if (j.contains("record_wall_time")) j.at("record_wall_time").get_to(c.record_wall_time);
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::string RunConfig::hash() const {
  json j = to_json(*this);
  j.erase("output_dir");
  j.erase("record_wall_time");
  return hex64(fnv1a(j.dump()));
}

ModelConfig RunConfig::model_for(Method method, std::uint64_t model_seed) const {
  ModelConfig m = model;
  if (auto it = learning_rates.find(method); it != learning_rates.end()) m.learning_rate = it->second;
  m.seed = model_seed;
  return m;
}

PredictorOptions RunConfig::predictor_options() const {
  PredictorOptions o;
  o.min_group_samples = min_group_samples;
  o.wlr_mode = wlr_mode;
  o.tower_dims = tower_dims;
  return o;
}

SeedPlan seed_plan(std::uint64_t seed) {
  return SeedPlan{seed, derive_seed(seed, 0x7a11), derive_seed(seed, 0x7e57), derive_seed(seed, 0x30de1),
                  derive_seed(seed, 0xe7a1)};
}

GeneratedData generate_data(const RunConfig& c, std::uint64_t seed) {
  const SeedPlan plan = seed_plan(seed);
  GenConfig g = c.gen;
  g.seed = plan.world_seed;
  World world = generate_world(g);
  Dataset train = sample_logged_interactions(world, c.train_size, plan.train_seed);
  Dataset test = sample_unbiased_test(world, c.test_size, plan.test_seed);
  return GeneratedData{std::move(world), std::move(train), std::move(test)};
}

// --- generate -------------------------------------------------------------------

GenerateOutputs cmd_generate(const RunConfig& c, std::optional<std::uint64_t> seed) {
  c.validate();
  const std::uint64_t s = seed.value_or(c.seeds.front());
  GeneratedData data = generate_data(c, s);
  fs::create_directories(c.output_dir);
  GenerateOutputs out{c.output_dir / "train.jsonl", c.output_dir / "test.jsonl", c.output_dir / "manifest.json"};
  save_dataset(data.train, out.train, FileFormat::kJsonl);
  save_dataset(data.test, out.test, FileFormat::kJsonl);
  json manifest{{"config_hash", c.hash()},
                {"seed", s},
                {"schema", data.train.schema},
                {"schema_hash", hex64(data.train.schema.hash())},
                {"gen", data.world.config},
                {"train_file", "train.jsonl"},
                {"test_file", "test.jsonl"},
                {"train_rows", data.train.size()},
                {"test_rows", data.test.size()},
                {"train_fingerprint", hex64(fingerprint(data.train))},
                {"test_fingerprint", hex64(fingerprint(data.test))}};
  write_text(out.manifest, manifest.dump(2) + "\n");
  return out;
}

namespace {

std::optional<Schema> manifest_schema(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) return std::nullopt;
  return json::parse(read_text(manifest)).at("schema").get<Schema>();
}

std::optional<std::uint64_t> manifest_seed(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) return std::nullopt;
  return json::parse(read_text(manifest)).at("seed").get<std::uint64_t>();
}

Dataset load_with_manifest(const fs::path& path, const std::optional<Schema>& schema) {
  const FileFormat fmt = format_from_extension(path);
  return schema ? load_dataset(path, fmt, *schema) : load_dataset(path, fmt);
}

}  // namespace

// --- train ----------------------------------------------------------------------

fs::path cmd_train(const RunConfig& c, Method method, std::size_t m, const fs::path& data_dir) {
  c.validate();
  const fs::path dir = data_dir.empty() ? c.output_dir : data_dir;
  const Dataset train = load_with_manifest(dir / "train.jsonl", manifest_schema(dir));
  const std::uint64_t seed = manifest_seed(dir).value_or(c.seeds.front());
  const Predictor p =
      train_predictor(method, train, m, c.model_for(method, seed_plan(seed).model_seed), c.predictor_options());
  fs::create_directories(c.output_dir);
  const fs::path out = c.output_dir / (to_string(method) + "_m" + std::to_string(m) + ".d2qc");
  CheckpointOptions opts;
  opts.config_hash = c.hash();
  opts.quantile_grid = c.quantile_grid;
  save_checkpoint(p, out, opts);
  return out;
}

// --- eval -----------------------------------------------------------------------

namespace {

EvalReport evaluate_predictor(const RunConfig& c, const Predictor& p, const Dataset& test, std::uint64_t seed) {
  const auto preds = predict_all(p, test);
  const auto truth = test.watch_times();
  const auto durations = test.durations();
  const auto users = test.user_ids();
  const DurationGroups diag = fit_duration_groups(durations, std::min(c.diagnostic_groups, test.size()));
  EvalReport r = evaluate(preds, truth, durations, users, diag, seed, c.xauc_pairs);
  r.method = to_string(p.kind);
  r.m = uses_duration_groups(p.kind) ? p.groups.m : 1;
  return r;
}

}  // namespace

EvalOutputs cmd_eval(const RunConfig& c, const fs::path& checkpoint, const fs::path& test_path) {
  const Predictor p = load_checkpoint(checkpoint);
  const auto declared = manifest_schema(test_path.parent_path().empty() ? fs::path(".") : test_path.parent_path());
  const Dataset test = load_with_manifest(test_path, declared ? declared : std::optional<Schema>(p.schema));
  if (test.schema.hash() != p.schema.hash()) {
    throw std::runtime_error("schema mismatch: checkpoint schema " + hex64(p.schema.hash()) +
                             " vs test set schema " + hex64(test.schema.hash()));
  }
  const std::uint64_t seed = seed_plan(manifest_seed(test_path.parent_path()).value_or(c.seeds.front())).eval_seed;
  EvalOutputs out;
  out.report = evaluate_predictor(c, p, test, seed);
  fs::create_directories(c.output_dir);
  const std::string stem = "eval_" + out.report.method + "_m" + std::to_string(out.report.m);
  out.json_path = c.output_dir / (stem + ".json");
  out.csv_path = c.output_dir / (stem + ".csv");
  write_text(out.json_path, report_to_json(out.report) + "\n");
  write_text(out.csv_path, report_csv_header() + "\n" + report_csv_row(out.report) + "\n");
  return out;
}

// --- sweep ----------------------------------------------------------------------

std::vector<std::pair<Method, std::size_t>> sweep_cells(const RunConfig& c) {
  std::vector<std::pair<Method, std::size_t>> cells;
  for (auto m : c.group_counts) {
    for (auto method : c.methods) {
      const bool grouped = uses_duration_groups(method);
      if (!grouped && m != 1) continue;
      // With a single group every sample gets the same duration adjustment,
      // so Res-D2Q coincides with D2Q there and is not run.
      if (method == Method::kResD2q && m == 1) continue;
      cells.emplace_back(method, m);
    }
  }
  return cells;
}

namespace {

json row_to_json(const SweepRow& r, const std::string& config_hash) {
  return json{{"config_hash", config_hash},
              {"method", to_string(r.method)},
              {"m", r.m},
              {"seed", r.seed},
              {"ok", r.ok},
              {"error", r.error},
              {"wall_time_s", r.wall_time_s},
              {"report", r.ok ? json::parse(report_to_json(r.report)) : json(nullptr)}};
}

std::optional<SweepRow> row_from_cache(const fs::path& path, const std::string& config_hash) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    const json j = json::parse(read_text(path));
    if (j.at("config_hash").get<std::string>() != config_hash) return std::nullopt;
    SweepRow r;
    r.method = parse_method(j.at("method").get<std::string>());
    r.m = j.at("m").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.ok = j.at("ok").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    if (r.ok) {
      r.report = report_from_json(j.at("report").dump());
      r.mae = r.report.mae;
      r.xauc = r.report.xauc;
      r.xgauc = r.report.xgauc;
    }
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

SweepResult cmd_sweep(const RunConfig& c) {
  c.validate();
  const std::string hash = c.hash();
  const fs::path cells_dir = c.output_dir / "cells";
  fs::create_directories(cells_dir);
  const auto cells = sweep_cells(c);

  SweepResult result;
  for (std::uint64_t seed : c.seeds) {
    std::optional<GeneratedData> data;
    const SeedPlan plan = seed_plan(seed);
    for (const auto& [method, m] : cells) {
      const fs::path cell_path = cells_dir / (cell_name(method, m, seed) + ".json");
      if (auto cached = row_from_cache(cell_path, hash)) {
        result.rows.push_back(std::move(*cached));
        continue;
      }
      if (!data) data = generate_data(c, seed);

      SweepRow row;
      row.method = method;
      row.m = m;
      row.seed = seed;
      const auto start = std::chrono::steady_clock::now();
      try {
        const Predictor p =
            train_predictor(method, data->train, m, c.model_for(method, plan.model_seed), c.predictor_options());
        row.report = evaluate_predictor(c, p, data->test, plan.eval_seed);
        row.mae = row.report.mae;
        row.xauc = row.report.xauc;
        row.xgauc = row.report.xgauc;
        row.ok = true;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
      row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::clog << "[sweep] " << cell_name(method, m, seed) << (row.ok ? " xgauc=" + std::to_string(row.xgauc) : " FAILED: " + row.error)
                << " (" << row.wall_time_s << " s)\n";
      write_text(cell_path, row_to_json(row, hash).dump(2) + "\n");
      result.rows.push_back(std::move(row));
    }
  }

  result.results_csv = c.output_dir / "results.csv";
  result.summary_md = c.output_dir / "summary.md";
  result.chart_svg = c.output_dir / "xgauc_vs_groups.svg";
  write_text(result.results_csv, results_csv(result.rows, c.record_wall_time));
  write_text(result.summary_md, summary_markdown(result.rows));
  write_text(result.chart_svg, xgauc_chart_svg(result.rows));

  std::ostringstream timings;
  timings << "method,m,seed,wall_time_s\n";
  for (const auto& r : result.rows) {
    timings << to_string(r.method) << ',' << r.m << ',' << r.seed << ',' << r.wall_time_s << '\n';
  }
  write_text(c.output_dir / "timings.csv", timings.str());
  return result;
}

}  // namespace dq
