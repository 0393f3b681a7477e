#pragma once

// Experiment harness behind the `dq` command-line tool: configuration,
// dataset generation, training, evaluation and group-count sweeps.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dq/metrics.hpp"
#include "dq/model.hpp"
#include "dq/predictors.hpp"
#include "dq/synthgen.hpp"

namespace dq {

// Sweep-tuned training defaults: plain SGD at 0.05 barely moves the id tables
// within 5 epochs.
ModelConfig default_sweep_model();

struct RunConfig {
  GenConfig gen;
  ModelConfig model = default_sweep_model();
  std::vector<Method> methods{Method::kVr, Method::kWlr, Method::kD2q, Method::kResD2q};
  std::vector<std::size_t> group_counts{1, 4, 8, 16, 32, 64, 256};
  std::size_t train_size = 200'000;
  std::size_t test_size = 40'000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::filesystem::path output_dir = "out";

  std::size_t min_group_samples = kDefaultMinGroupSamples;
  WlrMode wlr_mode = WlrMode::kAdapted;
  std::vector<std::size_t> tower_dims{16, 16};
  // Per-method overrides of model.learning_rate. VR regresses raw seconds, so
  // its gradients are orders of magnitude larger than the [0, 1] targets'.
  std::map<Method, double> learning_rates{{Method::kVr, 2e-5}, {Method::kWlr, 0.05}};
  // Equal-frequency groups over test durations for the per-group diagnostic.
  std::size_t diagnostic_groups = 10;
  // Sampled XAUC pair count; 0 picks min(10 n, 1e7).
  std::size_t xauc_pairs = 0;
  // Checkpoint CDF storage; 0 = automatic.
  std::size_t quantile_grid = 0;
  // Wall-clock time is nondeterministic; results.csv only carries it when set.
  bool record_wall_time = false;

  void validate() const;
  // Hash of every field that influences results (excludes output_dir and
  // record_wall_time).
  std::string hash() const;
  PredictorOptions predictor_options() const;
  // model with the method's learning-rate override and the given seed.
  ModelConfig model_for(Method method, std::uint64_t model_seed) const;
};

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Per-seed stream derivation shared by generate and sweep.
struct SeedPlan {
  std::uint64_t world_seed;
  std::uint64_t train_seed;
  std::uint64_t test_seed;
  std::uint64_t model_seed;
  std::uint64_t eval_seed;
};
SeedPlan seed_plan(std::uint64_t seed);

struct GeneratedData {
  World world;
  Dataset train;
  Dataset test;
};
GeneratedData generate_data(const RunConfig& c, std::uint64_t seed);

// --- subcommands ---------------------------------------------------------------

struct GenerateOutputs {
  std::filesystem::path train;
  std::filesystem::path test;
  std::filesystem::path manifest;
};
// Writes train.jsonl (biased log), test.jsonl (unbiased) and manifest.json.
GenerateOutputs cmd_generate(const RunConfig& c, std::optional<std::uint64_t> seed = std::nullopt);

// Trains on <data_dir>/train.jsonl and writes <output_dir>/<method>_m<m>.d2qc.
std::filesystem::path cmd_train(const RunConfig& c, Method method, std::size_t m,
                                const std::filesystem::path& data_dir = {});

struct EvalOutputs {
  EvalReport report;
  std::filesystem::path json_path;
  std::filesystem::path csv_path;
};
// Evaluates a checkpoint on a test file; refuses schema mismatches.
EvalOutputs cmd_eval(const RunConfig& c, const std::filesystem::path& checkpoint,
                     const std::filesystem::path& test_path);

struct SweepRow {
  Method method = Method::kD2q;
  std::size_t m = 1;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double mae = 0.0;
  double xauc = 0.0;
  double xgauc = 0.0;
  double wall_time_s = 0.0;
  EvalReport report;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::filesystem::path results_csv;
  std::filesystem::path summary_md;
  std::filesystem::path chart_svg;
};

// Every (method, m, seed) cell requested; VR/WLR only run at m = 1 and
// Res-D2Q only at m > 1. Each cell's outputs live in <output_dir>/cells and
// are reused when present with a matching config hash.
SweepResult cmd_sweep(const RunConfig& c);

// Cells the sweep schedules, in output order.
std::vector<std::pair<Method, std::size_t>> sweep_cells(const RunConfig& c);

// --- reports --------------------------------------------------------------------

std::string results_csv(const std::vector<SweepRow>& rows, bool with_wall_time);
std::string summary_markdown(const std::vector<SweepRow>& rows);
std::string xgauc_chart_svg(const std::vector<SweepRow>& rows);

struct MethodCurve {
  Method method;
  std::vector<std::size_t> m;
  std::vector<double> mean_xgauc;
  std::vector<double> mean_xauc;
  std::vector<double> mean_mae;
};
// Seed-averaged metrics per method and group count (successful cells only).
std::vector<MethodCurve> aggregate(const std::vector<SweepRow>& rows);

}  // namespace dq
