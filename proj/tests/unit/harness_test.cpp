#include "dq/harness.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "dq/checkpoint.hpp"
#include "dq/json_io.hpp"
#include "test_support.hpp"

namespace dq {
namespace {

using testing::scratch_dir;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_run(const std::filesystem::path& out) {
  RunConfig c;
  c.gen.n_users = 20;
  c.gen.n_videos = 200;
  c.gen.slate_size = 10;
  c.model.dense_embed_dim = 2;
  c.model.id_embed_total_dim = 8;
  c.model.duration_embed_dim = 2;
  c.model.projection_out_dim = 8;
  c.model.mlp_dims = {8, 4};
  c.model.epochs = 2;
  c.model.batch_size = 64;
  c.train_size = 2000;
  c.test_size = 400;
  c.seeds = {1};
  c.group_counts = {1, 4};
  c.output_dir = out;
  return c;
}

TEST(RunConfigJson, RoundTripAndHash) {
  RunConfig c = small_run("somewhere");
  c.learning_rates[Method::kD2q] = 0.25;
  const RunConfig back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.hash(), c.hash());

  RunConfig moved = c;
  moved.output_dir = "elsewhere";
  moved.record_wall_time = true;
  EXPECT_EQ(moved.hash(), c.hash());
  moved.learning_rates[Method::kVr] = 1e-6;
  EXPECT_NE(moved.hash(), c.hash());
}

TEST(RunConfigJson, PartialConfigKeepsDefaults) {
  const RunConfig c = run_config_from_json(nlohmann::json{{"train_size", 10}});
  EXPECT_EQ(c.train_size, 10u);
  EXPECT_EQ(c.group_counts, RunConfig{}.group_counts);
  EXPECT_EQ(nlohmann::json(c.model), nlohmann::json(default_sweep_model()));
}

TEST(RunConfigJson, RejectsInvalidValues) {
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"train_size", 0}}), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"methods", {"xgb"}}}), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"learning_rates", {{"vr", -1.0}}}}), std::invalid_argument);
  EXPECT_THROW(load_run_config(scratch_dir() / "missing.json"), std::runtime_error);
}

TEST(RunConfigModel, MethodOverridesLearningRate) {
  RunConfig c;
  c.learning_rates = {{Method::kVr, 1e-5}};
  EXPECT_EQ(c.model_for(Method::kVr, 9).learning_rate, 1e-5);
  EXPECT_EQ(c.model_for(Method::kD2q, 9).learning_rate, c.model.learning_rate);
  EXPECT_EQ(c.model_for(Method::kD2q, 9).seed, 9u);
}

TEST(Generate, WritesFilesAndManifestDeterministically) {
  const auto dir = scratch_dir();
  const RunConfig c = small_run(dir);
  const auto out = cmd_generate(c);
  ASSERT_TRUE(std::filesystem::exists(out.train));
  ASSERT_TRUE(std::filesystem::exists(out.test));
  const std::string train = slurp(out.train), test = slurp(out.test), manifest = slurp(out.manifest);
  cmd_generate(c);
  EXPECT_EQ(slurp(out.train), train);
  EXPECT_EQ(slurp(out.test), test);
  EXPECT_EQ(slurp(out.manifest), manifest);
  const auto m = nlohmann::json::parse(manifest);
  EXPECT_EQ(m.at("config_hash"), c.hash());
  EXPECT_EQ(m.at("train_rows"), 2000);
  EXPECT_EQ(m.at("test_rows"), 400);
}

TEST(Generate, ZeroTrainSizeIsRejected) {
  RunConfig c = small_run(scratch_dir());
  c.train_size = 0;
  EXPECT_THROW(cmd_generate(c), std::invalid_argument);
}

TEST(Train, D2qCheckpointLoadsAndPredicts) {
  const auto dir = scratch_dir();
  const RunConfig c = small_run(dir);
  const auto gen = cmd_generate(c);
  const auto path = cmd_train(c, Method::kD2q, 8);
  const std::string bytes = slurp(path);
  EXPECT_EQ(slurp(cmd_train(c, Method::kD2q, 8)), bytes);

  const Predictor p = load_checkpoint(path);
  Dataset test = load_dataset(gen.test, FileFormat::kJsonl, p.schema);
  test.records.resize(100);
  for (double w : predict_all(p, test)) EXPECT_TRUE(std::isfinite(w));
}

TEST(Train, WlrRejectsGroups) {
  const auto dir = scratch_dir();
  const RunConfig c = small_run(dir);
  cmd_generate(c);
  try {
    cmd_train(c, Method::kWlr, 10);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "m>1 invalid for wlr");
  }
}

TEST(Eval, ReportFilesRoundTrip) {
  const auto dir = scratch_dir();
  const RunConfig c = small_run(dir);
  const auto gen = cmd_generate(c);
  const auto out = cmd_eval(c, cmd_train(c, Method::kD2q, 4), gen.test);
  EXPECT_EQ(out.report.method, "d2q");
  EXPECT_EQ(out.report.m, 4u);
  EXPECT_EQ(out.report.n, 400u);
  EXPECT_EQ(report_from_json(slurp(out.json_path)), out.report);
  EXPECT_EQ(slurp(out.csv_path), report_csv_header() + "\n" + report_csv_row(out.report) + "\n");
}

TEST(Eval, SchemaMismatchIsRefused) {
  const auto dir = scratch_dir();
  RunConfig c = small_run(dir / "a");
  cmd_generate(c);
  const auto ckpt = cmd_train(c, Method::kD2q, 1);
  RunConfig other = small_run(dir / "b");
  other.gen.n_videos = 150;
  const auto gen = cmd_generate(other);
  EXPECT_THROW(cmd_eval(c, ckpt, gen.test), std::exception);
}

TEST(Eval, OracleCeilingOnNoiseFreeData) {
  RunConfig c = small_run(scratch_dir());
  c.gen.noise_sd = 0.0;
  const GeneratedData data = generate_data(c, 1);
  std::vector<double> truth;
  for (const auto& r : data.test.records) {
    truth.push_back(true_expected_watch_time(data.world, static_cast<std::size_t>(r.user_id),
                                             static_cast<std::size_t>(r.video_id)));
  }
  const auto durations = data.test.durations();
  const auto users = data.test.user_ids();
  const auto report = evaluate(truth, data.test.watch_times(), durations, users, fit_duration_groups(durations, 4), 1);
  EXPECT_NEAR(report.mae, 0.0, 1e-9);
  EXPECT_EQ(report.xauc_exact, 1.0);
}

TEST(Sweep, SingleCell) {
  RunConfig c = small_run(scratch_dir());
  c.methods = {Method::kVr};
  c.group_counts = {1};
  const auto result = cmd_sweep(c);
  ASSERT_EQ(result.rows.size(), 1u);
  const std::string csv = slurp(result.results_csv);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,m,seed,mae,xauc,xgauc,wall_time_s");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(Sweep, CellCountAndScheduling) {
  RunConfig c;
  const auto cells = sweep_cells(c);
  // vr and wlr at m = 1, d2q at every m, resd2q at every m > 1.
  EXPECT_EQ(cells.size(), 2 + c.group_counts.size() + (c.group_counts.size() - 1));
  for (const auto& [method, m] : cells) {
    if (!uses_duration_groups(method)) EXPECT_EQ(m, 1u);
    if (method == Method::kResD2q) EXPECT_GT(m, 1u);
  }
}

TEST(Sweep, RerunIsByteIdenticalAndReusesCells) {
  const auto dir = scratch_dir();
  RunConfig c = small_run(dir / "first");
  c.seeds = {1, 2};
  const auto first = cmd_sweep(c);
  EXPECT_EQ(first.rows.size(), 2 * sweep_cells(c).size());
  for (const auto& r : first.rows) EXPECT_TRUE(r.ok) << r.error;

  RunConfig fresh = c;
  fresh.output_dir = dir / "second";
  EXPECT_EQ(slurp(cmd_sweep(fresh).results_csv), slurp(first.results_csv));
  // Cached cells give the same bytes too.
  EXPECT_EQ(slurp(cmd_sweep(c).results_csv), slurp(first.results_csv));
  EXPECT_TRUE(std::filesystem::exists(first.summary_md));
  EXPECT_TRUE(std::filesystem::exists(first.chart_svg));
}

TEST(Sweep, FailedCellIsReportedNotFatal) {
  RunConfig c = small_run(scratch_dir());
  c.methods = {Method::kD2q};
  c.group_counts = {1000};
  const auto result = cmd_sweep(c);
  ASSERT_EQ(result.rows.size(), 1u);
  EXPECT_FALSE(result.rows[0].ok);
  EXPECT_NE(slurp(result.results_csv).find("nan,nan,nan"), std::string::npos);
  EXPECT_NE(slurp(result.summary_md).find("Failed cells"), std::string::npos);
}

// Absolute MAE always favours short videos because watch time cannot exceed
// duration, so the comparison is relative to each group's mean watch time.
TEST(DurationBias, WlrIsWorstOnShortVideosRelatively) {
  RunConfig c;
  c.train_size = 50'000;
  c.test_size = 10'000;
  const GeneratedData data = generate_data(c, 1);
  const Predictor p = train_predictor(Method::kWlr, data.train, 1, c.model_for(Method::kWlr, 3));
  const auto pred = predict_all(p, data.test);
  const auto truth = data.test.watch_times();
  const auto durations = data.test.durations();
  const auto groups = fit_duration_groups(durations, 10);
  const auto rows = duration_bias_report(pred, truth, durations, groups);
  std::vector<double> mean_watch(10, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) mean_watch[assign_group(groups, durations[i])] += truth[i];
  for (std::size_t k = 0; k < 10; ++k) mean_watch[k] /= static_cast<double>(rows[k].count);
  EXPECT_GT(rows.front().mae / mean_watch.front(), rows.back().mae / mean_watch.back());
}

}  // namespace
}  // namespace dq
