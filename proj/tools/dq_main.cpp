// dq: generate synthetic logs, train/evaluate watch-time predictors, and run
// group-count sweeps.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dq/checkpoint.hpp"
#include "dq/harness.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Duration-deconfounded watch-time prediction harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (overrides the config)");
  };

  auto* generate = app.add_subcommand("generate", "Write biased train / unbiased test JSONL and a manifest");
  add_common(generate);
  std::optional<std::uint64_t> seed;
  generate->add_option("--seed", seed, "Seed (defaults to the first configured seed)");

  std::string method = "d2q";
  std::size_t groups = 1;
  std::string data_dir;
  auto* train = app.add_subcommand("train", "Train one predictor and write a checkpoint");
  add_common(train);
  train->add_option("--method", method, "vr | wlr | d2q | resd2q");
  train->add_option("--groups", groups, "Number of duration groups (D2Q / Res-D2Q)");
  train->add_option("--data", data_dir, "Directory holding train.jsonl and manifest.json");

  std::string checkpoint, test_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a test set");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--test", test_path, "Test dataset (jsonl or csv)")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate every (method, groups, seed) cell");
  add_common(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    dq::RunConfig config = config_path.empty() ? dq::RunConfig{} : dq::load_run_config(config_path);
    if (!out_dir.empty()) config.output_dir = out_dir;

    if (generate->parsed()) {
      const auto out = dq::cmd_generate(config, seed);
      std::cout << "wrote " << out.train.string() << ", " << out.test.string() << ", " << out.manifest.string()
                << "\n";
    } else if (train->parsed()) {
      const auto path = dq::cmd_train(config, dq::parse_method(method), groups, data_dir);
      std::cout << "wrote " << path.string() << "\n";
    } else if (eval->parsed()) {
      const auto out = dq::cmd_eval(config, checkpoint, test_path);
      std::cout << dq::report_to_json(out.report) << "\n";
    } else if (sweep->parsed()) {
      const auto result = dq::cmd_sweep(config);
      std::cout << dq::summary_markdown(result.rows) << "\nwrote " << result.results_csv.string() << ", "
                << result.summary_md.string() << ", " << result.chart_svg.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
