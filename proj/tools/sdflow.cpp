// sdflow: generate -> prepare -> train -> evaluate -> report.
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sdflow/error.hpp"
#include "sdflow/pipeline.hpp"

namespace {

using sdflow::PipelineConfig;

void print_prepare(const std::vector<sdflow::PreparedSizes>& all) {
  for (const auto& s : all) {
    for (const auto& w : s.warnings) fmt::print(stderr, "warning: {}\n", w);
    fmt::print("m={:<3} train={} ({} positive) test={} ({} positive) columns={} (numeric {})\n", s.m,
               s.train_rows, s.train_positives, s.test_rows, s.test_positives, s.total_columns,
               s.numeric_columns);
  }
  if (!all.empty() && all.front().row_errors > 0) {
    fmt::print(stderr, "warning: {} flows rejected while loading\n", all.front().row_errors);
  }
}

// Returns the exit code for the train stage.
int print_train(const sdflow::TrainSummary& summary) {
  for (const auto& c : summary.cells) {
    if (c.ok) {
      fmt::print("m={:<3} {:<20} best {}\n", c.m, c.predictor, c.best_params.dump());
    } else {
      fmt::print(stderr, "m={:<3} {:<20} {}\n", c.m, c.predictor, c.failure_reason);
    }
  }
  return summary.any_degenerate() ? sdflow::exit_code_for(sdflow::ErrorCode::kDegenerateLabels) : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Service degradation detection on partially observable flows"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool print_config = false;
  app.add_option("--config", config_path, "pipeline config (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--print-config", print_config, "print the effective config and exit");

  auto* generate = app.add_subcommand("generate", "write the synthetic corpus and threshold table");
  auto* prepare = app.add_subcommand("prepare", "separate, label and featurize flows per split threshold");
  auto* train = app.add_subcommand("train", "grid search and fit trained predictors");
  auto* evaluate = app.add_subcommand("evaluate", "score every predictor on the test days");
  auto* report = app.add_subcommand("report", "print the persisted evaluation report");
  auto* run = app.add_subcommand("run", "all stages in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    PipelineConfig config = config_path.empty() ? PipelineConfig::defaults() : PipelineConfig::load(config_path);
    if (*seed_opt) config.seed = seed;
    if (*threads_opt) config.threads = threads;

    if (print_config) {
      std::cout << config.to_json().dump(2) << '\n';
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 2;
    }

    int rc = 0;
    if (*generate || *run) {
      for (const auto& [day, n] : sdflow::cmd_generate(config).flows_per_day) {
        fmt::print("{}: {} flows\n", day, n);
      }
    }
    if (*prepare || *run) print_prepare(sdflow::cmd_prepare(config));
    if (*train || *run) rc = print_train(sdflow::cmd_train(config));
    if (*evaluate || *run) {
      const auto r = sdflow::cmd_evaluate(config);
      fmt::print("{} cells written to {}\n", r.cells.size(), config.reports_dir());
    }
    if (*report || *run) std::cout << sdflow::cmd_report(config);
    return rc;
  } catch (const sdflow::Error& e) {
    fmt::print(stderr, "error [{}]: {}\n", sdflow::to_string(e.code()), e.what());
    return sdflow::exit_code_for(e.code());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 3;
  }
}
