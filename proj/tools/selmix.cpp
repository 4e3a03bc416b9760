#include <CLI11.hpp>

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "selmix/error.hpp"
#include "selmix/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kPartialFailure = 1;
constexpr int kConfigError = 2;

fs::path results_dir(const std::string& out, const std::string& config_path) {
  if (!out.empty()) return out;
  if (!config_path.empty()) return selmix::load_experiment_config(config_path).output_dir;
  throw selmix::ConfigError("need --out or --config to locate the results");
}

int cmd_generate(const std::string& config_path, const std::string& out) {
  const auto config = selmix::load_experiment_config(config_path);
  const fs::path dir = out.empty() ? config.output_dir / "data" : fs::path(out);
  selmix::generate_datasets(config, dir);
  std::cout << "wrote " << (dir / "data.csv").string() << " and " << (dir / "metadata.txt").string() << '\n';
  return kOk;
}

int cmd_run(const std::string& config_path, const std::string& out, int workers,
            std::uint64_t seed_offset) {
  auto config = selmix::load_experiment_config(config_path);
  if (!out.empty()) config.output_dir = out;
  selmix::GridOptions options;
  options.workers = workers;
  options.seed_offset = seed_offset;
  const auto outcome = selmix::run_experiment_grid(config, options);
  std::cout << outcome.completed << " runs completed, " << outcome.failed << " failed; results in "
            << config.output_dir.string() << '\n';
  for (const auto& f : outcome.failures) std::cerr << "failed: " << f << '\n';
  return outcome.failed == 0 ? kOk : kPartialFailure;
}

int cmd_report(const fs::path& dir, const std::string& kind) {
  int status = kOk;
  auto emit = [&](selmix::PlotKind k, const char* name, bool required) {
    try {
      std::cout << "wrote " << selmix::emit_plot_data(dir, k).string() << '\n';
    } catch (const selmix::Error& e) {
      if (required || std::string(e.what()).starts_with("missing results")) {
        std::cerr << name << ": " << e.what() << '\n';
        status = kPartialFailure;
      }
    }
  };
  if (kind == "bars" || kind == "all") emit(selmix::PlotKind::bars, "bars", kind != "all");
  if (kind == "scatter" || kind == "all") emit(selmix::PlotKind::scatter, "scatter", kind != "all");
  if (kind == "timeseries" || kind == "all") emit(selmix::PlotKind::timeseries, "timeseries", kind != "all");
  return status;
}

int cmd_audit(const fs::path& dir) {
  const auto result = selmix::audit_results(dir);
  if (result.ok) {
    std::cout << "summary.csv matches runs.csv\n";
    return kOk;
  }
  for (const auto& m : result.mismatches) std::cerr << m << '\n';
  return kPartialFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective mixup, selective sampling and resampling experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  int workers = 0;
  std::uint64_t seed_offset = 0;
  std::string kind = "all";

  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset as CSV plus metadata");
  generate->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  generate->add_option("--out", out, "Output directory (default <output>/data)");

  auto* run = app.add_subcommand("run", "Train and evaluate every (strategy, seed) cell");
  run->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Results directory (overrides the config)");
  run->add_option("--workers", workers, "Parallel runs (overrides the config)")->check(CLI::PositiveNumber);
  run->add_option("--seed-offset", seed_offset, "Added to every configured seed");

  auto* report = app.add_subcommand("report", "Write plot-ready CSV from a results directory");
  report->add_option("--config", config_path, "Experiment config naming the results directory");
  report->add_option("--out", out, "Results directory");
  report->add_option("--kind", kind, "bars, scatter, timeseries or all")
      ->check(CLI::IsMember({"bars", "scatter", "timeseries", "all"}));

  auto* audit = app.add_subcommand("audit", "Recompute summary.csv from runs.csv");
  audit->add_option("--config", config_path, "Experiment config naming the results directory");
  audit->add_option("--out", out, "Results directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (generate->parsed()) return cmd_generate(config_path, out);
    if (run->parsed()) return cmd_run(config_path, out, workers, seed_offset);
    if (report->parsed()) return cmd_report(results_dir(out, config_path), kind);
    if (audit->parsed()) return cmd_audit(results_dir(out, config_path));
  } catch (const selmix::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPartialFailure;
  }
  return kOk;
}
