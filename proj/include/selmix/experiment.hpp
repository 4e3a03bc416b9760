#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "selmix/core_data.hpp"
#include "selmix/model.hpp"
#include "selmix/synth.hpp"
#include "selmix/trainer.hpp"

namespace selmix {

enum class DatasetSource { spurious, temporal, csv };

// A grid of (strategy, seed) training runs over one dataset.
//
// The config file is flat `key = value` text; `#` starts a comment. Keys:
//   dataset                       spurious | temporal | csv
//   dataset.path                  CSV with a split column (csv source)
//   spurious.<field>              any SpuriousCorrConfig field
//   temporal.<field>              any TemporalShiftConfig field; ranges as
//                                 first:last, the schedule comma-separated
//   strategies                    comma-separated canonical strategy names
//   model.arch                    linear | mlp
//   model.hidden_units, model.init_scale
//   train.learning_rate, train.batch_size, train.max_epochs,
//   train.steps_per_epoch, train.early_stop, train.momentum,
//   train.weight_decay
//   seeds                         comma-separated list or a range a-b
//   analysis.divergence, analysis.sampled_distribution,
//   analysis.uniformity           true | false
//   analysis.sampled_draws        Monte-Carlo items per strategy
//   report.metric                 summary metric used for bar plots
//   output                        results directory
//   workers                       parallel runs
struct ExperimentConfig {
  DatasetSource source = DatasetSource::spurious;
  SpuriousCorrConfig spurious;
  TemporalShiftConfig temporal;
  std::filesystem::path csv_path;
  std::vector<std::string> strategies;
  ModelSpec model;  // input_dim and num_classes come from the data
  TrainConfig train;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "results";
  bool divergence_analysis = true;
  bool sampled_distribution = true;
  bool uniformity_report = true;
  std::size_t sampled_draws = 100000;
  std::string report_metric;  // empty: chosen from the source
  int workers = 1;

  // Throws ConfigError.
  void validate() const;
  std::string primary_metric() const;
};

// Throws ConfigError with the offending line.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
// Canonical text of a config; parse_experiment_config reads it back.
std::string format_experiment_config(const ExperimentConfig& config);

// Train, validation and pooled test split of an experiment.
struct ExperimentData {
  Dataset train;
  Dataset val;
  Dataset test;
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

// Writes data.csv (with a split column) and metadata.txt for a generator
// config; for a CSV source, copies the split counts into metadata.txt.
void generate_datasets(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// Resolves `resample:target=test` (pooled test classes) and
// `resample:target=test:<domain>` against the data.
SamplingStrategy resolve_strategy(const std::string& name, const ExperimentData& data);

struct GridOptions {
  int workers = 0;  // 0: take the config value
  std::uint64_t seed_offset = 0;
};

struct GridOutcome {
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::vector<std::string> failures;  // "strategy@seed: message"
};

// Files written to config.output_dir:
//   config.txt                 canonical config, seeds after the offset
//   runs.csv                   one row per (strategy, seed, split, domain)
//   failures.csv               strategy,seed,error
//   summary.csv                mean and std per strategy and metric
//   sampled_distribution.csv   effective class/domain/group frequencies
//   divergence.csv             train/test divergences vs test accuracy
//   uniformity.csv             per-domain class balance of every split
// Failed runs are recorded and the grid continues.
GridOutcome run_experiment_grid(const ExperimentConfig& config, const GridOptions& options = {});

enum class PlotKind { bars, scatter, timeseries };

// Writes plot_<kind>.csv into the results directory and returns its path.
// bars: strategy,metric,mean,std in configured order; scatter:
// strategy,domain,divergence,accuracy,pearson; timeseries:
// split,domain,minority_class_ratio,class_entropy. Throws Error listing the
// absent runs when the grid is incomplete.
std::filesystem::path emit_plot_data(const std::filesystem::path& results_dir, PlotKind kind);

struct AuditResult {
  bool ok = true;
  std::vector<std::string> mismatches;
};

// Recomputes summary.csv from runs.csv.
AuditResult audit_results(const std::filesystem::path& results_dir);

}  // namespace selmix
