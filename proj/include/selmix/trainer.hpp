#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "selmix/core_data.hpp"
#include "selmix/error.hpp"
#include "selmix/model.hpp"
#include "selmix/strategies.hpp"

namespace selmix {

enum class EarlyStopMetric {
  validation_accuracy,
  worst_group_validation_accuracy,
  validation_auroc,
};

std::string_view to_string(EarlyStopMetric metric);
EarlyStopMetric parse_early_stop_metric(std::string_view text);

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 64;
  int max_epochs = 30;
  int steps_per_epoch = 50;
  EarlyStopMetric early_stop_metric = EarlyStopMetric::validation_accuracy;
  std::uint64_t seed = 0;
  // Off by default.
  double momentum = 0.0;
  double weight_decay = 0.0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_accuracy = 0.0;
  double worst_group_validation_accuracy = 0.0;
  double validation_auroc = 0.0;  // NaN when undefined
};

struct TrainedModel {
  Model model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

class TrainingDivergedError : public NumericalError {
 public:
  TrainingDivergedError(const std::string& what, std::vector<EpochRecord> history)
      : NumericalError(what), history_(std::move(history)) {}
  const std::vector<EpochRecord>& history() const { return history_; }

 private:
  std::vector<EpochRecord> history_;
};

// Plain minibatch SGD on the mean soft cross-entropy of the batches drawn by
// `strategy`, evaluating on `validation` after every epoch and returning the
// parameters of the epoch with the highest early-stop metric (earliest on
// ties). Deterministic for a given (spec.seed, config.seed).
TrainedModel train(const Dataset& train, const Dataset& validation,
                   const SamplingStrategy& strategy, const ModelSpec& spec,
                   const TrainConfig& config);

}  // namespace selmix
