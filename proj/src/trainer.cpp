#include "selmix/trainer.hpp"

#include <cmath>
#include <limits>

#include "selmix/metrics.hpp"
#include "selmix/pairing.hpp"
#include "selmix/random.hpp"
#include "selmix/text.hpp"

namespace selmix {

std::string_view to_string(EarlyStopMetric metric) {
  switch (metric) {
    case EarlyStopMetric::validation_accuracy:
      return "validation_accuracy";
    case EarlyStopMetric::worst_group_validation_accuracy:
      return "worst_group_validation_accuracy";
    case EarlyStopMetric::validation_auroc:
      return "validation_auroc";
  }
  return "validation_accuracy";
}

EarlyStopMetric parse_early_stop_metric(std::string_view text) {
  text = text::trim(text);
  if (text == "validation_accuracy") return EarlyStopMetric::validation_accuracy;
  if (text == "worst_group_validation_accuracy") {
    return EarlyStopMetric::worst_group_validation_accuracy;
  }
  if (text == "validation_auroc") return EarlyStopMetric::validation_auroc;
  throw InvalidArgument("unknown early-stop metric '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (max_epochs < 1) throw InvalidArgument("max_epochs must be positive");
  if (steps_per_epoch < 1) throw InvalidArgument("steps_per_epoch must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw InvalidArgument("weight_decay must be non-negative");
}

namespace {

double score_of(const EpochRecord& r, EarlyStopMetric metric) {
  switch (metric) {
    case EarlyStopMetric::validation_accuracy:
      return r.validation_accuracy;
    case EarlyStopMetric::worst_group_validation_accuracy:
      return r.worst_group_validation_accuracy;
    case EarlyStopMetric::validation_auroc:
      return std::isnan(r.validation_auroc) ? -std::numeric_limits<double>::infinity()
                                            : r.validation_auroc;
  }
  return 0.0;
}

}  // namespace

TrainedModel train(const Dataset& train, const Dataset& validation,
                   const SamplingStrategy& strategy, const ModelSpec& spec,
                   const TrainConfig& config) {
  config.validate();
  if (static_cast<std::size_t>(spec.input_dim) != train.feature_dim() ||
      validation.feature_dim() != train.feature_dim()) {
    throw InvalidArgument("model input_dim does not match the data");
  }
  if (spec.num_classes != train.num_classes() || validation.num_classes() != train.num_classes()) {
    throw InvalidArgument("model num_classes does not match the data");
  }

  const PairPool pool(train);
  const BatchSampler sampler(train, pool, strategy);
  Rng rng = make_rng(config.seed, 0x7472616eULL);

  Model model(spec);
  Parameters velocity = model.parameters().zeros_like();
  std::vector<EpochRecord> history;
  Parameters best = model.parameters();
  int best_epoch = 0;
  double best_score = -std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    for (int step = 0; step < config.steps_per_epoch; ++step) {
      const auto batch = sampler.next(config.batch_size, rng);
      GradientResult g;
      try {
        g = compute_gradients(model, batch, train);
      } catch (const NumericalError& e) {
        throw TrainingDivergedError(std::string("training diverged in epoch ") +
                                        std::to_string(epoch) + ": " + e.what(),
                                    history);
      }
      loss_sum += g.loss;
      if (config.weight_decay > 0.0) g.gradient.add_scaled(model.parameters(), config.weight_decay);
      if (config.momentum > 0.0) {
        for (auto& layer : velocity.layers) {
          for (double& v : layer.weights) v *= config.momentum;
          for (double& v : layer.bias) v *= config.momentum;
        }
        velocity.add_scaled(g.gradient, 1.0);
        model.parameters().add_scaled(velocity, -config.learning_rate);
      } else {
        model.parameters().add_scaled(g.gradient, -config.learning_rate);
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / config.steps_per_epoch;
    if (!std::isfinite(record.train_loss)) {
      history.push_back(record);
      throw TrainingDivergedError("training loss is not finite in epoch " + std::to_string(epoch),
                                  history);
    }
    const auto predictions = predict_classes(model, validation);
    record.validation_accuracy = accuracy(predictions, validation);
    record.worst_group_validation_accuracy = worst_group_accuracy(predictions, validation);
    record.validation_auroc = std::numeric_limits<double>::quiet_NaN();
    if (validation.num_classes() == 2) {
      std::vector<int> labels;
      labels.reserve(validation.size());
      for (const auto& e : validation) labels.push_back(e.class_index);
      try {
        record.validation_auroc = auroc(positive_scores(model, validation), labels);
      } catch (const UndefinedMetricError&) {
      }
    }
    history.push_back(record);

    const double score = score_of(record, config.early_stop_metric);
    if (best_epoch == 0 || score > best_score) {
      best_score = score;
      best_epoch = epoch;
      best = model.parameters();
    }
  }

  return TrainedModel{Model(spec, std::move(best)), std::move(history), best_epoch};
}

}  // namespace selmix
