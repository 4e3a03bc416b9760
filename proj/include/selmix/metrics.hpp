#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selmix/core_data.hpp"
#include "selmix/model.hpp"

namespace selmix {

// Argmax prediction for every example.
std::vector<int> predict_classes(const Model& model, const Dataset& data);
// Probability of class 1 for every example (binary tasks).
std::vector<double> positive_scores(const Model& model, const Dataset& data);

double accuracy(std::span<const int> predictions, const Dataset& data);
double accuracy(const Model& model, const Dataset& data);

struct GroupAccuracy {
  int class_index = 0;
  int domain_index = 0;
  std::size_t count = 0;
  double accuracy = 0.0;
};

// Accuracy of every observed (class, domain) group, in group order. Absent
// groups are omitted.
std::vector<GroupAccuracy> per_group_accuracy(std::span<const int> predictions,
                                              const Dataset& data);
// Minimum over observed groups.
double worst_group_accuracy(std::span<const int> predictions, const Dataset& data);
double worst_group_accuracy(const Model& model, const Dataset& data);

// Mann-Whitney statistic: (concordant + 0.5 tied) / (positives * negatives),
// computed from average ranks in O(n log n). Labels are 0/1. Throws
// UndefinedMetricError unless both labels occur.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct DomainMetrics {
  int domain_index = 0;
  std::size_t count = 0;
  double accuracy = 0.0;
  double worst_group_accuracy = 0.0;
  std::optional<double> auroc;  // binary tasks with both classes present
};

struct EvaluationReport {
  std::size_t count = 0;
  double overall_accuracy = 0.0;
  std::vector<GroupAccuracy> groups;
  double worst_group_accuracy = 0.0;
  std::vector<DomainMetrics> domains;
  double worst_domain_accuracy = 0.0;
  std::optional<double> auroc;
  std::optional<double> worst_domain_auroc;
  // Groups of the class x domain product with no example, as "(c,d)".
  std::vector<std::string> skipped_groups;
};

EvaluationReport evaluate(const Model& model, const Dataset& data);

enum class DivergenceKind { kl, total_variation };

inline constexpr double kDivergenceSmoothing = 1e-6;

// kl: sum_i p_i ln(p_i / q'_i) with q'_i = (q_i + eps) / (1 + C eps),
//     eps = 1e-6.
// total_variation: 0.5 sum_i |p_i - q_i|.
double distribution_divergence(std::span<const double> p, std::span<const double> q,
                               DivergenceKind kind);
double distribution_divergence(const ClassDistribution& p, const ClassDistribution& q,
                               DivergenceKind kind);

// Mean over test points of the Euclidean distance to the closest reference
// point.
double nn_covariate_divergence(std::span<const std::vector<double>> reference,
                               std::span<const std::vector<double>> test);
double nn_covariate_divergence(const Dataset& train, const Dataset& test);

// Sample Pearson coefficient. Throws UndefinedMetricError with fewer than 3
// points or a constant series.
double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

struct DomainUniformity {
  int domain_index = 0;
  std::size_t count = 0;
  // Smallest class frequency; the minority ratio for binary tasks.
  double minority_class_ratio = 0.0;
  double class_entropy = 0.0;
};

// One entry per observed domain, ascending.
std::vector<DomainUniformity> uniformity_shift_report(const Dataset& data);

}  // namespace selmix
