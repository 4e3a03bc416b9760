#include "selmix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "selmix/error.hpp"

namespace selmix {

std::vector<int> predict_classes(const Model& model, const Dataset& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& e : data) out.push_back(model.predict(e.features));
  return out;
}

std::vector<double> positive_scores(const Model& model, const Dataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& e : data) out.push_back(model.predict_proba(e.features).at(1));
  return out;
}

double accuracy(std::span<const int> predictions, const Dataset& data) {
  if (predictions.size() != data.size()) throw InvalidArgument("prediction count mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predictions[i] == data[i].class_index) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double accuracy(const Model& model, const Dataset& data) {
  return accuracy(predict_classes(model, data), data);
}

std::vector<GroupAccuracy> per_group_accuracy(std::span<const int> predictions,
                                              const Dataset& data) {
  if (predictions.size() != data.size()) throw InvalidArgument("prediction count mismatch");
  const auto groups = static_cast<std::size_t>(data.num_groups());
  std::vector<std::size_t> total(groups, 0);
  std::vector<std::size_t> correct(groups, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto g = static_cast<std::size_t>(data.group_of(data[i]));
    ++total[g];
    if (predictions[i] == data[i].class_index) ++correct[g];
  }
  std::vector<GroupAccuracy> out;
  for (std::size_t g = 0; g < groups; ++g) {
    if (total[g] == 0) continue;
    out.push_back({static_cast<int>(g) / data.num_domains(), static_cast<int>(g) % data.num_domains(),
                   total[g], static_cast<double>(correct[g]) / static_cast<double>(total[g])});
  }
  return out;
}

double worst_group_accuracy(std::span<const int> predictions, const Dataset& data) {
  double worst = 1.0;
  for (const auto& g : per_group_accuracy(predictions, data)) worst = std::min(worst, g.accuracy);
  return worst;
}

double worst_group_accuracy(const Model& model, const Dataset& data) {
  return worst_group_accuracy(predict_classes(model, data), data);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
  std::size_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw InvalidArgument("auroc labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("auroc needs at least one positive and one negative");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of 1-based average ranks of the positives.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) positive_rank_sum += rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(positives);
  const double u = positive_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(negatives));
}

namespace {

std::optional<double> try_auroc(std::span<const double> scores, std::span<const int> labels) {
  try {
    return auroc(scores, labels);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

}  // namespace

EvaluationReport evaluate(const Model& model, const Dataset& data) {
  EvaluationReport report;
  const auto predictions = predict_classes(model, data);
  report.count = data.size();
  report.overall_accuracy = accuracy(predictions, data);
  report.groups = per_group_accuracy(predictions, data);
  report.worst_group_accuracy = worst_group_accuracy(predictions, data);

  const auto counts = data.group_counts();
  for (std::size_t g = 0; g < counts.size(); ++g) {
    if (counts[g] == 0) {
      report.skipped_groups.push_back("(" + std::to_string(g / data.num_domains()) + "," +
                                      std::to_string(g % data.num_domains()) + ")");
    }
  }

  const bool binary = data.num_classes() == 2;
  std::vector<double> scores;
  std::vector<int> labels;
  if (binary) {
    scores = positive_scores(model, data);
    for (const auto& e : data) labels.push_back(e.class_index);
    report.auroc = try_auroc(scores, labels);
  }

  report.worst_domain_accuracy = 1.0;
  for (int d : data.observed_domains()) {
    std::vector<int> domain_predictions;
    std::vector<double> domain_scores;
    std::vector<int> domain_labels;
    std::vector<Example> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].domain_index != d) continue;
      domain_predictions.push_back(predictions[i]);
      members.push_back(data[i]);
      if (binary) {
        domain_scores.push_back(scores[i]);
        domain_labels.push_back(labels[i]);
      }
    }
    const Dataset subset(std::move(members), data.num_classes(), data.num_domains(), data.split());
    DomainMetrics m;
    m.domain_index = d;
    m.count = subset.size();
    m.accuracy = accuracy(domain_predictions, subset);
    m.worst_group_accuracy = worst_group_accuracy(domain_predictions, subset);
    if (binary) m.auroc = try_auroc(domain_scores, domain_labels);
    report.worst_domain_accuracy = std::min(report.worst_domain_accuracy, m.accuracy);
    if (m.auroc) {
      report.worst_domain_auroc =
          report.worst_domain_auroc ? std::min(*report.worst_domain_auroc, *m.auroc) : *m.auroc;
    }
    report.domains.push_back(m);
  }
  return report;
}

double distribution_divergence(std::span<const double> p, std::span<const double> q,
                               DivergenceKind kind) {
  if (p.size() != q.size()) throw InvalidArgument("distribution length mismatch");
  double out = 0.0;
  if (kind == DivergenceKind::total_variation) {
    for (std::size_t i = 0; i < p.size(); ++i) out += std::abs(p[i] - q[i]);
    return 0.5 * out;
  }
  const double norm = 1.0 + static_cast<double>(p.size()) * kDivergenceSmoothing;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    out += p[i] * std::log(p[i] / ((q[i] + kDivergenceSmoothing) / norm));
  }
  // Both arguments are proper distributions; only rounding goes negative.
  return std::max(out, 0.0);
}

double distribution_divergence(const ClassDistribution& p, const ClassDistribution& q,
                               DivergenceKind kind) {
  return distribution_divergence(p.probs(), q.probs(), kind);
}

double nn_covariate_divergence(std::span<const std::vector<double>> reference,
                               std::span<const std::vector<double>> test) {
  if (reference.empty() || test.empty()) throw EmptyDatasetError("covariate divergence of an empty set");
  const auto dim = reference.front().size();
  double total = 0.0;
  for (const auto& t : test) {
    if (t.size() != dim) throw InvalidArgument("feature dimension mismatch");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : reference) {
      if (r.size() != dim) throw InvalidArgument("feature dimension mismatch");
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim && d2 < best; ++k) {
        const double diff = t[k] - r[k];
        d2 += diff * diff;
      }
      best = std::min(best, d2);
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(test.size());
}

double nn_covariate_divergence(const Dataset& train, const Dataset& test) {
  if (train.feature_dim() != test.feature_dim()) throw InvalidArgument("feature dimension mismatch");
  std::vector<std::vector<double>> reference;
  std::vector<std::vector<double>> queries;
  reference.reserve(train.size());
  queries.reserve(test.size());
  for (const auto& e : train) reference.push_back(e.features);
  for (const auto& e : test) queries.push_back(e.features);
  return nn_covariate_divergence(reference, queries);
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("series differ in length");
  if (xs.size() < 3) throw UndefinedMetricError("pearson correlation needs at least 3 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw UndefinedMetricError("pearson correlation of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<DomainUniformity> uniformity_shift_report(const Dataset& data) {
  std::vector<DomainUniformity> out;
  const auto classes = static_cast<std::size_t>(data.num_classes());
  for (int d : data.observed_domains()) {
    std::vector<double> counts(classes, 0.0);
    std::size_t n = 0;
    for (const auto& e : data) {
      if (e.domain_index != d) continue;
      counts[static_cast<std::size_t>(e.class_index)] += 1.0;
      ++n;
    }
    for (double& c : counts) c /= static_cast<double>(n);
    DomainUniformity u;
    u.domain_index = d;
    u.count = n;
    u.minority_class_ratio = *std::min_element(counts.begin(), counts.end());
    u.class_entropy = entropy(counts);
    out.push_back(u);
  }
  return out;
}

}  // namespace selmix
