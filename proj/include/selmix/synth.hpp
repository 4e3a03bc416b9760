#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "selmix/core_data.hpp"

namespace selmix {

// Ordered key-value metadata written next to generated CSV files as
// `key = value` lines.
class SynthMetadata {
 public:
  void set(std::string key, std::string value);
  std::optional<std::string> get(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void save(const std::filesystem::path& path) const;
  static SynthMetadata load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Binary task with a spurious domain feature whose association with the
// class can be reversed at test time. Class 0 is the majority class and the
// domain agrees with the class (domain == class) with probability
// `spurious_strength_*` in each split.
struct SpuriousCorrConfig {
  std::size_t n_train = 4000;
  std::size_t n_val = 1000;
  std::size_t n_test = 2000;
  double class_balance_train = 0.77;  // fraction of class 0, every split
  double spurious_strength_train = 0.95;
  double spurious_strength_val = 0.5;
  double spurious_strength_test = 0.05;
  double core_signal = 1.0;      // class mean separation, noise std units
  double spurious_signal = 3.0;  // domain mean separation, noise std units
  int noise_dim = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SpuriousCorrData {
  Dataset train;
  Dataset val;
  Dataset test;
  SynthMetadata metadata;
};

// Features: [core, spurious, noise...]; core = +-core_signal/2 + N(0,1) by
// class, spurious = +-spurious_signal/2 + N(0,1) by domain, noise N(0,1).
// Throws InvalidArgument naming the (split, class, domain) group when a
// split realises an empty group.
SpuriousCorrData gen_spurious_correlation(const SpuriousCorrConfig& config);

// Domains are consecutive time periods; train and test use disjoint ranges.
struct DomainRange {
  int first = 0;
  int last = 0;  // exclusive

  bool contains(int d) const { return d >= first && d < last; }
  int size() const { return last - first; }
};

// Temporal label shift with optional covariate drift. In domain d the
// probability of class 0 is class_ratio_schedule[d]; the other classes share
// the rest evenly.
struct TemporalShiftConfig {
  int num_domains = 10;
  DomainRange train_domains{0, 6};
  DomainRange test_domains{6, 10};
  std::vector<double> class_ratio_schedule;
  double covariate_drift_rate = 0.0;  // mean shift per domain along the diagonal
  double class_separation = 1.0;      // distance between class means
  std::size_t n_per_domain = 400;
  std::size_t n_val_per_domain = 100;  // in-distribution validation per train domain
  int num_classes = 2;
  int dim = 4;
  std::uint64_t seed = 0;

  void validate() const;
  // Train on the test period and test on the training period.
  TemporalShiftConfig reversed() const;
};

struct TemporalShiftData {
  Dataset train;
  Dataset val;
  std::vector<Dataset> tests;  // one per test domain, ascending
  SynthMetadata metadata;
};

TemporalShiftData gen_temporal_label_shift(const TemporalShiftConfig& config);

}  // namespace selmix
