#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "selmix/core_data.hpp"
#include "selmix/random.hpp"

namespace selmix::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("selmix_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Random features in [-3, 3], labels and domains uniform.
inline Dataset random_dataset(Rng& rng, std::size_t n, int num_classes, int num_domains,
                              std::size_t dim, Split split = Split::train) {
  std::uniform_real_distribution<double> feature(-3.0, 3.0);
  std::vector<Example> examples(n);
  for (auto& e : examples) {
    e.features.resize(dim);
    for (auto& x : e.features) x = feature(rng);
    e.class_index = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(num_classes)));
    e.domain_index = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(num_domains)));
  }
  return Dataset(std::move(examples), num_classes, num_domains, split);
}

// One example per (label, domain) pair; feature k of example i is i + k.
inline Dataset labeled_dataset(const std::vector<int>& labels, const std::vector<int>& domains,
                               int num_classes, int num_domains, std::size_t dim = 1) {
  std::vector<Example> examples;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Example e;
    for (std::size_t k = 0; k < dim; ++k) e.features.push_back(static_cast<double>(i + k));
    e.class_index = labels[i];
    e.domain_index = domains[i];
    examples.push_back(std::move(e));
  }
  return Dataset(std::move(examples), num_classes, num_domains);
}

// Dataset whose class counts are exactly `counts`, spread round-robin over
// `num_domains` domains.
inline Dataset counted_dataset(const std::vector<std::size_t>& counts, int num_domains = 1) {
  std::vector<Example> examples;
  std::size_t i = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t k = 0; k < counts[c]; ++k, ++i) {
      examples.push_back(Example{{static_cast<double>(i)}, static_cast<int>(c),
                                 static_cast<int>(i % static_cast<std::size_t>(num_domains))});
    }
  }
  return Dataset(std::move(examples), static_cast<int>(counts.size()), num_domains);
}

// Random probability vector; `concentration` < 1 gives skewed vectors.
inline std::vector<double> random_probs(Rng& rng, int num_classes, double concentration = 1.0) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> p(static_cast<std::size_t>(num_classes));
  double sum = 0.0;
  for (auto& x : p) {
    x = gamma(rng) + 1e-12;
    sum += x;
  }
  for (auto& x : p) x /= sum;
  return p;
}

// Counts per class that realise `p` over n examples (largest remainder).
inline std::vector<std::size_t> counts_for(const std::vector<double>& p, std::size_t n) {
  std::vector<std::size_t> counts(p.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    counts[i] = static_cast<std::size_t>(std::floor(p[i] * static_cast<double>(n)));
    total += counts[i];
  }
  for (std::size_t i = 0; total < n; i = (i + 1) % p.size(), ++total) ++counts[i];
  return counts;
}

}  // namespace selmix::testing
