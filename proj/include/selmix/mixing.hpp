#pragma once

#include <cstddef>
#include <vector>

#include "selmix/core_data.hpp"
#include "selmix/random.hpp"

namespace selmix {

// Mixing coefficient in [0, 1].
class MixCoefficient {
 public:
  explicit MixCoefficient(double value);
  double value() const { return value_; }

 private:
  double value_;
};

// Draws c ~ Beta(2, 2), density 6c(1 - c). The median of three independent
// U(0, 1) draws has exactly this law.
MixCoefficient sample_mix_coefficient(Rng& rng);

// A convex combination of two examples. `source_a`/`source_b` are dataset
// positions kept for auditing the sampled distribution.
struct MixedExample {
  std::vector<double> features;
  std::vector<double> soft_label;
  std::size_t source_a = 0;
  std::size_t source_b = 0;
  double coefficient = 1.0;
};

// features = c a + (1 - c) b, soft_label = c onehot(a) + (1 - c) onehot(b).
// Throws InvalidArgument on a feature dimension mismatch.
MixedExample mix_examples(const Example& a, const Example& b, MixCoefficient c,
                          int num_classes);

}  // namespace selmix
