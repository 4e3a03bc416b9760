#include "selmix/mixing.hpp"

#include <algorithm>

#include "selmix/error.hpp"

namespace selmix {

MixCoefficient::MixCoefficient(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw InvalidArgument("mixing coefficient outside [0, 1]");
  }
}

MixCoefficient sample_mix_coefficient(Rng& rng) {
  double u[3] = {uniform01(rng), uniform01(rng), uniform01(rng)};
  std::sort(u, u + 3);
  return MixCoefficient(u[1]);
}

MixedExample mix_examples(const Example& a, const Example& b, MixCoefficient c,
                          int num_classes) {
  if (a.features.size() != b.features.size()) {
    throw InvalidArgument("cannot mix examples of different feature dimensions");
  }
  const double w = c.value();
  MixedExample out;
  out.coefficient = w;
  out.features.resize(a.features.size());
  for (std::size_t k = 0; k < a.features.size(); ++k) {
    const double x = a.features[k];
    const double y = b.features[k];
    out.features[k] = x == y ? x : w * x + (1.0 - w) * y;
  }
  out.soft_label.assign(static_cast<std::size_t>(num_classes), 0.0);
  if (a.class_index == b.class_index) {
    out.soft_label.at(static_cast<std::size_t>(a.class_index)) = 1.0;
  } else {
    out.soft_label.at(static_cast<std::size_t>(a.class_index)) = w;
    out.soft_label.at(static_cast<std::size_t>(b.class_index)) = 1.0 - w;
  }
  return out;
}

}  // namespace selmix
