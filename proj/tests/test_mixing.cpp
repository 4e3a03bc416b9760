#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selmix/error.hpp"
#include "selmix/mixing.hpp"
#include "test_util.hpp"

namespace selmix {
namespace {

TEST(SampleMixCoefficient, MeanAndVariance) {
  Rng rng = make_rng(41, 0);
  const int n = 1000000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double c = sample_mix_coefficient(rng).value();
    ASSERT_GE(c, 0.0);
    ASSERT_LE(c, 1.0);
    sum += c;
    sum_sq += c * c;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.5, 0.002);
  EXPECT_NEAR(var, 0.05, 0.002);
}

TEST(SampleMixCoefficient, KolmogorovSmirnovAgainstBetaTwoTwo) {
  Rng rng = make_rng(42, 0);
  const int n = 100000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = sample_mix_coefficient(rng).value();
  std::sort(xs.begin(), xs.end());
  auto cdf = [](double c) { return 3.0 * c * c - 2.0 * c * c * c; };
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = cdf(xs[static_cast<std::size_t>(i)]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  EXPECT_LT(d, 0.01);
}

TEST(MixCoefficient, RejectsOutOfRange) {
  EXPECT_THROW(MixCoefficient(-0.01), InvalidArgument);
  EXPECT_THROW(MixCoefficient(1.01), InvalidArgument);
  EXPECT_THROW(MixCoefficient(std::nan("")), InvalidArgument);
  EXPECT_NO_THROW(MixCoefficient(0.0));
  EXPECT_NO_THROW(MixCoefficient(1.0));
}

TEST(MixExamples, UnitCoefficientReturnsFirst) {
  const Example a{{0.1, -2.7, 3.3}, 2, 0};
  const Example b{{5.0, 1.0, -1.0}, 0, 1};
  const auto m = mix_examples(a, b, MixCoefficient(1.0), 3);
  EXPECT_EQ(m.features, a.features);
  EXPECT_EQ(m.soft_label, a.one_hot(3));
}

TEST(MixExamples, Midpoint) {
  const Example a{{0.0, 0.0}, 0, 0};
  const Example b{{2.0, 2.0}, 1, 0};
  const auto m = mix_examples(a, b, MixCoefficient(0.5), 2);
  EXPECT_EQ(m.features, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(m.soft_label, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(m.coefficient, 0.5);
}

TEST(MixExamples, SymmetricUnderSwap) {
  Rng rng = make_rng(43, 0);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = 2 + static_cast<int>(uniform_index(rng, 5));
    Example a{{}, static_cast<int>(uniform_index(rng, classes)), 0};
    Example b{{}, static_cast<int>(uniform_index(rng, classes)), 0};
    for (int k = 0; k < 4; ++k) {
      a.features.push_back(normal(rng));
      b.features.push_back(normal(rng));
    }
    const double c = uniform01(rng);
    const auto ab = mix_examples(a, b, MixCoefficient(c), classes);
    const auto ba = mix_examples(b, a, MixCoefficient(1.0 - c), classes);
    for (std::size_t k = 0; k < ab.features.size(); ++k) EXPECT_NEAR(ab.features[k], ba.features[k], 1e-12);
    for (std::size_t k = 0; k < ab.soft_label.size(); ++k) {
      EXPECT_NEAR(ab.soft_label[k], ba.soft_label[k], 1e-12);
    }
  }
}

TEST(MixExamples, SoftLabelIsADistribution) {
  Rng rng = make_rng(44, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = 2 + static_cast<int>(uniform_index(rng, 8));
    const Example a{{1.0}, static_cast<int>(uniform_index(rng, classes)), 0};
    const Example b{{2.0}, static_cast<int>(uniform_index(rng, classes)), 0};
    const auto m = mix_examples(a, b, sample_mix_coefficient(rng), classes);
    for (double y : m.soft_label) EXPECT_GE(y, 0.0);
    EXPECT_NEAR(std::accumulate(m.soft_label.begin(), m.soft_label.end(), 0.0), 1.0, 1e-15);
  }
}

TEST(MixExamples, SelfMixIsIdentity) {
  Rng rng = make_rng(45, 0);
  const Example a{{0.3, -1.7, 1e-300, 12345.678}, 1, 0};
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = mix_examples(a, a, sample_mix_coefficient(rng), 3);
    EXPECT_EQ(m.features, a.features);
    EXPECT_EQ(m.soft_label, a.one_hot(3));
  }
}

TEST(MixExamples, DimensionMismatch) {
  EXPECT_THROW(mix_examples(Example{{1.0}, 0, 0}, Example{{1.0, 2.0}, 0, 0}, MixCoefficient(0.5), 2),
               InvalidArgument);
}

}  // namespace
}  // namespace selmix
