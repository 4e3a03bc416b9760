#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "selmix/error.hpp"
#include "selmix/model.hpp"
#include "selmix/pairing.hpp"
#include "test_util.hpp"

namespace selmix {
namespace {

ModelSpec linear_spec(int d, int c, std::uint64_t seed = 0) {
  ModelSpec s;
  s.input_dim = d;
  s.num_classes = c;
  s.seed = seed;
  return s;
}

ModelSpec mlp_spec(int d, int c, int h, std::uint64_t seed = 0) {
  ModelSpec s = linear_spec(d, c, seed);
  s.arch = Architecture::mlp;
  s.hidden_units = h;
  return s;
}

Model zero_model(const ModelSpec& spec) {
  Model m(spec);
  m.parameters() = m.parameters().zeros_like();
  return m;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

TEST(ModelSpec, Validates) {
  EXPECT_THROW(Model(linear_spec(0, 2)), InvalidArgument);
  EXPECT_THROW(Model(linear_spec(2, 1)), InvalidArgument);
  EXPECT_THROW(Model(mlp_spec(2, 2, 0)), InvalidArgument);
  ModelSpec bad = linear_spec(2, 2);
  bad.init_scale = -1.0;
  EXPECT_THROW(Model{bad}, InvalidArgument);
}

TEST(Model, InitializationIsBoundedAndSeeded) {
  const auto spec = mlp_spec(9, 3, 5, 17);
  const Model a(spec);
  const Model b(spec);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, Model(mlp_spec(9, 3, 5, 18)));
  const auto& first = a.parameters().layers[0];
  for (double w : first.weights) EXPECT_LE(std::abs(w), 1.0 / 3.0);
  for (double bias : first.bias) EXPECT_EQ(bias, 0.0);
  EXPECT_EQ(a.parameters().count(), 9u * 5 + 5 + 5 * 3 + 3);
}

TEST(ForwardPredict, ZeroWeightsGiveUniform) {
  for (int c = 2; c <= 6; ++c) {
    const auto m = zero_model(linear_spec(3, c));
    const std::vector<double> x{1.0, -2.0, 5.0};
    for (double p : forward_predict(m, x)) EXPECT_NEAR(p, 1.0 / c, 1e-15);
  }
}

TEST(ForwardPredict, ProbabilitiesArePositiveAndSumToOne) {
  Rng rng = make_rng(71, 0);
  std::normal_distribution<double> normal(0.0, 5.0);
  const Model m(mlp_spec(4, 5, 8, 3));
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = normal(rng);
    const auto p = forward_predict(m, x);
    for (double v : p) EXPECT_GT(v, 0.0);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(Softmax, ShiftInvariant) {
  Rng rng = make_rng(72, 0);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> z(5);
    for (auto& v : z) v = normal(rng);
    auto shifted = z;
    const double k = normal(rng) * 100.0;
    for (auto& v : shifted) v += k;
    const auto a = softmax(z);
    const auto b = softmax(shifted);
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
  }
  const auto huge = softmax(std::vector<double>{1000.0, 999.0});
  EXPECT_TRUE(std::isfinite(huge[0]));
}

TEST(ForwardPredict, ArgmaxMatchesLogits) {
  Rng rng = make_rng(73, 0);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (const auto& spec : {linear_spec(3, 4, 1), mlp_spec(3, 4, 6, 2)}) {
    const Model m(spec);
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> x(3);
      for (auto& v : x) v = normal(rng);
      const auto logits = m.logits(x);
      EXPECT_EQ(argmax(forward_predict(m, x)), argmax(logits));
      EXPECT_EQ(static_cast<std::size_t>(m.predict(x)), argmax(logits));
    }
  }
}

TEST(ForwardPredict, TiesGoToLowestIndex) {
  const auto m = zero_model(linear_spec(2, 3));
  EXPECT_EQ(m.predict(std::vector<double>{1.0, 1.0}), 0);
}

TEST(ForwardPredict, DimensionMismatch) {
  const Model m(linear_spec(3, 2));
  EXPECT_THROW(forward_predict(m, std::vector<double>{1.0, 2.0}), InvalidArgument);
}

TEST(SoftCrossEntropy, Examples) {
  const std::vector<double> one_hot{0.0, 1.0, 0.0};
  EXPECT_LE(std::abs(soft_cross_entropy_loss(one_hot, one_hot)), 1e-11);
  EXPECT_NEAR(soft_cross_entropy_loss(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}),
              std::log(2.0), 1e-11);
}

TEST(SoftCrossEntropy, LinearInTarget) {
  Rng rng = make_rng(74, 0);
  for (int i = 0; i < 1000; ++i) {
    const int c = 2 + static_cast<int>(uniform_index(rng, 5));
    const auto p = testing::random_probs(rng, c, 1.0);
    std::vector<double> y1(static_cast<std::size_t>(c), 0.0), y2(static_cast<std::size_t>(c), 0.0);
    y1[uniform_index(rng, static_cast<std::size_t>(c))] = 1.0;
    y2[uniform_index(rng, static_cast<std::size_t>(c))] = 1.0;
    const double w = uniform01(rng);
    std::vector<double> y(static_cast<std::size_t>(c));
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = w * y1[k] + (1 - w) * y2[k];
    EXPECT_NEAR(soft_cross_entropy_loss(p, y),
                w * soft_cross_entropy_loss(p, y1) + (1 - w) * soft_cross_entropy_loss(p, y2), 1e-12);
  }
}

TEST(ComputeGradients, ZeroModelClosedForm) {
  const auto m = zero_model(linear_spec(3, 2));
  const Dataset data({Example{{0.5, -1.0, 2.0}, 0, 0}}, 2, 1);
  Minibatch batch;
  batch.items.push_back(PlainItem{0});
  const auto g = compute_gradients(m, batch, data);
  const auto& layer = g.gradient.layers.at(0);
  const std::vector<double> p{0.5, 0.5};
  const std::vector<double> y{1.0, 0.0};
  for (int o = 0; o < 2; ++o) {
    // The 1e-12 loss smoothing shifts the gradient by ~1e-12.
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(layer.weight(o, i), (p[o] - y[o]) * data[0].features[static_cast<std::size_t>(i)], 1e-11);
    }
    EXPECT_NEAR(layer.bias[static_cast<std::size_t>(o)], p[o] - y[o], 1e-11);
  }
  EXPECT_NEAR(g.loss, std::log(2.0), 1e-11);
}

// Relative agreement with a floor for entries near zero.
void expect_matches_finite_differences(const Model& model, const Minibatch& batch, const Dataset& data) {
  const auto analytic = compute_gradients(model, batch, data).gradient.flatten();
  const auto theta = model.parameters().flatten();
  const double h = 1e-5;
  Model probe = model;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    auto plus = theta;
    auto minus = theta;
    plus[k] += h;
    minus[k] -= h;
    probe.parameters().assign(plus);
    const double lp = batch_loss(probe, batch, data);
    probe.parameters().assign(minus);
    const double lm = batch_loss(probe, batch, data);
    const double fd = (lp - lm) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(analytic[k]), 1e-4});
    ASSERT_LE(std::abs(fd - analytic[k]) / scale, 1e-4) << "parameter " << k << " fd " << fd << " analytic "
                                                        << analytic[k];
  }
}

TEST(ComputeGradients, MatchesFiniteDifferences) {
  Rng rng = make_rng(75, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2 + static_cast<int>(uniform_index(rng, 4));
    const int c = 2 + static_cast<int>(uniform_index(rng, 3));
    const auto data = testing::random_dataset(rng, 40, c, 2, static_cast<std::size_t>(d));
    const PairPool pool(data);
    const auto spec = trial % 2 ? mlp_spec(d, c, 3 + trial % 5, static_cast<std::uint64_t>(trial))
                                : linear_spec(d, c, static_cast<std::uint64_t>(trial));
    const Model model(spec);
    const char* strategy = trial % 3 == 0 ? "erm" : trial % 3 == 1 ? "vanilla_mixup" : "selective_mixup:diff_class";
    const auto batch = build_minibatch(data, pool, parse_strategy(strategy), 8, rng);
    expect_matches_finite_differences(model, batch, data);
  }
}

TEST(ComputeGradients, BatchIsMeanOfExamples) {
  Rng rng = make_rng(76, 0);
  const auto data = testing::random_dataset(rng, 30, 3, 2, 4);
  const PairPool pool(data);
  const Model model(mlp_spec(4, 3, 6, 5));
  const auto batch = build_minibatch(data, pool, parse_strategy("vanilla_mixup"), 10, rng);
  const auto whole = compute_gradients(model, batch, data);
  auto sum = whole.gradient.zeros_like();
  double loss = 0.0;
  for (const auto& item : batch.items) {
    Minibatch single;
    single.items.push_back(item);
    const auto g = compute_gradients(model, single, data);
    sum.add_scaled(g.gradient, 1.0 / 10.0);
    loss += g.loss / 10.0;
  }
  const auto a = whole.gradient.flatten();
  const auto b = sum.flatten();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
  EXPECT_NEAR(whole.loss, loss, 1e-12);
}

TEST(ComputeGradients, NonFiniteActivationsAreReported) {
  const Dataset data({Example{{std::numeric_limits<double>::infinity(), 1.0}, 0, 0}}, 2, 1);
  Minibatch batch;
  batch.items.push_back(PlainItem{0});
  EXPECT_THROW(compute_gradients(Model(linear_spec(2, 2, 1)), batch, data), NumericalError);
}

TEST(ComputeGradients, EmptyBatch) {
  const Dataset data({Example{{1.0}, 0, 0}}, 2, 1);
  EXPECT_THROW(compute_gradients(Model(linear_spec(1, 2)), Minibatch{}, data), InvalidArgument);
}

TEST(SaveModel, RoundTripIsExact) {
  for (const auto& spec : {linear_spec(5, 3, 4), mlp_spec(5, 3, 7, 4)}) {
    const Model m(spec);
    std::stringstream buffer;
    save_model(buffer, m);
    EXPECT_EQ(buffer.str().rfind("selmix-model 1", 0), 0u);
    EXPECT_EQ(load_model(buffer), m);
  }
  const auto dir = testing::temp_dir("model_file");
  const Model m(mlp_spec(2, 2, 3, 9));
  save_model(dir / "m.txt", m);
  EXPECT_EQ(load_model(dir / "m.txt"), m);
}

TEST(SaveModel, RejectsBadInput) {
  std::stringstream wrong_version("selmix-model 2\n");
  EXPECT_THROW(load_model(wrong_version), Error);
  std::stringstream truncated;
  save_model(truncated, Model(linear_spec(3, 2)));
  std::string text = truncated.str();
  text.resize(text.size() / 2);
  std::stringstream half(text);
  EXPECT_THROW(load_model(half), Error);
}

}  // namespace
}  // namespace selmix
