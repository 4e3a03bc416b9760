#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "selmix/core_data.hpp"
#include "selmix/strategies.hpp"

namespace selmix {

enum class Architecture { linear, mlp };

struct ModelSpec {
  Architecture arch = Architecture::linear;
  int hidden_units = 0;  // mlp only; rectifier activation
  int input_dim = 0;
  int num_classes = 2;
  double init_scale = 1.0;
  std::uint64_t seed = 0;

  // Throws InvalidArgument when a field is out of range.
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Fully connected layer, weights stored row-major as outputs x inputs.
struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& weight(int out, int in) { return weights[static_cast<std::size_t>(out * inputs + in)]; }
  double weight(int out, int in) const {
    return weights[static_cast<std::size_t>(out * inputs + in)];
  }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Model parameters; gradients share the same shape.
struct Parameters {
  std::vector<DenseLayer> layers;

  Parameters zeros_like() const;
  std::size_t count() const;
  // Flat views in layer order (weights then bias), for updates and tests.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  // this += scale * other
  void add_scaled(const Parameters& other, double scale);

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

// Softmax-linear classifier or one-hidden-layer rectifier MLP.
class Model {
 public:
  // Weights i.i.d. uniform in [-init_scale, init_scale] / sqrt(fan_in),
  // biases zero, drawn from spec.seed.
  explicit Model(ModelSpec spec);
  Model(ModelSpec spec, Parameters parameters);

  const ModelSpec& spec() const { return spec_; }
  const Parameters& parameters() const { return params_; }
  Parameters& parameters() { return params_; }

  // Throws InvalidArgument on a feature dimension mismatch.
  std::vector<double> logits(std::span<const double> features) const;
  std::vector<double> predict_proba(std::span<const double> features) const;
  // Argmax of the logits; ties go to the lowest index.
  int predict(std::span<const double> features) const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  ModelSpec spec_;
  Parameters params_;
};

std::vector<double> softmax(std::span<const double> logits);

// Softmax class probabilities for one input.
inline std::vector<double> forward_predict(const Model& model, std::span<const double> features) {
  return model.predict_proba(features);
}

inline constexpr double kLossEpsilon = 1e-12;

// -sum_i soft_label_i * ln(predicted_i + 1e-12).
double soft_cross_entropy_loss(std::span<const double> predicted,
                               std::span<const double> soft_label);

struct GradientResult {
  Parameters gradient;
  double loss = 0.0;  // mean over the batch
};

// Analytic gradient of the mean soft cross-entropy over the batch. Throws
// NumericalError when an activation, the loss or a gradient entry is not
// finite.
GradientResult compute_gradients(const Model& model, const Minibatch& batch,
                                 const Dataset& data);
double batch_loss(const Model& model, const Minibatch& batch, const Dataset& data);

// Text dump: a versioned header with the ModelSpec fields, then one line of weights and
// one of biases per layer, in shortest round-trip decimal.
void save_model(std::ostream& out, const Model& model);
Model load_model(std::istream& in);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace selmix
