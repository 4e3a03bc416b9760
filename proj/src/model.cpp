#include "selmix/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "selmix/error.hpp"
#include "selmix/random.hpp"
#include "selmix/text.hpp"

namespace selmix {

void ModelSpec::validate() const {
  if (input_dim < 1) throw InvalidArgument("model input_dim must be positive");
  if (num_classes < 2) throw InvalidArgument("model needs at least 2 classes");
  if (arch == Architecture::mlp && hidden_units < 1) {
    throw InvalidArgument("mlp needs at least one hidden unit");
  }
  if (!(init_scale > 0.0)) throw InvalidArgument("init_scale must be positive");
}

Parameters Parameters::zeros_like() const {
  Parameters out = *this;
  for (auto& layer : out.layers) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  return out;
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
  return n;
}

std::vector<double> Parameters::flatten() const {
  std::vector<double> flat;
  flat.reserve(count());
  for (const auto& layer : layers) {
    flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

void Parameters::assign(std::span<const double> flat) {
  if (flat.size() != count()) throw InvalidArgument("parameter count mismatch");
  std::size_t pos = 0;
  for (auto& layer : layers) {
    for (double& w : layer.weights) w = flat[pos++];
    for (double& b : layer.bias) b = flat[pos++];
  }
}

void Parameters::add_scaled(const Parameters& other, double scale) {
  if (other.layers.size() != layers.size()) throw InvalidArgument("parameter shape mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& dst = layers[l];
    const auto& src = other.layers[l];
    if (src.weights.size() != dst.weights.size() || src.bias.size() != dst.bias.size()) {
      throw InvalidArgument("parameter shape mismatch");
    }
    for (std::size_t i = 0; i < dst.weights.size(); ++i) dst.weights[i] += scale * src.weights[i];
    for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += scale * src.bias[i];
  }
}

namespace {

DenseLayer init_layer(int inputs, int outputs, double scale, Rng& rng) {
  DenseLayer layer;
  layer.inputs = inputs;
  layer.outputs = outputs;
  const double bound = scale / std::sqrt(static_cast<double>(inputs));
  std::uniform_real_distribution<double> dist(-bound, bound);
  layer.weights.resize(static_cast<std::size_t>(inputs * outputs));
  for (double& w : layer.weights) w = dist(rng);
  layer.bias.assign(static_cast<std::size_t>(outputs), 0.0);
  return layer;
}

void apply(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
  out.assign(layer.bias.begin(), layer.bias.end());
  for (int o = 0; o < layer.outputs; ++o) {
    const double* row = &layer.weights[static_cast<std::size_t>(o * layer.inputs)];
    double acc = out[static_cast<std::size_t>(o)];
    for (int i = 0; i < layer.inputs; ++i) acc += row[i] * in[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(o)] = acc;
  }
}

void check_shapes(const ModelSpec& spec, const Parameters& params) {
  const std::size_t expected_layers = spec.arch == Architecture::linear ? 1 : 2;
  if (params.layers.size() != expected_layers) throw InvalidArgument("layer count mismatch");
  int inputs = spec.input_dim;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const int outputs = l + 1 == params.layers.size() ? spec.num_classes : spec.hidden_units;
    if (layer.inputs != inputs || layer.outputs != outputs ||
        layer.weights.size() != static_cast<std::size_t>(inputs * outputs) ||
        layer.bias.size() != static_cast<std::size_t>(outputs)) {
      throw InvalidArgument("layer " + std::to_string(l) + " shape mismatch");
    }
    inputs = outputs;
  }
}

}  // namespace

Model::Model(ModelSpec spec) : spec_(spec) {
  spec_.validate();
  Rng rng = make_rng(spec_.seed, 0x6d6f64656cULL);
  if (spec_.arch == Architecture::linear) {
    params_.layers.push_back(init_layer(spec_.input_dim, spec_.num_classes, spec_.init_scale, rng));
  } else {
    params_.layers.push_back(init_layer(spec_.input_dim, spec_.hidden_units, spec_.init_scale, rng));
    params_.layers.push_back(
        init_layer(spec_.hidden_units, spec_.num_classes, spec_.init_scale, rng));
  }
}

Model::Model(ModelSpec spec, Parameters parameters) : spec_(spec), params_(std::move(parameters)) {
  spec_.validate();
  check_shapes(spec_, params_);
}

std::vector<double> Model::logits(std::span<const double> features) const {
  if (features.size() != static_cast<std::size_t>(spec_.input_dim)) {
    throw InvalidArgument("expected " + std::to_string(spec_.input_dim) + " features, got " +
                          std::to_string(features.size()));
  }
  std::vector<double> out;
  if (spec_.arch == Architecture::linear) {
    apply(params_.layers[0], features, out);
    return out;
  }
  std::vector<double> hidden;
  apply(params_.layers[0], features, hidden);
  for (double& h : hidden) h = std::max(h, 0.0);
  apply(params_.layers[1], hidden, out);
  return out;
}

std::vector<double> Model::predict_proba(std::span<const double> features) const {
  return softmax(logits(features));
}

int Model::predict(std::span<const double> features) const {
  const auto z = logits(features);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - top);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

double soft_cross_entropy_loss(std::span<const double> predicted,
                               std::span<const double> soft_label) {
  if (predicted.size() != soft_label.size()) throw InvalidArgument("loss length mismatch");
  double loss = 0.0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    if (soft_label[k] != 0.0) loss -= soft_label[k] * std::log(predicted[k] + kLossEpsilon);
  }
  return loss;
}

namespace {

void require_finite(std::span<const double> values, const char* what, std::size_t item) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericalError(std::string("non-finite ") + what + " at batch item " +
                           std::to_string(item));
    }
  }
}

}  // namespace

GradientResult compute_gradients(const Model& model, const Minibatch& batch,
                                 const Dataset& data) {
  if (batch.size() == 0) throw InvalidArgument("empty batch");
  const auto& spec = model.spec();
  const auto& params = model.parameters();
  GradientResult result{params.zeros_like(), 0.0};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const auto num_classes = static_cast<std::size_t>(spec.num_classes);

  std::vector<double> hidden;
  std::vector<double> z;
  std::vector<double> dz(num_classes);
  std::vector<double> dh;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto x = item_features(batch.items[n], data);
    const auto y = item_label(batch.items[n], data);
    if (x.size() != static_cast<std::size_t>(spec.input_dim)) {
      throw InvalidArgument("batch item feature dimension mismatch");
    }
    const DenseLayer& out_layer = params.layers.back();
    std::span<const double> out_input = x;
    if (spec.arch == Architecture::mlp) {
      apply(params.layers[0], x, hidden);
      for (double& h : hidden) h = std::max(h, 0.0);
      require_finite(hidden, "hidden activation", n);
      out_input = hidden;
    }
    apply(out_layer, out_input, z);
    require_finite(z, "logit", n);
    const auto p = softmax(z);
    const double loss = soft_cross_entropy_loss(p, y);
    if (!std::isfinite(loss)) throw NumericalError("non-finite loss at batch item " + std::to_string(n));
    result.loss += loss * inv_n;

    // d loss / d z_k for loss = -sum_i y_i ln(p_i + eps).
    double s = 0.0;
    for (std::size_t i = 0; i < num_classes; ++i) s += y[i] * p[i] / (p[i] + kLossEpsilon);
    for (std::size_t k = 0; k < num_classes; ++k) {
      dz[k] = p[k] * s - y[k] * p[k] / (p[k] + kLossEpsilon);
    }

    DenseLayer& g_out = result.gradient.layers.back();
    for (int o = 0; o < out_layer.outputs; ++o) {
      const double d = dz[static_cast<std::size_t>(o)] * inv_n;
      g_out.bias[static_cast<std::size_t>(o)] += d;
      double* row = &g_out.weights[static_cast<std::size_t>(o * out_layer.inputs)];
      for (int i = 0; i < out_layer.inputs; ++i) row[i] += d * out_input[static_cast<std::size_t>(i)];
    }

    if (spec.arch == Architecture::mlp) {
      const DenseLayer& in_layer = params.layers[0];
      dh.assign(static_cast<std::size_t>(in_layer.outputs), 0.0);
      for (int o = 0; o < out_layer.outputs; ++o) {
        const double d = dz[static_cast<std::size_t>(o)];
        for (int h = 0; h < out_layer.inputs; ++h) dh[static_cast<std::size_t>(h)] += d * out_layer.weight(o, h);
      }
      DenseLayer& g_in = result.gradient.layers[0];
      for (int h = 0; h < in_layer.outputs; ++h) {
        if (hidden[static_cast<std::size_t>(h)] <= 0.0) continue;
        const double d = dh[static_cast<std::size_t>(h)] * inv_n;
        g_in.bias[static_cast<std::size_t>(h)] += d;
        double* row = &g_in.weights[static_cast<std::size_t>(h * in_layer.inputs)];
        for (int i = 0; i < in_layer.inputs; ++i) row[i] += d * x[static_cast<std::size_t>(i)];
      }
    }
  }
  for (const auto& layer : result.gradient.layers) {
    require_finite(layer.weights, "gradient", batch.size());
    require_finite(layer.bias, "gradient", batch.size());
  }
  return result;
}

double batch_loss(const Model& model, const Minibatch& batch, const Dataset& data) {
  if (batch.size() == 0) throw InvalidArgument("empty batch");
  double total = 0.0;
  for (const auto& item : batch.items) {
    total += soft_cross_entropy_loss(model.predict_proba(item_features(item, data)),
                                     item_label(item, data));
  }
  return total / static_cast<double>(batch.size());
}

namespace {

constexpr const char* kModelMagic = "selmix-model";
constexpr int kModelFormatVersion = 1;

void write_values(std::ostream& out, const char* tag, const std::vector<double>& values) {
  out << tag;
  for (double v : values) out << ' ' << text::format_double(v);
  out << '\n';
}

std::vector<double> read_values(std::istream& in, const char* tag, std::size_t count) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, std::string("missing '") + tag + "' line");
  std::istringstream fields(line);
  std::string word;
  fields >> word;
  if (word != tag) throw ParseError(0, std::string("expected '") + tag + "' line");
  std::vector<double> values;
  values.reserve(count);
  while (fields >> word) {
    auto v = text::parse_double(word);
    if (!v) throw ParseError(0, "bad number '" + word + "'");
    values.push_back(*v);
  }
  if (values.size() != count) throw ParseError(0, std::string("wrong value count on '") + tag + "'");
  return values;
}

template <typename T>
T read_field(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "missing field '" + key + "'");
  std::istringstream fields(line);
  std::string name;
  T value{};
  if (!(fields >> name >> value) || name != key) {
    throw ParseError(0, "expected field '" + key + "'");
  }
  return value;
}

}  // namespace

void save_model(std::ostream& out, const Model& model) {
  const auto& spec = model.spec();
  out << kModelMagic << ' ' << kModelFormatVersion << '\n';
  out << "arch " << (spec.arch == Architecture::linear ? "linear" : "mlp") << '\n';
  out << "input_dim " << spec.input_dim << '\n';
  out << "num_classes " << spec.num_classes << '\n';
  out << "hidden_units " << spec.hidden_units << '\n';
  out << "init_scale " << text::format_double(spec.init_scale) << '\n';
  out << "seed " << spec.seed << '\n';
  out << "layers " << model.parameters().layers.size() << '\n';
  for (const auto& layer : model.parameters().layers) {
    out << "layer " << layer.outputs << ' ' << layer.inputs << '\n';
    write_values(out, "w", layer.weights);
    write_values(out, "b", layer.bias);
  }
}

Model load_model(std::istream& in) {
  std::string magic;
  int version = 0;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty model file");
  std::istringstream head(line);
  if (!(head >> magic >> version) || magic != kModelMagic) throw ParseError(1, "not a model file");
  if (version != kModelFormatVersion) {
    throw ParseError(1, "unsupported model format version " + std::to_string(version));
  }
  ModelSpec spec;
  const auto arch = read_field<std::string>(in, "arch");
  if (arch == "linear") {
    spec.arch = Architecture::linear;
  } else if (arch == "mlp") {
    spec.arch = Architecture::mlp;
  } else {
    throw ParseError(2, "unknown architecture '" + arch + "'");
  }
  spec.input_dim = read_field<int>(in, "input_dim");
  spec.num_classes = read_field<int>(in, "num_classes");
  spec.hidden_units = read_field<int>(in, "hidden_units");
  const auto scale = text::parse_double(read_field<std::string>(in, "init_scale"));
  if (!scale) throw ParseError(6, "bad init_scale");
  spec.init_scale = *scale;
  spec.seed = read_field<std::uint64_t>(in, "seed");
  const auto num_layers = read_field<std::size_t>(in, "layers");
  Parameters params;
  for (std::size_t l = 0; l < num_layers; ++l) {
    if (!std::getline(in, line)) throw ParseError(0, "missing layer header");
    std::istringstream fields(line);
    std::string tag;
    DenseLayer layer;
    if (!(fields >> tag >> layer.outputs >> layer.inputs) || tag != "layer" || layer.inputs < 1 ||
        layer.outputs < 1) {
      throw ParseError(0, "bad layer header");
    }
    layer.weights = read_values(in, "w", static_cast<std::size_t>(layer.inputs * layer.outputs));
    layer.bias = read_values(in, "b", static_cast<std::size_t>(layer.outputs));
    params.layers.push_back(std::move(layer));
  }
  return Model(spec, std::move(params));
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file " + path.string());
  save_model(out, model);
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file " + path.string());
  return load_model(in);
}

}  // namespace selmix
