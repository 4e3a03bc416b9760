#include "selmix/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "selmix/error.hpp"
#include "selmix/random.hpp"
#include "selmix/text.hpp"

namespace selmix {

void SynthMetadata::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> SynthMetadata::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void SynthMetadata::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write metadata " + path.string());
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
}

SynthMetadata SynthMetadata::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open metadata " + path.string());
  SynthMetadata meta;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string_view::npos) throw ParseError(row, "expected 'key = value'");
    meta.set(std::string(text::trim(trimmed.substr(0, eq))),
             std::string(text::trim(trimmed.substr(eq + 1))));
  }
  return meta;
}

namespace {

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += text::format_double(values[i]);
  }
  return out;
}

bool open_fraction(double v) { return v > 0.0 && v < 1.0; }

}  // namespace

void SpuriousCorrConfig::validate() const {
  if (n_train == 0 || n_val == 0 || n_test == 0) throw InvalidArgument("split sizes must be positive");
  if (!open_fraction(class_balance_train)) throw InvalidArgument("class_balance_train must be in (0, 1)");
  if (!open_fraction(spurious_strength_train) || !open_fraction(spurious_strength_val) ||
      !open_fraction(spurious_strength_test)) {
    throw InvalidArgument("spurious strengths must be in (0, 1)");
  }
  if (core_signal < 0.0 || spurious_signal < 0.0) throw InvalidArgument("signals must be non-negative");
  if (noise_dim < 0) throw InvalidArgument("noise_dim must be non-negative");
}

SpuriousCorrData gen_spurious_correlation(const SpuriousCorrConfig& config) {
  config.validate();
  SynthMetadata meta;
  meta.set("generator", "spurious_correlation");
  meta.set("config.n_train", std::to_string(config.n_train));
  meta.set("config.n_val", std::to_string(config.n_val));
  meta.set("config.n_test", std::to_string(config.n_test));
  meta.set("config.class_balance_train", text::format_double(config.class_balance_train));
  meta.set("config.spurious_strength_train", text::format_double(config.spurious_strength_train));
  meta.set("config.spurious_strength_val", text::format_double(config.spurious_strength_val));
  meta.set("config.spurious_strength_test", text::format_double(config.spurious_strength_test));
  meta.set("config.core_signal", text::format_double(config.core_signal));
  meta.set("config.spurious_signal", text::format_double(config.spurious_signal));
  meta.set("config.noise_dim", std::to_string(config.noise_dim));
  meta.set("config.seed", std::to_string(config.seed));
  meta.set("feature_legend", "f0=core,f1=spurious,f2..=noise");
  meta.set("group_legend", "(0,0),(0,1),(1,0),(1,1)");

  auto make_split = [&](Split split, std::size_t n, double strength, std::uint64_t stream) {
    Rng rng = make_rng(config.seed, stream);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Example> examples;
    examples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Example e;
      e.class_index = uniform01(rng) < config.class_balance_train ? 0 : 1;
      const bool agrees = uniform01(rng) < strength;
      e.domain_index = agrees ? e.class_index : 1 - e.class_index;
      e.features.reserve(static_cast<std::size_t>(2 + config.noise_dim));
      e.features.push_back((e.class_index == 1 ? 0.5 : -0.5) * config.core_signal + noise(rng));
      e.features.push_back((e.domain_index == 1 ? 0.5 : -0.5) * config.spurious_signal + noise(rng));
      for (int k = 0; k < config.noise_dim; ++k) e.features.push_back(noise(rng));
      examples.push_back(std::move(e));
    }
    Dataset data(std::move(examples), 2, 2, split);
    const auto counts = data.group_counts();
    for (std::size_t g = 0; g < counts.size(); ++g) {
      if (counts[g] == 0) {
        throw InvalidArgument("split '" + std::string(to_string(split)) + "' has no example in group (class " +
                              std::to_string(g / 2) + ", domain " + std::to_string(g % 2) + ")");
      }
    }
    meta.set("realized." + std::string(to_string(split)) + ".group_counts", join(counts));
    return data;
  };

  Dataset train = make_split(Split::train, config.n_train, config.spurious_strength_train, 1);
  Dataset val = make_split(Split::validation, config.n_val, config.spurious_strength_val, 2);
  Dataset test = make_split(Split::test, config.n_test, config.spurious_strength_test, 3);
  return {std::move(train), std::move(val), std::move(test), std::move(meta)};
}

void TemporalShiftConfig::validate() const {
  if (num_domains < 2) throw InvalidArgument("need at least 2 domains");
  if (num_classes < 2) throw InvalidArgument("need at least 2 classes");
  if (dim < 2) throw InvalidArgument("dim must be at least 2");
  if (static_cast<int>(class_ratio_schedule.size()) != num_domains) {
    throw InvalidArgument("class_ratio_schedule has " + std::to_string(class_ratio_schedule.size()) +
                          " entries for " + std::to_string(num_domains) + " domains");
  }
  for (double s : class_ratio_schedule) {
    if (!open_fraction(s)) throw InvalidArgument("schedule entries must be in (0, 1)");
  }
  auto valid_range = [&](const DomainRange& r) {
    return r.first >= 0 && r.last <= num_domains && r.first < r.last;
  };
  if (!valid_range(train_domains) || !valid_range(test_domains)) {
    throw InvalidArgument("domain ranges must be non-empty and within [0, num_domains)");
  }
  if (train_domains.first < test_domains.last && test_domains.first < train_domains.last) {
    throw InvalidArgument("train and test domain ranges overlap");
  }
  if (n_per_domain == 0 || n_val_per_domain == 0) throw InvalidArgument("domain sizes must be positive");
  if (class_separation < 0.0) throw InvalidArgument("class_separation must be non-negative");
}

TemporalShiftConfig TemporalShiftConfig::reversed() const {
  TemporalShiftConfig out = *this;
  std::swap(out.train_domains, out.test_domains);
  return out;
}

TemporalShiftData gen_temporal_label_shift(const TemporalShiftConfig& config) {
  config.validate();
  SynthMetadata meta;
  meta.set("generator", "temporal_label_shift");
  meta.set("config.num_domains", std::to_string(config.num_domains));
  meta.set("config.train_domains",
           std::to_string(config.train_domains.first) + ":" + std::to_string(config.train_domains.last));
  meta.set("config.test_domains",
           std::to_string(config.test_domains.first) + ":" + std::to_string(config.test_domains.last));
  meta.set("config.class_ratio_schedule", join(config.class_ratio_schedule));
  meta.set("config.covariate_drift_rate", text::format_double(config.covariate_drift_rate));
  meta.set("config.class_separation", text::format_double(config.class_separation));
  meta.set("config.n_per_domain", std::to_string(config.n_per_domain));
  meta.set("config.n_val_per_domain", std::to_string(config.n_val_per_domain));
  meta.set("config.num_classes", std::to_string(config.num_classes));
  meta.set("config.dim", std::to_string(config.dim));
  meta.set("config.seed", std::to_string(config.seed));

  const auto dim = static_cast<std::size_t>(config.dim);
  const double axis_offset = config.class_separation / std::sqrt(2.0);
  const double drift_unit = config.covariate_drift_rate / std::sqrt(static_cast<double>(dim));

  // Class k is centred on axis (k mod dim); drift moves every class along
  // the diagonal, orthogonal to the binary class contrast.
  auto draw_domain = [&](int domain, std::size_t n, std::uint64_t stream) {
    Rng rng = make_rng(config.seed, stream);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double p0 = config.class_ratio_schedule[static_cast<std::size_t>(domain)];
    const double p_other = (1.0 - p0) / (config.num_classes - 1);
    std::vector<Example> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Example e;
      const double u = uniform01(rng);
      if (u < p0) {
        e.class_index = 0;
      } else {
        e.class_index = 1 + std::min(config.num_classes - 2, static_cast<int>((u - p0) / p_other));
      }
      e.domain_index = domain;
      e.features.resize(dim);
      const auto axis = static_cast<std::size_t>(e.class_index) % dim;
      for (std::size_t k = 0; k < dim; ++k) {
        e.features[k] = (k == axis ? axis_offset : 0.0) + drift_unit * domain + noise(rng);
      }
      out.push_back(std::move(e));
    }
    return out;
  };

  std::vector<Example> train;
  std::vector<Example> val;
  for (int d = config.train_domains.first; d < config.train_domains.last; ++d) {
    auto t = draw_domain(d, config.n_per_domain, 1000 + static_cast<std::uint64_t>(d));
    auto v = draw_domain(d, config.n_val_per_domain, 2000 + static_cast<std::uint64_t>(d));
    train.insert(train.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
    val.insert(val.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  Dataset train_set(std::move(train), config.num_classes, config.num_domains, Split::train);
  Dataset val_set(std::move(val), config.num_classes, config.num_domains, Split::validation);
  meta.set("realized.train.class_counts", join(train_set.class_counts()));
  meta.set("realized.val.class_counts", join(val_set.class_counts()));

  std::vector<Dataset> tests;
  for (int d = config.test_domains.first; d < config.test_domains.last; ++d) {
    tests.emplace_back(draw_domain(d, config.n_per_domain, 3000 + static_cast<std::uint64_t>(d)),
                       config.num_classes, config.num_domains, Split::test);
    meta.set("realized.test." + std::to_string(d) + ".class_counts", join(tests.back().class_counts()));
  }
  return {std::move(train_set), std::move(val_set), std::move(tests), std::move(meta)};
}

}  // namespace selmix
