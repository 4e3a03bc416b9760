#include "selmix/strategies.hpp"

#include <algorithm>
#include <numeric>

#include "selmix/error.hpp"
#include "selmix/text.hpp"

namespace selmix {

SamplingStrategy SamplingStrategy::vanilla_mixup() {
  SamplingStrategy s;
  s.treatment = PairTreatment::vanilla_mixup;
  return s;
}

SamplingStrategy SamplingStrategy::resampled(ResampleAxis axis) {
  if (axis == ResampleAxis::target) {
    throw InvalidArgument("target resampling needs a distribution; use resampled_to");
  }
  SamplingStrategy s;
  s.resample = axis;
  return s;
}

SamplingStrategy SamplingStrategy::resampled_to(ClassDistribution target) {
  SamplingStrategy s;
  s.resample = ResampleAxis::target;
  s.target = std::move(target);
  return s;
}

SamplingStrategy SamplingStrategy::selective_mixup(PairCriterion criterion, SelectionMode mode) {
  SamplingStrategy s;
  s.treatment = PairTreatment::selective_mixup;
  s.criterion = criterion;
  s.mode = mode;
  return s;
}

SamplingStrategy SamplingStrategy::selective_sampling(PairCriterion criterion,
                                                      SelectionMode mode) {
  SamplingStrategy s;
  s.treatment = PairTreatment::selective_sampling;
  s.criterion = criterion;
  s.mode = mode;
  return s;
}

SamplingStrategy SamplingStrategy::with_resampling(ResampleAxis axis) const {
  SamplingStrategy s = *this;
  s.resample = axis;
  return s;
}

namespace {

std::string axis_name(const SamplingStrategy& s) {
  switch (s.resample) {
    case ResampleAxis::none:
      return "";
    case ResampleAxis::class_:
      return "class";
    case ResampleAxis::domain:
      return "domain";
    case ResampleAxis::group:
      return "group";
    case ResampleAxis::target: {
      if (s.target_from_test || !s.target) return "target=test";
      std::string out = "target=";
      for (std::size_t i = 0; i < s.target->size(); ++i) {
        if (i) out += '/';
        out += text::format_double((*s.target)[i]);
      }
      return out;
    }
  }
  return "";
}

std::string selective_suffix(const SamplingStrategy& s) {
  std::string out = to_string(s.criterion);
  if (s.mode == SelectionMode::class_uniform) out += "@class_uniform";
  return out;
}

std::string treatment_name(const SamplingStrategy& s) {
  switch (s.treatment) {
    case PairTreatment::none:
      return "";
    case PairTreatment::vanilla_mixup:
      return "vanilla_mixup";
    case PairTreatment::concat_pairs:
      return "concat_pairs";
    case PairTreatment::selective_mixup:
      return "selective_mixup:" + selective_suffix(s);
    case PairTreatment::selective_sampling:
      return "selective_sampling:" + selective_suffix(s);
  }
  return "";
}

void parse_axis(std::string_view text, SamplingStrategy& s) {
  if (text == "class") {
    s.resample = ResampleAxis::class_;
  } else if (text == "domain") {
    s.resample = ResampleAxis::domain;
  } else if (text == "group") {
    s.resample = ResampleAxis::group;
  } else if (text.starts_with("target=")) {
    s.resample = ResampleAxis::target;
    const auto spec = text.substr(7);
    if (spec == "test") {
      s.target_from_test = true;
      return;
    }
    std::vector<double> probs;
    for (const auto& part : text::split(spec, '/')) {
      auto v = text::parse_double(part);
      if (!v) throw InvalidArgument("bad target probability '" + part + "'");
      probs.push_back(*v);
    }
    s.target = ClassDistribution(std::move(probs));
  } else {
    throw InvalidArgument("unknown resampling axis '" + std::string(text) + "'");
  }
}

void parse_selective(std::string_view text, SamplingStrategy& s) {
  auto at = text.find('@');
  s.criterion = parse_criterion(text.substr(0, at));
  if (at != std::string_view::npos) s.mode = parse_selection_mode(text.substr(at + 1));
  if (s.criterion.is_random()) {
    throw InvalidArgument("selective strategies need a non-random criterion");
  }
}

void parse_treatment(std::string_view text, SamplingStrategy& s, bool after_resample) {
  if (text == "vanilla_mixup") {
    s.treatment = PairTreatment::vanilla_mixup;
  } else if (text == "concat_pairs" && after_resample) {
    s.treatment = PairTreatment::concat_pairs;
  } else if (text.starts_with("selective_mixup:")) {
    s.treatment = PairTreatment::selective_mixup;
    parse_selective(text.substr(16), s);
  } else if (text.starts_with("selective_sampling:")) {
    s.treatment = PairTreatment::selective_sampling;
    parse_selective(text.substr(19), s);
  } else {
    throw InvalidArgument("unknown strategy '" + std::string(text) + "'");
  }
}

}  // namespace

std::string to_string(const SamplingStrategy& s) {
  const auto axis = axis_name(s);
  const auto treatment = treatment_name(s);
  if (axis.empty()) return treatment.empty() ? "erm" : treatment;
  return "resample:" + axis + (treatment.empty() ? "" : "+" + treatment);
}

SamplingStrategy parse_strategy(std::string_view text) {
  text = text::trim(text);
  SamplingStrategy s;
  if (text == "erm") return s;
  if (text.starts_with("resample:")) {
    const auto rest = text.substr(9);
    const auto plus = rest.find('+');
    parse_axis(rest.substr(0, plus), s);
    if (plus != std::string_view::npos) parse_treatment(rest.substr(plus + 1), s, true);
    return s;
  }
  parse_treatment(text, s, false);
  return s;
}

BatchSampler::BatchSampler(const Dataset& data, const PairPool& pool, SamplingStrategy strategy,
                           int max_partner_retries)
    : data_(&data),
      pool_(&pool),
      strategy_(std::move(strategy)),
      max_retries_(max_partner_retries) {
  if (pool.size() != data.size()) throw InvalidArgument("pair pool built from another dataset");
  if (strategy_.selective()) {
    if (strategy_.criterion.is_random()) {
      throw InvalidArgument("selective strategies need a non-random criterion");
    }
    partners_.emplace(pool, strategy_.criterion, strategy_.mode);
  }

  if (strategy_.resample == ResampleAxis::none) return;

  std::vector<double> weights(data.size(), 0.0);
  switch (strategy_.resample) {
    case ResampleAxis::none:
      break;
    case ResampleAxis::class_: {
      const auto counts = data.class_counts();
      for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) {
          warnings_.push_back("class " + std::to_string(c) + " is empty; it receives zero weight");
        }
      }
      for (std::size_t i = 0; i < data.size(); ++i) {
        weights[i] = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(data[i].class_index)]);
      }
      break;
    }
    case ResampleAxis::domain: {
      const auto counts = data.domain_counts();
      for (std::size_t d = 0; d < counts.size(); ++d) {
        if (counts[d] == 0) {
          warnings_.push_back("domain " + std::to_string(d) + " is empty; it receives zero weight");
        }
      }
      for (std::size_t i = 0; i < data.size(); ++i) {
        weights[i] =
            1.0 / static_cast<double>(counts[static_cast<std::size_t>(data[i].domain_index)]);
      }
      break;
    }
    case ResampleAxis::group: {
      const auto counts = data.group_counts();
      for (std::size_t g = 0; g < counts.size(); ++g) {
        if (counts[g] == 0) {
          warnings_.push_back("group (class " + std::to_string(g / data.num_domains()) +
                              ", domain " + std::to_string(g % data.num_domains()) +
                              ") is empty; it receives zero weight");
        }
      }
      for (std::size_t i = 0; i < data.size(); ++i) {
        weights[i] = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(data.group_of(data[i]))]);
      }
      break;
    }
    case ResampleAxis::target: {
      if (!strategy_.target) {
        throw InvalidArgument("target resampling without a resolved target distribution");
      }
      const auto& target = *strategy_.target;
      if (target.size() != static_cast<std::size_t>(data.num_classes())) {
        throw InvalidArgument("target distribution has the wrong number of classes");
      }
      const auto counts = data.class_counts();
      for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0 && target[c] > 0.0) {
          warnings_.push_back("class " + std::to_string(c) +
                              " is empty; its target mass cannot be sampled");
        }
      }
      const double n = static_cast<double>(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto c = static_cast<std::size_t>(data[i].class_index);
        weights[i] = target[c] / (static_cast<double>(counts[c]) / n);
      }
      break;
    }
  }

  cumulative_.resize(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative_.begin());
  if (!(cumulative_.back() > 0.0)) {
    throw InvalidArgument("resampling weights are all zero");
  }
}

std::vector<double> BatchSampler::anchor_probabilities() const {
  const std::size_t n = data_->size();
  std::vector<double> probs(n, 1.0 / static_cast<double>(n));
  if (cumulative_.empty()) return probs;
  const double total = cumulative_.back();
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = (cumulative_[i] - (i ? cumulative_[i - 1] : 0.0)) / total;
  }
  return probs;
}

std::size_t BatchSampler::draw_anchor(Rng& rng) const {
  if (cumulative_.empty()) return uniform_index(rng, data_->size());
  const double r = uniform01(rng) * cumulative_.back();
  // First position whose cumulative weight exceeds r; zero-weight positions
  // repeat their predecessor's value and are never selected.
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
  return static_cast<std::size_t>(it - cumulative_.begin());
}

std::size_t BatchSampler::draw_anchor_with_partner(Rng& rng) const {
  std::size_t anchor = draw_anchor(rng);
  for (int attempt = 0; !partners_->has_partner((*data_)[anchor].class_index,
                                                (*data_)[anchor].domain_index);
       ++attempt) {
    if (attempt >= max_retries_) {
      throw PartnerStarvationError((*data_)[anchor].class_index, (*data_)[anchor].domain_index,
                                   max_retries_);
    }
    anchor = draw_anchor(rng);
  }
  return anchor;
}

std::size_t BatchSampler::draw_partner(std::size_t anchor, Rng& rng) const {
  if (partners_) {
    const auto& e = (*data_)[anchor];
    return partners_->draw(e.class_index, e.domain_index, rng);
  }
  return uniform_index(rng, data_->size());
}

Minibatch BatchSampler::next(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
  Minibatch batch;
  batch.items.reserve(batch_size);
  const auto& data = *data_;

  switch (strategy_.treatment) {
    case PairTreatment::none:
      for (std::size_t k = 0; k < batch_size; ++k) batch.items.emplace_back(PlainItem{draw_anchor(rng)});
      break;

    case PairTreatment::vanilla_mixup:
    case PairTreatment::selective_mixup:
      for (std::size_t k = 0; k < batch_size; ++k) {
        const std::size_t a = partners_ ? draw_anchor_with_partner(rng) : draw_anchor(rng);
        const std::size_t b = draw_partner(a, rng);
        const auto c = sample_mix_coefficient(rng);
        MixedExample mixed = mix_examples(data[a], data[b], c, data.num_classes());
        mixed.source_a = a;
        mixed.source_b = b;
        batch.items.emplace_back(std::move(mixed));
      }
      break;

    case PairTreatment::selective_sampling:
    case PairTreatment::concat_pairs: {
      // Both elements of batch_size pairs, then half of the 2 * batch_size
      // instances dropped uniformly at random.
      std::vector<std::size_t> instances;
      instances.reserve(2 * batch_size);
      for (std::size_t k = 0; k < batch_size; ++k) {
        const std::size_t a = partners_ ? draw_anchor_with_partner(rng) : draw_anchor(rng);
        instances.push_back(a);
        instances.push_back(draw_partner(a, rng));
      }
      std::vector<std::size_t> order(instances.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t k = 0; k < batch_size; ++k) {
        const std::size_t j = k + uniform_index(rng, order.size() - k);
        std::swap(order[k], order[j]);
      }
      order.resize(batch_size);
      std::sort(order.begin(), order.end());
      for (std::size_t pos : order) batch.items.emplace_back(PlainItem{instances[pos]});
      break;
    }
  }
  return batch;
}

Minibatch build_minibatch(const Dataset& data, const PairPool& pool,
                          const SamplingStrategy& strategy, std::size_t batch_size, Rng& rng) {
  return BatchSampler(data, pool, strategy).next(batch_size, rng);
}

std::span<const double> item_features(const BatchItem& item, const Dataset& data) {
  if (const auto* plain = std::get_if<PlainItem>(&item)) return data[plain->index].features;
  return std::get<MixedExample>(item).features;
}

std::vector<double> item_label(const BatchItem& item, const Dataset& data) {
  if (const auto* plain = std::get_if<PlainItem>(&item)) {
    return data[plain->index].one_hot(data.num_classes());
  }
  return std::get<MixedExample>(item).soft_label;
}

SampledDistribution effective_sampled_distribution(const Dataset& data, const PairPool& pool,
                                                   const SamplingStrategy& strategy,
                                                   std::size_t num_draws, Rng& rng,
                                                   std::size_t batch_size) {
  if (num_draws == 0) throw InvalidArgument("num_draws must be at least 1");
  BatchSampler sampler(data, pool, strategy);
  std::vector<double> classes(static_cast<std::size_t>(data.num_classes()), 0.0);
  std::vector<double> domains(static_cast<std::size_t>(data.num_domains()), 0.0);
  std::vector<double> groups(static_cast<std::size_t>(data.num_groups()), 0.0);
  auto credit = [&](std::size_t index, double weight) {
    const auto& e = data[index];
    classes[static_cast<std::size_t>(e.class_index)] += weight;
    domains[static_cast<std::size_t>(e.domain_index)] += weight;
    groups[static_cast<std::size_t>(data.group_of(e))] += weight;
  };

  std::size_t remaining = num_draws;
  while (remaining > 0) {
    const auto batch = sampler.next(std::min(batch_size, remaining), rng);
    for (const auto& item : batch.items) {
      if (const auto* plain = std::get_if<PlainItem>(&item)) {
        credit(plain->index, 1.0);
      } else {
        const auto& mixed = std::get<MixedExample>(item);
        credit(mixed.source_a, mixed.coefficient);
        credit(mixed.source_b, 1.0 - mixed.coefficient);
      }
    }
    remaining -= batch.size();
  }

  auto normalize = [](std::vector<double>& v) {
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    for (double& x : v) x /= total;
  };
  normalize(classes);
  normalize(domains);
  normalize(groups);
  return {ClassDistribution(std::move(classes)), std::move(domains), std::move(groups)};
}

}  // namespace selmix
