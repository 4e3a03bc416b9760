#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "selmix/core_data.hpp"
#include "selmix/mixing.hpp"
#include "selmix/pairing.hpp"
#include "selmix/random.hpp"

namespace selmix {

// How the first element of every training item (the anchor) is drawn.
enum class ResampleAxis {
  none,    // uniform over examples (ERM)
  class_,  // weight 1 / count(class)
  domain,  // weight 1 / count(domain)
  group,   // weight 1 / count(class, domain)
  target,  // weight target(class) / p(class)
};

// What happens after the anchor is drawn.
enum class PairTreatment {
  none,                // the anchor enters the batch as is
  vanilla_mixup,       // mixed with a uniformly drawn partner
  selective_mixup,     // mixed with a partner accepted by the criterion
  selective_sampling,  // anchor and selected partner enter unmixed, half dropped
  concat_pairs,        // anchor and uniform partner enter unmixed, half dropped
};

// A training-distribution strategy.
//
// Canonical names (the experiment config format):
//   erm | vanilla_mixup
//   resample:<axis>                       axis = class | domain | group |
//                                                target=<p0>/<p1>/... | target=test
//   selective_mixup:<criterion>[@<mode>]
//   selective_sampling:<criterion>[@<mode>]
//   resample:<axis>+vanilla_mixup | resample:<axis>+concat_pairs
//   resample:<axis>+selective_mixup:<criterion>[@<mode>]
//   resample:<axis>+selective_sampling:<criterion>[@<mode>]
// with <criterion> as in parse_criterion and <mode> = example_uniform
// (default) | class_uniform.
struct SamplingStrategy {
  ResampleAxis resample = ResampleAxis::none;
  // Class proportions to resample toward; set when resample == target unless
  // target_from_test is true (resolved by the caller from the test split).
  std::optional<ClassDistribution> target;
  bool target_from_test = false;
  PairTreatment treatment = PairTreatment::none;
  PairCriterion criterion;
  SelectionMode mode = SelectionMode::example_uniform;

  static SamplingStrategy erm() { return {}; }
  static SamplingStrategy vanilla_mixup();
  static SamplingStrategy resampled(ResampleAxis axis);
  static SamplingStrategy resampled_to(ClassDistribution target);
  static SamplingStrategy selective_mixup(PairCriterion criterion,
                                          SelectionMode mode = SelectionMode::example_uniform);
  static SamplingStrategy selective_sampling(PairCriterion criterion,
                                             SelectionMode mode = SelectionMode::example_uniform);

  // Same strategy with anchors drawn along `axis`.
  SamplingStrategy with_resampling(ResampleAxis axis) const;

  bool mixes() const {
    return treatment == PairTreatment::vanilla_mixup ||
           treatment == PairTreatment::selective_mixup;
  }
  bool selective() const {
    return treatment == PairTreatment::selective_mixup ||
           treatment == PairTreatment::selective_sampling;
  }
};

std::string to_string(const SamplingStrategy& strategy);
SamplingStrategy parse_strategy(std::string_view text);

struct PlainItem {
  std::size_t index = 0;
};
using BatchItem = std::variant<PlainItem, MixedExample>;

struct Minibatch {
  std::vector<BatchItem> items;
  std::size_t size() const { return items.size(); }
};

inline constexpr int kDefaultPartnerRetries = 100;

// Batch construction for one (dataset, strategy). Immutable after
// construction; `next` is pure given the generator.
class BatchSampler {
 public:
  // Throws InvalidArgument for infeasible strategies (no positive anchor
  // weight, unresolved test target, random criterion on a selective
  // strategy). Empty resampling cells are recorded in warnings().
  BatchSampler(const Dataset& data, const PairPool& pool, SamplingStrategy strategy,
               int max_partner_retries = kDefaultPartnerRetries);

  // Exactly `batch_size` items. Throws PartnerStarvationError when an anchor
  // group keeps lacking partners.
  Minibatch next(std::size_t batch_size, Rng& rng) const;

  const SamplingStrategy& strategy() const { return strategy_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  // Normalized anchor probability per example.
  std::vector<double> anchor_probabilities() const;

 private:
  std::size_t draw_anchor(Rng& rng) const;
  std::size_t draw_anchor_with_partner(Rng& rng) const;
  std::size_t draw_partner(std::size_t anchor, Rng& rng) const;

  const Dataset* data_;
  const PairPool* pool_;
  SamplingStrategy strategy_;
  int max_retries_;
  std::vector<double> cumulative_;  // empty for uniform anchors
  std::optional<PartnerSampler> partners_;
  std::vector<std::string> warnings_;
};

Minibatch build_minibatch(const Dataset& data, const PairPool& pool,
                          const SamplingStrategy& strategy, std::size_t batch_size, Rng& rng);

// Features and label of a batch item.
std::span<const double> item_features(const BatchItem& item, const Dataset& data);
std::vector<double> item_label(const BatchItem& item, const Dataset& data);

// Marginal class/domain/group frequencies of the items a strategy feeds to
// the loss. A mixed item credits its sources with c and 1 - c.
struct SampledDistribution {
  ClassDistribution classes;
  std::vector<double> domains;
  std::vector<double> groups;
};

SampledDistribution effective_sampled_distribution(const Dataset& data, const PairPool& pool,
                                                   const SamplingStrategy& strategy,
                                                   std::size_t num_draws, Rng& rng,
                                                   std::size_t batch_size = 256);

}  // namespace selmix
