#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selmix/core_data.hpp"
#include "selmix/random.hpp"

namespace selmix {

enum class Relation { any, same, different };

// The pairing predicate: a partner is accepted when both its class and its
// domain stand in the required relation to the anchor's.
struct PairCriterion {
  Relation class_relation = Relation::any;
  Relation domain_relation = Relation::any;

  bool accepts(int anchor_class, int anchor_domain, int class_index,
               int domain_index) const;
  bool accepts(const Example& anchor, const Example& candidate) const {
    return accepts(anchor.class_index, anchor.domain_index, candidate.class_index,
                   candidate.domain_index);
  }
  // Both relations are `any`: the random pairing of vanilla mixup.
  bool is_random() const {
    return class_relation == Relation::any && domain_relation == Relation::any;
  }

  friend bool operator==(const PairCriterion&, const PairCriterion&) = default;
};

// Canonical text: "diff_class", "same_domain", "diff_class+same_domain",
// "any" for the random criterion.
std::string to_string(const PairCriterion& criterion);
PairCriterion parse_criterion(std::string_view text);

// How a partner is drawn among the eligible examples.
//   example_uniform: every eligible example is equally likely.
//   class_uniform:   a class is drawn uniformly among the classes holding
//                    eligible examples, then an example uniformly within it.
enum class SelectionMode { example_uniform, class_uniform };

std::string_view to_string(SelectionMode mode);
SelectionMode parse_selection_mode(std::string_view text);

// Example positions bucketed by (class, domain), with class and domain
// rollups. Immutable once built.
class PairPool {
 public:
  explicit PairPool(const Dataset& data);

  int num_classes() const { return num_classes_; }
  int num_domains() const { return num_domains_; }
  std::size_t size() const { return size_; }

  std::span<const std::size_t> bucket(int class_index, int domain_index) const {
    return buckets_[static_cast<std::size_t>(class_index * num_domains_ + domain_index)];
  }
  std::span<const std::size_t> class_members(int class_index) const {
    return by_class_[static_cast<std::size_t>(class_index)];
  }
  std::span<const std::size_t> domain_members(int domain_index) const {
    return by_domain_[static_cast<std::size_t>(domain_index)];
  }

  // Number of examples the criterion accepts for an anchor of this group.
  std::size_t eligible_count(int anchor_class, int anchor_domain,
                             const PairCriterion& criterion) const;
  bool has_partner(int anchor_class, int anchor_domain,
                   const PairCriterion& criterion) const {
    return eligible_count(anchor_class, anchor_domain, criterion) > 0;
  }

 private:
  int num_classes_;
  int num_domains_;
  std::size_t size_;
  std::vector<std::vector<std::size_t>> buckets_;
  std::vector<std::vector<std::size_t>> by_class_;
  std::vector<std::vector<std::size_t>> by_domain_;
};

PairPool build_pair_pool(const Dataset& data);

// Precomputed partner draw tables for one (criterion, mode), one per anchor
// group. Used on the hot path of batch construction.
class PartnerSampler {
 public:
  PartnerSampler(const PairPool& pool, PairCriterion criterion, SelectionMode mode);

  bool has_partner(int anchor_class, int anchor_domain) const;
  // Position of the partner in the dataset. Throws NoPartnerError.
  std::size_t draw(int anchor_class, int anchor_domain, Rng& rng) const;

  const PairCriterion& criterion() const { return criterion_; }
  SelectionMode mode() const { return mode_; }

 private:
  // One stage per class under class_uniform, a single stage otherwise.
  struct Stage {
    std::vector<int> buckets;
    std::vector<std::size_t> cumulative;
  };
  using Table = std::vector<Stage>;

  const PairPool* pool_;
  PairCriterion criterion_;
  SelectionMode mode_;
  std::vector<Table> tables_;  // indexed by anchor group

  friend std::size_t select_partner(const Example&, const PairPool&, const PairCriterion&,
                                    SelectionMode, Rng&);
  static Table make_table(const PairPool& pool, const PairCriterion& criterion,
                          SelectionMode mode, int anchor_class, int anchor_domain);
  static std::size_t draw_from(const PairPool& pool, const Table& table, Rng& rng);
};

// Draws a partner accepted by `criterion` for `anchor` and returns its
// position in the dataset the pool was built from. The anchor itself may be
// returned when it satisfies the predicate. Throws NoPartnerError.
std::size_t select_partner(const Example& anchor, const PairPool& pool,
                           const PairCriterion& criterion, SelectionMode mode, Rng& rng);

// Class distribution of the partners ("virtual data") when anchors follow `p`.
//
// same class: p itself. different class:
//   class_uniform    (1 - p_i) / (K - 1) over the K classes with p_i > 0
//   example_uniform  sum_{j != i} p_j * p_i / (1 - p_j)
// Only the class relation has a closed form; the domain relation must be
// `any`. Throws InvalidArgument otherwise, or when a different-class
// criterion meets a distribution with a single populated class.
ClassDistribution virtual_class_distribution(const ClassDistribution& p,
                                             const PairCriterion& criterion,
                                             SelectionMode mode);

// Element-wise (p + q) / 2.
ClassDistribution combined_distribution(const ClassDistribution& p,
                                        const ClassDistribution& q);

}  // namespace selmix
