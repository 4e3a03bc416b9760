#include "selmix/pairing.hpp"

#include <algorithm>

#include "selmix/error.hpp"
#include "selmix/text.hpp"

namespace selmix {

namespace {

bool relation_holds(Relation r, int anchor, int candidate) {
  switch (r) {
    case Relation::any:
      return true;
    case Relation::same:
      return anchor == candidate;
    case Relation::different:
      return anchor != candidate;
  }
  return false;
}

}  // namespace

bool PairCriterion::accepts(int anchor_class, int anchor_domain, int class_index,
                            int domain_index) const {
  return relation_holds(class_relation, anchor_class, class_index) &&
         relation_holds(domain_relation, anchor_domain, domain_index);
}

std::string to_string(const PairCriterion& criterion) {
  std::string out;
  auto append = [&out](Relation r, const char* attribute) {
    if (r == Relation::any) return;
    if (!out.empty()) out += '+';
    out += r == Relation::same ? "same_" : "diff_";
    out += attribute;
  };
  append(criterion.class_relation, "class");
  append(criterion.domain_relation, "domain");
  return out.empty() ? "any" : out;
}

PairCriterion parse_criterion(std::string_view text) {
  PairCriterion criterion;
  text = text::trim(text);
  if (text == "any") return criterion;
  bool seen_class = false;
  bool seen_domain = false;
  for (const auto& raw : text::split(text, '+')) {
    const auto part = text::trim(raw);
    Relation r;
    std::string_view attribute;
    if (part.starts_with("same_")) {
      r = Relation::same;
      attribute = part.substr(5);
    } else if (part.starts_with("diff_")) {
      r = Relation::different;
      attribute = part.substr(5);
    } else if (part.starts_with("any_")) {
      r = Relation::any;
      attribute = part.substr(4);
    } else {
      throw InvalidArgument("bad criterion term '" + std::string(part) + "'");
    }
    if (attribute == "class" && !seen_class) {
      criterion.class_relation = r;
      seen_class = true;
    } else if (attribute == "domain" && !seen_domain) {
      criterion.domain_relation = r;
      seen_domain = true;
    } else {
      throw InvalidArgument("bad criterion term '" + std::string(part) + "'");
    }
  }
  return criterion;
}

std::string_view to_string(SelectionMode mode) {
  return mode == SelectionMode::class_uniform ? "class_uniform" : "example_uniform";
}

SelectionMode parse_selection_mode(std::string_view text) {
  text = text::trim(text);
  if (text == "example_uniform") return SelectionMode::example_uniform;
  if (text == "class_uniform") return SelectionMode::class_uniform;
  throw InvalidArgument("unknown selection mode '" + std::string(text) + "'");
}

PairPool::PairPool(const Dataset& data)
    : num_classes_(data.num_classes()),
      num_domains_(data.num_domains()),
      size_(data.size()),
      buckets_(static_cast<std::size_t>(data.num_groups())),
      by_class_(static_cast<std::size_t>(data.num_classes())),
      by_domain_(static_cast<std::size_t>(data.num_domains())) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& e = data[i];
    buckets_[static_cast<std::size_t>(data.group_of(e))].push_back(i);
    by_class_[static_cast<std::size_t>(e.class_index)].push_back(i);
    by_domain_[static_cast<std::size_t>(e.domain_index)].push_back(i);
  }
}

std::size_t PairPool::eligible_count(int anchor_class, int anchor_domain,
                                     const PairCriterion& criterion) const {
  std::size_t total = 0;
  for (int c = 0; c < num_classes_; ++c) {
    for (int d = 0; d < num_domains_; ++d) {
      if (criterion.accepts(anchor_class, anchor_domain, c, d)) total += bucket(c, d).size();
    }
  }
  return total;
}

PairPool build_pair_pool(const Dataset& data) { return PairPool(data); }

PartnerSampler::Table PartnerSampler::make_table(const PairPool& pool,
                                                 const PairCriterion& criterion,
                                                 SelectionMode mode, int anchor_class,
                                                 int anchor_domain) {
  Table table;
  Stage merged;
  for (int c = 0; c < pool.num_classes(); ++c) {
    Stage stage;
    for (int d = 0; d < pool.num_domains(); ++d) {
      const auto n = pool.bucket(c, d).size();
      if (n == 0 || !criterion.accepts(anchor_class, anchor_domain, c, d)) continue;
      Stage& target = mode == SelectionMode::class_uniform ? stage : merged;
      target.buckets.push_back(c * pool.num_domains() + d);
      target.cumulative.push_back((target.cumulative.empty() ? 0 : target.cumulative.back()) + n);
    }
    if (!stage.buckets.empty()) table.push_back(std::move(stage));
  }
  if (!merged.buckets.empty()) table.push_back(std::move(merged));
  return table;
}

std::size_t PartnerSampler::draw_from(const PairPool& pool, const Table& table, Rng& rng) {
  const Stage& stage = table.size() == 1 ? table.front() : table[uniform_index(rng, table.size())];
  const std::size_t r = uniform_index(rng, stage.cumulative.back());
  const auto k = static_cast<std::size_t>(
      std::upper_bound(stage.cumulative.begin(), stage.cumulative.end(), r) -
      stage.cumulative.begin());
  const std::size_t offset = r - (k == 0 ? 0 : stage.cumulative[k - 1]);
  const int g = stage.buckets[k];
  return pool.bucket(g / pool.num_domains(), g % pool.num_domains())[offset];
}

PartnerSampler::PartnerSampler(const PairPool& pool, PairCriterion criterion,
                               SelectionMode mode)
    : pool_(&pool), criterion_(criterion), mode_(mode) {
  tables_.reserve(static_cast<std::size_t>(pool.num_classes() * pool.num_domains()));
  for (int c = 0; c < pool.num_classes(); ++c) {
    for (int d = 0; d < pool.num_domains(); ++d) {
      tables_.push_back(make_table(pool, criterion, mode, c, d));
    }
  }
}

bool PartnerSampler::has_partner(int anchor_class, int anchor_domain) const {
  return !tables_[static_cast<std::size_t>(anchor_class * pool_->num_domains() + anchor_domain)]
              .empty();
}

std::size_t PartnerSampler::draw(int anchor_class, int anchor_domain, Rng& rng) const {
  const auto& table =
      tables_[static_cast<std::size_t>(anchor_class * pool_->num_domains() + anchor_domain)];
  if (table.empty()) throw NoPartnerError(anchor_class, anchor_domain);
  return draw_from(*pool_, table, rng);
}

std::size_t select_partner(const Example& anchor, const PairPool& pool,
                           const PairCriterion& criterion, SelectionMode mode, Rng& rng) {
  const auto table = PartnerSampler::make_table(pool, criterion, mode, anchor.class_index,
                                                anchor.domain_index);
  if (table.empty()) throw NoPartnerError(anchor.class_index, anchor.domain_index);
  return PartnerSampler::draw_from(pool, table, rng);
}

ClassDistribution virtual_class_distribution(const ClassDistribution& p,
                                             const PairCriterion& criterion,
                                             SelectionMode mode) {
  if (criterion.domain_relation != Relation::any) {
    throw InvalidArgument(
        "no closed-form virtual distribution with a domain relation; measure it with "
        "effective_sampled_distribution");
  }
  switch (criterion.class_relation) {
    case Relation::any:
      throw InvalidArgument("virtual distribution needs a same- or different-class criterion");
    case Relation::same:
      return p;
    case Relation::different:
      break;
  }

  const std::size_t num_classes = p.size();
  std::size_t populated = 0;
  for (double pi : p) {
    if (pi >= 1.0) {
      throw InvalidArgument("different-class pairing needs at least two populated classes");
    }
    if (pi > 0.0) ++populated;
  }

  std::vector<double> out(num_classes, 0.0);
  if (mode == SelectionMode::class_uniform) {
    for (std::size_t i = 0; i < num_classes; ++i) {
      if (p[i] > 0.0) out[i] = (1.0 - p[i]) / static_cast<double>(populated - 1);
    }
  } else {
    for (std::size_t i = 0; i < num_classes; ++i) {
      double mass = 0.0;
      for (std::size_t j = 0; j < num_classes; ++j) {
        if (j != i) mass += p[j] / (1.0 - p[j]);
      }
      out[i] = p[i] * mass;
    }
  }
  // Rounding in p (accepted within 1e-9) is amplified by 1 / (1 - p_j).
  double total = 0.0;
  for (double x : out) total += x;
  for (double& x : out) x /= total;
  return ClassDistribution(std::move(out));
}

ClassDistribution combined_distribution(const ClassDistribution& p,
                                        const ClassDistribution& q) {
  if (p.size() != q.size()) throw InvalidArgument("distribution length mismatch");
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = 0.5 * (p[i] + q[i]);
  return ClassDistribution(std::move(out));
}

}  // namespace selmix
