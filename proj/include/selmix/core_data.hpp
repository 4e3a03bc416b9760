#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace selmix {

enum class Split { train, validation, test };

std::string_view to_string(Split split);
// Accepts "train", "val"/"validation" and "test".
Split parse_split(std::string_view text);

// One labeled instance.
struct Example {
  std::vector<double> features;
  int class_index = 0;
  int domain_index = 0;

  std::vector<double> one_hot(int num_classes) const;

  friend bool operator==(const Example&, const Example&) = default;
};

// An ordered, non-empty collection of examples sharing a feature dimension.
//
// Groups are the (class, domain) combinations, indexed class-major:
// group = class_index * num_domains + domain_index.
class Dataset {
 public:
  Dataset(std::vector<Example> examples, int num_classes, int num_domains,
          Split split = Split::train);

  std::size_t size() const { return examples_.size(); }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  std::span<const Example> examples() const { return examples_; }
  auto begin() const { return examples_.begin(); }
  auto end() const { return examples_.end(); }

  int num_classes() const { return num_classes_; }
  int num_domains() const { return num_domains_; }
  int num_groups() const { return num_classes_ * num_domains_; }
  std::size_t feature_dim() const { return examples_.front().features.size(); }
  Split split() const { return split_; }

  int group_of(const Example& e) const {
    return e.class_index * num_domains_ + e.domain_index;
  }

  std::vector<std::size_t> class_counts() const;
  std::vector<std::size_t> domain_counts() const;
  std::vector<std::size_t> group_counts() const;

  // Domains that have at least one example, ascending.
  std::vector<int> observed_domains() const;

  // Examples of one domain, keeping the cardinalities. Throws
  // EmptyDatasetError when the domain has no example.
  Dataset domain_subset(int domain_index) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<Example> examples_;
  int num_classes_;
  int num_domains_;
  Split split_;
};

// Probability vector over classes.
class ClassDistribution {
 public:
  // Throws InvalidArgument unless every entry is in [0, 1] and the entries
  // sum to 1 within 1e-9.
  explicit ClassDistribution(std::vector<double> probs);

  static ClassDistribution uniform(int num_classes);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }
  auto begin() const { return probs_.begin(); }
  auto end() const { return probs_.end(); }

 private:
  std::vector<double> probs_;
};

// Column layout of the dataset CSV format.
//
// Features are the columns named <feature_prefix><k> for k = 0..d-1 (any
// column order). Class and domain columns hold dense integers unless the
// matching legend is non-empty, in which case they hold legend names.
struct CsvSchema {
  std::string class_column = "class";
  std::string domain_column = "domain";
  std::string split_column = "split";
  std::string feature_prefix = "f";
  std::optional<int> num_classes;
  std::optional<int> num_domains;
  std::vector<std::string> class_legend;
  std::vector<std::string> domain_legend;
  // When set, rows whose split column differs are skipped.
  std::optional<Split> only_split;
};

Dataset load_dataset_csv(const std::filesystem::path& path,
                         const CsvSchema& schema = {});

// Writes `data` in the CSV format; the split column is included when
// `with_split` is true.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       bool with_split = false);
// Writes several datasets (e.g. train/val/test) into one file with a split
// column. All datasets must share the feature dimension.
void write_datasets_csv(const std::filesystem::path& path,
                        std::span<const Dataset* const> parts);

// Sidecar legend mapping dense indices back to names, one `kind,index,name`
// line per entry.
struct LabelLegend {
  std::vector<std::string> classes;
  std::vector<std::string> domains;
};
void save_legend(const std::filesystem::path& path, const LabelLegend& legend);
LabelLegend load_legend(const std::filesystem::path& path);

ClassDistribution empirical_class_distribution(const Dataset& data);
// Entry g = class * num_domains + domain.
std::vector<double> empirical_group_distribution(const Dataset& data);
std::vector<double> empirical_domain_distribution(const Dataset& data);

// Shannon entropy in nats, with 0 ln 0 = 0.
double entropy(const ClassDistribution& p);
double entropy(std::span<const double> probs);

}  // namespace selmix
