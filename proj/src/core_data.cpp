#include "selmix/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "selmix/error.hpp"
#include "selmix/text.hpp"

namespace selmix {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::validation:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  text = text::trim(text);
  if (text == "train") return Split::train;
  if (text == "val" || text == "validation") return Split::validation;
  if (text == "test") return Split::test;
  throw InvalidArgument("unknown split '" + std::string(text) + "'");
}

std::vector<double> Example::one_hot(int num_classes) const {
  std::vector<double> y(static_cast<std::size_t>(num_classes), 0.0);
  y.at(static_cast<std::size_t>(class_index)) = 1.0;
  return y;
}

Dataset::Dataset(std::vector<Example> examples, int num_classes, int num_domains,
                 Split split)
    : examples_(std::move(examples)),
      num_classes_(num_classes),
      num_domains_(num_domains),
      split_(split) {
  if (examples_.empty()) throw EmptyDatasetError("dataset has no example");
  if (num_classes_ < 2) throw InvalidArgument("a dataset needs at least 2 classes");
  if (num_domains_ < 1) throw InvalidArgument("a dataset needs at least 1 domain");
  const auto d = examples_.front().features.size();
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const auto& e = examples_[i];
    if (e.features.size() != d) {
      throw InvalidArgument("example " + std::to_string(i) + " has " +
                            std::to_string(e.features.size()) +
                            " features, expected " + std::to_string(d));
    }
    if (e.class_index < 0 || e.class_index >= num_classes_) {
      throw InvalidArgument("example " + std::to_string(i) + " has class " +
                            std::to_string(e.class_index) + " outside [0, " +
                            std::to_string(num_classes_) + ")");
    }
    if (e.domain_index < 0 || e.domain_index >= num_domains_) {
      throw InvalidArgument("example " + std::to_string(i) + " has domain " +
                            std::to_string(e.domain_index) + " outside [0, " +
                            std::to_string(num_domains_) + ")");
    }
  }
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (const auto& e : examples_) ++counts[static_cast<std::size_t>(e.class_index)];
  return counts;
}

std::vector<std::size_t> Dataset::domain_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_domains_), 0);
  for (const auto& e : examples_) ++counts[static_cast<std::size_t>(e.domain_index)];
  return counts;
}

std::vector<std::size_t> Dataset::group_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_groups()), 0);
  for (const auto& e : examples_) ++counts[static_cast<std::size_t>(group_of(e))];
  return counts;
}

std::vector<int> Dataset::observed_domains() const {
  std::vector<int> out;
  const auto counts = domain_counts();
  for (std::size_t d = 0; d < counts.size(); ++d) {
    if (counts[d] > 0) out.push_back(static_cast<int>(d));
  }
  return out;
}

Dataset Dataset::domain_subset(int domain_index) const {
  std::vector<Example> kept;
  for (const auto& e : examples_) {
    if (e.domain_index == domain_index) kept.push_back(e);
  }
  if (kept.empty()) {
    throw EmptyDatasetError("domain " + std::to_string(domain_index) +
                            " has no example");
  }
  return Dataset(std::move(kept), num_classes_, num_domains_, split_);
}

ClassDistribution::ClassDistribution(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidArgument("empty class distribution");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidArgument("class probability outside [0, 1]");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("class probabilities sum to " + text::format_double(total));
  }
}

ClassDistribution ClassDistribution::uniform(int num_classes) {
  if (num_classes < 1) throw InvalidArgument("uniform over no class");
  return ClassDistribution(std::vector<double>(static_cast<std::size_t>(num_classes),
                                               1.0 / num_classes));
}

namespace {

struct Header {
  std::vector<std::size_t> feature_columns;  // column index of f0, f1, ...
  std::size_t class_column = 0;
  std::size_t domain_column = 0;
  std::optional<std::size_t> split_column;
  std::size_t arity = 0;
};

Header parse_header(const std::string& line, const CsvSchema& schema) {
  Header header;
  const auto names = text::split(line, ',');
  header.arity = names.size();
  std::optional<std::size_t> class_col, domain_col;
  std::map<long long, std::size_t> features;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto name = text::trim(names[i]);
    if (name == schema.class_column) {
      class_col = i;
    } else if (name == schema.domain_column) {
      domain_col = i;
    } else if (name == schema.split_column) {
      header.split_column = i;
    } else if (name.starts_with(schema.feature_prefix)) {
      auto k = text::parse_int(name.substr(schema.feature_prefix.size()));
      if (!k || *k < 0) throw ParseError(1, "unrecognised column '" + std::string(name) + "'");
      if (!features.emplace(*k, i).second) {
        throw ParseError(1, "duplicate feature column '" + std::string(name) + "'");
      }
    } else {
      throw ParseError(1, "unrecognised column '" + std::string(name) + "'");
    }
  }
  if (!class_col) throw ParseError(1, "missing class column '" + schema.class_column + "'");
  if (!domain_col) throw ParseError(1, "missing domain column '" + schema.domain_column + "'");
  long long expected = 0;
  for (const auto& [k, col] : features) {
    if (k != expected) {
      throw ParseError(1, "feature columns must be " + schema.feature_prefix + "0.." +
                              schema.feature_prefix + "{d-1}; missing " +
                              schema.feature_prefix + std::to_string(expected));
    }
    header.feature_columns.push_back(col);
    ++expected;
  }
  header.class_column = *class_col;
  header.domain_column = *domain_col;
  return header;
}

int parse_label(std::string_view cell, const std::vector<std::string>& legend,
                std::size_t row, const std::string& column) {
  cell = text::trim(cell);
  if (!legend.empty()) {
    auto it = std::find(legend.begin(), legend.end(), cell);
    if (it == legend.end()) {
      throw ParseError(row, "label '" + std::string(cell) + "' in column '" + column +
                                "' is not in the legend");
    }
    return static_cast<int>(it - legend.begin());
  }
  auto v = text::parse_int(cell);
  if (!v || *v < 0) {
    throw ParseError(row, "column '" + column + "' holds '" + std::string(cell) +
                              "', expected a non-negative integer");
  }
  return static_cast<int>(*v);
}

}  // namespace

Dataset load_dataset_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file " + path.string());
  std::string line;
  if (!std::getline(in, line) || text::trim(line).empty()) {
    throw EmptyDatasetError("dataset file " + path.string() + " is empty");
  }
  const Header header = parse_header(line, schema);

  std::vector<Example> examples;
  std::optional<Split> file_split;
  std::size_t row = 1;
  int max_class = -1;
  int max_domain = -1;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(line, ',');
    if (cells.size() != header.arity) {
      throw ParseError(row, "expected " + std::to_string(header.arity) + " fields, got " +
                                std::to_string(cells.size()));
    }
    if (header.split_column) {
      Split s;
      try {
        s = parse_split(cells[*header.split_column]);
      } catch (const InvalidArgument& e) {
        throw ParseError(row, e.what());
      }
      if (schema.only_split && s != *schema.only_split) continue;
      if (!file_split) file_split = s;
    }
    Example e;
    e.features.reserve(header.feature_columns.size());
    for (std::size_t k = 0; k < header.feature_columns.size(); ++k) {
      const auto& cell = cells[header.feature_columns[k]];
      auto v = text::parse_double(cell);
      if (!v) {
        throw ParseError(row, "feature " + schema.feature_prefix + std::to_string(k) +
                                  " holds non-numeric value '" +
                                  std::string(text::trim(cell)) + "'");
      }
      e.features.push_back(*v);
    }
    e.class_index = parse_label(cells[header.class_column], schema.class_legend, row,
                                schema.class_column);
    e.domain_index = parse_label(cells[header.domain_column], schema.domain_legend, row,
                                 schema.domain_column);
    max_class = std::max(max_class, e.class_index);
    max_domain = std::max(max_domain, e.domain_index);
    examples.push_back(std::move(e));
  }
  if (examples.empty()) {
    throw EmptyDatasetError("dataset file " + path.string() + " has no matching row");
  }

  int num_classes = schema.num_classes.value_or(
      schema.class_legend.empty() ? max_class + 1
                                  : static_cast<int>(schema.class_legend.size()));
  int num_domains = schema.num_domains.value_or(
      schema.domain_legend.empty() ? max_domain + 1
                                   : static_cast<int>(schema.domain_legend.size()));
  // A single observed class still describes a binary task.
  num_classes = std::max(num_classes, 2);
  Split split = schema.only_split.value_or(file_split.value_or(Split::train));
  return Dataset(std::move(examples), num_classes, num_domains, split);
}

namespace {

void write_header(std::ostream& out, std::size_t dim, bool with_split) {
  for (std::size_t k = 0; k < dim; ++k) out << 'f' << k << ',';
  out << "class,domain";
  if (with_split) out << ",split";
  out << '\n';
}

void write_rows(std::ostream& out, const Dataset& data, bool with_split) {
  for (const auto& e : data) {
    for (double x : e.features) out << text::format_double(x) << ',';
    out << e.class_index << ',' << e.domain_index;
    if (with_split) out << ',' << to_string(data.split());
    out << '\n';
  }
}

}  // namespace

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       bool with_split) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file " + path.string());
  write_header(out, data.feature_dim(), with_split);
  write_rows(out, data, with_split);
}

void write_datasets_csv(const std::filesystem::path& path,
                        std::span<const Dataset* const> parts) {
  if (parts.empty()) throw InvalidArgument("nothing to write");
  const auto dim = parts.front()->feature_dim();
  for (const auto* part : parts) {
    if (part->feature_dim() != dim) throw InvalidArgument("feature dimension mismatch");
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file " + path.string());
  write_header(out, dim, true);
  for (const auto* part : parts) write_rows(out, *part, true);
}

void save_legend(const std::filesystem::path& path, const LabelLegend& legend) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write legend " + path.string());
  for (std::size_t i = 0; i < legend.classes.size(); ++i) {
    out << "class," << i << ',' << legend.classes[i] << '\n';
  }
  for (std::size_t i = 0; i < legend.domains.size(); ++i) {
    out << "domain," << i << ',' << legend.domains[i] << '\n';
  }
}

LabelLegend load_legend(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open legend " + path.string());
  LabelLegend legend;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto first = line.find(',');
    const auto second = first == std::string::npos ? first : line.find(',', first + 1);
    if (second == std::string::npos) throw ParseError(row, "expected kind,index,name");
    const auto kind = text::trim(std::string_view(line).substr(0, first));
    const auto index = text::parse_int(std::string_view(line).substr(first + 1, second - first - 1));
    auto& target = kind == "class" ? legend.classes : legend.domains;
    if ((kind != "class" && kind != "domain") || !index ||
        *index != static_cast<long long>(target.size())) {
      throw ParseError(row, "malformed legend entry");
    }
    target.push_back(line.substr(second + 1));
  }
  return legend;
}

ClassDistribution empirical_class_distribution(const Dataset& data) {
  const auto counts = data.class_counts();
  const double n = static_cast<double>(data.size());
  std::vector<double> probs(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) probs[k] = counts[k] / n;
  return ClassDistribution(std::move(probs));
}

std::vector<double> empirical_group_distribution(const Dataset& data) {
  const auto counts = data.group_counts();
  const double n = static_cast<double>(data.size());
  std::vector<double> probs(counts.size());
  for (std::size_t g = 0; g < counts.size(); ++g) probs[g] = counts[g] / n;
  return probs;
}

std::vector<double> empirical_domain_distribution(const Dataset& data) {
  const auto counts = data.domain_counts();
  const double n = static_cast<double>(data.size());
  std::vector<double> probs(counts.size());
  for (std::size_t d = 0; d < counts.size(); ++d) probs[d] = counts[d] / n;
  return probs;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double entropy(const ClassDistribution& p) { return entropy(p.probs()); }

}  // namespace selmix
