#include "selmix/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "selmix/error.hpp"
#include "selmix/metrics.hpp"
#include "selmix/pairing.hpp"
#include "selmix/random.hpp"
#include "selmix/strategies.hpp"
#include "selmix/text.hpp"

namespace selmix {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kSummaryMetrics = {
    "test_accuracy",         "test_worst_group_accuracy", "test_worst_domain_accuracy",
    "test_auroc",            "test_worst_domain_auroc",   "final_domain_accuracy",
    "final_domain_auroc",    "val_accuracy",              "val_worst_group_accuracy",
    "best_epoch",
};

const std::vector<std::string> kRunColumns = {
    "strategy", "seed",   "split",      "domain",     "count",
    "accuracy", "worst_group_accuracy", "worst_domain_accuracy",
    "auroc",    "worst_domain_auroc",   "best_epoch",
};

// ---- value parsing --------------------------------------------------------

double to_double(std::string_view v, const std::string& key) {
  auto d = text::parse_double(v);
  if (!d) throw ConfigError(key + ": expected a number, got '" + std::string(v) + "'");
  return *d;
}

long long to_int(std::string_view v, const std::string& key) {
  auto i = text::parse_int(v);
  if (!i) throw ConfigError(key + ": expected an integer, got '" + std::string(v) + "'");
  return *i;
}

std::size_t to_size(std::string_view v, const std::string& key) {
  const auto i = to_int(v, key);
  if (i < 0) throw ConfigError(key + ": must be non-negative");
  return static_cast<std::size_t>(i);
}

bool to_bool(std::string_view v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + std::string(v) + "'");
}

DomainRange to_range(std::string_view v, const std::string& key) {
  const auto colon = v.find(':');
  if (colon == std::string_view::npos) throw ConfigError(key + ": expected first:last");
  return DomainRange{static_cast<int>(to_int(v.substr(0, colon), key)),
                     static_cast<int>(to_int(v.substr(colon + 1), key))};
}

std::vector<double> to_doubles(std::string_view v, const std::string& key) {
  std::vector<double> out;
  for (const auto& part : text::split(v, ',')) out.push_back(to_double(text::trim(part), key));
  return out;
}

std::vector<std::uint64_t> to_seeds(std::string_view v) {
  std::vector<std::uint64_t> out;
  if (v.find(',') == std::string_view::npos && v.find('-') != std::string_view::npos) {
    const auto dash = v.find('-');
    const auto lo = to_int(text::trim(v.substr(0, dash)), "seeds");
    const auto hi = to_int(text::trim(v.substr(dash + 1)), "seeds");
    if (lo < 0 || hi < lo) throw ConfigError("seeds: bad range '" + std::string(v) + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
    return out;
  }
  for (const auto& part : text::split(v, ',')) {
    const auto s = to_int(text::trim(part), "seeds");
    if (s < 0) throw ConfigError("seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset",
       [](ExperimentConfig& c, std::string_view v, const std::string& k) {
         if (v == "spurious") {
           c.source = DatasetSource::spurious;
         } else if (v == "temporal") {
           c.source = DatasetSource::temporal;
         } else if (v == "csv") {
           c.source = DatasetSource::csv;
         } else {
           throw ConfigError(k + ": expected spurious, temporal or csv");
         }
       }},
      {"dataset.path",
       [](ExperimentConfig& c, std::string_view v, const std::string&) { c.csv_path = std::string(v); }},
      {"spurious.n_train", [](auto& c, auto v, auto& k) { c.spurious.n_train = to_size(v, k); }},
      {"spurious.n_val", [](auto& c, auto v, auto& k) { c.spurious.n_val = to_size(v, k); }},
      {"spurious.n_test", [](auto& c, auto v, auto& k) { c.spurious.n_test = to_size(v, k); }},
      {"spurious.class_balance_train",
       [](auto& c, auto v, auto& k) { c.spurious.class_balance_train = to_double(v, k); }},
      {"spurious.spurious_strength_train",
       [](auto& c, auto v, auto& k) { c.spurious.spurious_strength_train = to_double(v, k); }},
      {"spurious.spurious_strength_val",
       [](auto& c, auto v, auto& k) { c.spurious.spurious_strength_val = to_double(v, k); }},
      {"spurious.spurious_strength_test",
       [](auto& c, auto v, auto& k) { c.spurious.spurious_strength_test = to_double(v, k); }},
      {"spurious.core_signal", [](auto& c, auto v, auto& k) { c.spurious.core_signal = to_double(v, k); }},
      {"spurious.spurious_signal",
       [](auto& c, auto v, auto& k) { c.spurious.spurious_signal = to_double(v, k); }},
      {"spurious.noise_dim",
       [](auto& c, auto v, auto& k) { c.spurious.noise_dim = static_cast<int>(to_int(v, k)); }},
      {"spurious.seed",
       [](auto& c, auto v, auto& k) { c.spurious.seed = static_cast<std::uint64_t>(to_size(v, k)); }},
      {"temporal.num_domains",
       [](auto& c, auto v, auto& k) { c.temporal.num_domains = static_cast<int>(to_int(v, k)); }},
      {"temporal.train_domains", [](auto& c, auto v, auto& k) { c.temporal.train_domains = to_range(v, k); }},
      {"temporal.test_domains", [](auto& c, auto v, auto& k) { c.temporal.test_domains = to_range(v, k); }},
      {"temporal.class_ratio_schedule",
       [](auto& c, auto v, auto& k) { c.temporal.class_ratio_schedule = to_doubles(v, k); }},
      {"temporal.covariate_drift_rate",
       [](auto& c, auto v, auto& k) { c.temporal.covariate_drift_rate = to_double(v, k); }},
      {"temporal.class_separation",
       [](auto& c, auto v, auto& k) { c.temporal.class_separation = to_double(v, k); }},
      {"temporal.n_per_domain", [](auto& c, auto v, auto& k) { c.temporal.n_per_domain = to_size(v, k); }},
      {"temporal.n_val_per_domain",
       [](auto& c, auto v, auto& k) { c.temporal.n_val_per_domain = to_size(v, k); }},
      {"temporal.num_classes",
       [](auto& c, auto v, auto& k) { c.temporal.num_classes = static_cast<int>(to_int(v, k)); }},
      {"temporal.dim", [](auto& c, auto v, auto& k) { c.temporal.dim = static_cast<int>(to_int(v, k)); }},
      {"temporal.seed",
       [](auto& c, auto v, auto& k) { c.temporal.seed = static_cast<std::uint64_t>(to_size(v, k)); }},
      {"strategies",
       [](ExperimentConfig& c, std::string_view v, const std::string&) {
         c.strategies.clear();
         for (const auto& part : text::split(v, ',')) {
           const auto name = text::trim(part);
           if (!name.empty()) c.strategies.emplace_back(name);
         }
       }},
      {"model.arch",
       [](ExperimentConfig& c, std::string_view v, const std::string& k) {
         if (v == "linear") {
           c.model.arch = Architecture::linear;
         } else if (v == "mlp") {
           c.model.arch = Architecture::mlp;
         } else {
           throw ConfigError(k + ": expected linear or mlp");
         }
       }},
      {"model.hidden_units",
       [](auto& c, auto v, auto& k) { c.model.hidden_units = static_cast<int>(to_int(v, k)); }},
      {"model.init_scale", [](auto& c, auto v, auto& k) { c.model.init_scale = to_double(v, k); }},
      {"train.learning_rate", [](auto& c, auto v, auto& k) { c.train.learning_rate = to_double(v, k); }},
      {"train.batch_size", [](auto& c, auto v, auto& k) { c.train.batch_size = to_size(v, k); }},
      {"train.max_epochs",
       [](auto& c, auto v, auto& k) { c.train.max_epochs = static_cast<int>(to_int(v, k)); }},
      {"train.steps_per_epoch",
       [](auto& c, auto v, auto& k) { c.train.steps_per_epoch = static_cast<int>(to_int(v, k)); }},
      {"train.early_stop",
       [](ExperimentConfig& c, std::string_view v, const std::string& k) {
         try {
           c.train.early_stop_metric = parse_early_stop_metric(v);
         } catch (const InvalidArgument& e) {
           throw ConfigError(k + ": " + e.what());
         }
       }},
      {"train.momentum", [](auto& c, auto v, auto& k) { c.train.momentum = to_double(v, k); }},
      {"train.weight_decay", [](auto& c, auto v, auto& k) { c.train.weight_decay = to_double(v, k); }},
      {"seeds", [](ExperimentConfig& c, std::string_view v, const std::string&) { c.seeds = to_seeds(v); }},
      {"analysis.divergence", [](auto& c, auto v, auto& k) { c.divergence_analysis = to_bool(v, k); }},
      {"analysis.sampled_distribution",
       [](auto& c, auto v, auto& k) { c.sampled_distribution = to_bool(v, k); }},
      {"analysis.uniformity", [](auto& c, auto v, auto& k) { c.uniformity_report = to_bool(v, k); }},
      {"analysis.sampled_draws", [](auto& c, auto v, auto& k) { c.sampled_draws = to_size(v, k); }},
      {"report.metric",
       [](ExperimentConfig& c, std::string_view v, const std::string&) { c.report_metric = std::string(v); }},
      {"output",
       [](ExperimentConfig& c, std::string_view v, const std::string&) { c.output_dir = std::string(v); }},
      {"workers", [](auto& c, auto v, auto& k) { c.workers = static_cast<int>(to_int(v, k)); }},
  };
  return table;
}

// ---- CSV tables -----------------------------------------------------------

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

void write_table(const fs::path& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  auto emit = [&](const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
}

Table read_table(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  Table table;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1) {
      table.header = text::split(line, ',');
      continue;
    }
    if (line.empty()) continue;
    auto cells = text::split(line, ',');
    if (cells.size() != table.header.size()) {
      throw ParseError(row, path.filename().string() + ": expected " +
                                std::to_string(table.header.size()) + " fields");
    }
    table.rows.push_back(std::move(cells));
  }
  if (row == 0) throw Error(path.string() + " is empty");
  return table;
}

std::string fmt(double v) { return text::format_double(v); }
std::string fmt(std::optional<double> v) { return v ? fmt(*v) : std::string(); }

// ---- summaries ------------------------------------------------------------

struct MeanStd {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

std::optional<double> cell_value(const Row& row, std::size_t col) {
  if (row[col].empty()) return std::nullopt;
  return text::parse_double(row[col]);
}

// Per-run metric values keyed by (strategy, seed), taken from runs rows.
using RunMetrics = std::map<std::string, std::optional<double>>;

std::map<std::pair<std::string, std::string>, RunMetrics> run_metrics(const Table& runs) {
  const auto c_strategy = runs.column("strategy");
  const auto c_seed = runs.column("seed");
  const auto c_split = runs.column("split");
  const auto c_domain = runs.column("domain");
  const auto c_acc = runs.column("accuracy");
  const auto c_wg = runs.column("worst_group_accuracy");
  const auto c_wd = runs.column("worst_domain_accuracy");
  const auto c_auc = runs.column("auroc");
  const auto c_wauc = runs.column("worst_domain_auroc");
  const auto c_epoch = runs.column("best_epoch");

  std::map<std::pair<std::string, std::string>, RunMetrics> out;
  std::map<std::pair<std::string, std::string>, long long> final_domain;
  for (const auto& row : runs.rows) {
    auto& m = out[{row[c_strategy], row[c_seed]}];
    const auto& split = row[c_split];
    if (row[c_domain] == "all") {
      if (split == "test") {
        m["test_accuracy"] = cell_value(row, c_acc);
        m["test_worst_group_accuracy"] = cell_value(row, c_wg);
        m["test_worst_domain_accuracy"] = cell_value(row, c_wd);
        m["test_auroc"] = cell_value(row, c_auc);
        m["test_worst_domain_auroc"] = cell_value(row, c_wauc);
        m["best_epoch"] = cell_value(row, c_epoch);
      } else if (split == "val") {
        m["val_accuracy"] = cell_value(row, c_acc);
        m["val_worst_group_accuracy"] = cell_value(row, c_wg);
      }
    } else if (split == "test") {
      const auto d = text::parse_int(row[c_domain]).value_or(-1);
      auto [it, inserted] = final_domain.try_emplace({row[c_strategy], row[c_seed]}, d);
      if (inserted || d >= it->second) {
        it->second = d;
        m["final_domain_accuracy"] = cell_value(row, c_acc);
        m["final_domain_auroc"] = cell_value(row, c_auc);
      }
    }
  }
  return out;
}

Table summarize(const std::vector<std::string>& strategies, const std::vector<std::uint64_t>& seeds,
                const Table& runs, const Table& failures) {
  Table summary;
  summary.header = {"strategy", "runs", "failed"};
  for (const auto& m : kSummaryMetrics) {
    summary.header.push_back(m + "_mean");
    summary.header.push_back(m + "_std");
  }
  const auto metrics = run_metrics(runs);
  const auto f_strategy = failures.column("strategy");
  const auto f_seed = failures.column("seed");
  for (const auto& strategy : strategies) {
    Row row{strategy};
    std::size_t completed = 0;
    std::map<std::string, std::vector<double>> values;
    for (auto seed : seeds) {
      auto it = metrics.find({strategy, std::to_string(seed)});
      if (it == metrics.end()) continue;
      ++completed;
      for (const auto& m : kSummaryMetrics) {
        auto v = it->second.find(m);
        if (v != it->second.end() && v->second) values[m].push_back(*v->second);
      }
    }
    const auto failed = std::count_if(failures.rows.begin(), failures.rows.end(),
                                      [&](const Row& r) { return r[f_strategy] == strategy && r[f_seed] != "analysis"; });
    row.push_back(std::to_string(completed));
    row.push_back(std::to_string(failed));
    for (const auto& m : kSummaryMetrics) {
      const auto s = mean_std(values[m]);
      if (s.n == 0) {
        row.emplace_back();
        row.emplace_back();
      } else {
        row.push_back(fmt(s.mean));
        row.push_back(fmt(s.std));
      }
    }
    summary.rows.push_back(std::move(row));
  }
  return summary;
}

// ---- run evaluation -------------------------------------------------------

void append_report_rows(Table& runs, const std::string& strategy, std::uint64_t seed,
                        std::string_view split, const EvaluationReport& r, int best_epoch) {
  const auto seed_s = std::to_string(seed);
  runs.rows.push_back({strategy, seed_s, std::string(split), "all", std::to_string(r.count),
                       fmt(r.overall_accuracy), fmt(r.worst_group_accuracy),
                       fmt(r.worst_domain_accuracy), fmt(r.auroc), fmt(r.worst_domain_auroc),
                       std::to_string(best_epoch)});
  for (const auto& d : r.domains) {
    runs.rows.push_back({strategy, seed_s, std::string(split), std::to_string(d.domain_index),
                         std::to_string(d.count), fmt(d.accuracy), fmt(d.worst_group_accuracy), "",
                         fmt(d.auroc), "", std::to_string(best_epoch)});
  }
}

struct CellResult {
  bool ok = false;
  std::string error;
  EvaluationReport train, val, test;
  int best_epoch = 0;
};

std::string source_name(DatasetSource s) {
  switch (s) {
    case DatasetSource::spurious:
      return "spurious";
    case DatasetSource::temporal:
      return "temporal";
    case DatasetSource::csv:
      return "csv";
  }
  return "spurious";
}

Dataset pooled(std::vector<Dataset>& parts, Split split) {
  std::vector<Example> examples;
  for (auto& part : parts) {
    examples.insert(examples.end(), part.examples().begin(), part.examples().end());
  }
  return Dataset(std::move(examples), parts.front().num_classes(), parts.front().num_domains(), split);
}

std::vector<std::string> join_all(const std::vector<double>& v) {
  std::vector<std::string> out;
  for (double x : v) out.push_back(fmt(x));
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Features fed to the loss by a strategy, for the covariate distance.
std::vector<std::vector<double>> strategy_features(const Dataset& data, const PairPool& pool,
                                                   const SamplingStrategy& strategy, std::size_t n,
                                                   Rng& rng) {
  const BatchSampler sampler(data, pool, strategy);
  std::vector<std::vector<double>> out;
  out.reserve(n);
  while (out.size() < n) {
    const auto batch = sampler.next(std::min<std::size_t>(256, n - out.size()), rng);
    for (const auto& item : batch.items) {
      auto f = item_features(item, data);
      out.emplace_back(f.begin(), f.end());
    }
  }
  return out;
}

constexpr std::size_t kCovariateSample = 1000;

}  // namespace

// ---- config ---------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (strategies.empty()) throw ConfigError("at least one strategy is required");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    try {
      parse_strategy(strategies[i]);
    } catch (const InvalidArgument& e) {
      // target=test:<domain> is resolved against the data.
      if (strategies[i].find("target=test:") == std::string::npos) {
        throw ConfigError("strategy '" + strategies[i] + "': " + e.what());
      }
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (strategies[j] == strategies[i]) throw ConfigError("duplicate strategy '" + strategies[i] + "'");
    }
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (seeds[i] == seeds[j]) throw ConfigError("duplicate seed " + std::to_string(seeds[i]));
    }
  }
  try {
    if (source == DatasetSource::spurious) spurious.validate();
    if (source == DatasetSource::temporal) temporal.validate();
    train.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (source == DatasetSource::csv && csv_path.empty()) throw ConfigError("dataset.path is required for csv");
  if (model.arch == Architecture::mlp && model.hidden_units < 1) {
    throw ConfigError("model.hidden_units must be positive");
  }
  if (!(model.init_scale >= 0.0)) throw ConfigError("model.init_scale must be non-negative");
  const auto metric = primary_metric();
  if (std::find(kSummaryMetrics.begin(), kSummaryMetrics.end(), metric) == kSummaryMetrics.end()) {
    throw ConfigError("unknown report.metric '" + metric + "'");
  }
}

std::string ExperimentConfig::primary_metric() const {
  if (!report_metric.empty()) return report_metric;
  switch (source) {
    case DatasetSource::spurious:
      return "test_worst_group_accuracy";
    case DatasetSource::temporal:
      return "test_worst_domain_accuracy";
    case DatasetSource::csv:
      return "test_accuracy";
  }
  return "test_accuracy";
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> seen;
  while (std::getline(in, line)) {
    ++row;
    auto body = std::string_view(line);
    if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = text::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(row) + ": expected 'key = value'");
    }
    const std::string key(text::trim(body.substr(0, eq)));
    const auto value = text::trim(body.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("line " + std::to_string(row) + ": unknown key '" + key + "'");
    }
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      throw ConfigError("line " + std::to_string(row) + ": duplicate key '" + key + "'");
    }
    seen.push_back(key);
    try {
      it->second(config, value, key);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(row) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_experiment_config(in);
}

std::string format_experiment_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto kv = [&](const std::string& k, const std::string& v) { out << k << " = " << v << '\n'; };
  kv("dataset", source_name(c.source));
  switch (c.source) {
    case DatasetSource::spurious:
      kv("spurious.n_train", std::to_string(c.spurious.n_train));
      kv("spurious.n_val", std::to_string(c.spurious.n_val));
      kv("spurious.n_test", std::to_string(c.spurious.n_test));
      kv("spurious.class_balance_train", fmt(c.spurious.class_balance_train));
      kv("spurious.spurious_strength_train", fmt(c.spurious.spurious_strength_train));
      kv("spurious.spurious_strength_val", fmt(c.spurious.spurious_strength_val));
      kv("spurious.spurious_strength_test", fmt(c.spurious.spurious_strength_test));
      kv("spurious.core_signal", fmt(c.spurious.core_signal));
      kv("spurious.spurious_signal", fmt(c.spurious.spurious_signal));
      kv("spurious.noise_dim", std::to_string(c.spurious.noise_dim));
      kv("spurious.seed", std::to_string(c.spurious.seed));
      break;
    case DatasetSource::temporal:
      kv("temporal.num_domains", std::to_string(c.temporal.num_domains));
      kv("temporal.train_domains", std::to_string(c.temporal.train_domains.first) + ":" +
                                       std::to_string(c.temporal.train_domains.last));
      kv("temporal.test_domains", std::to_string(c.temporal.test_domains.first) + ":" +
                                      std::to_string(c.temporal.test_domains.last));
      kv("temporal.class_ratio_schedule", join(join_all(c.temporal.class_ratio_schedule), ','));
      kv("temporal.covariate_drift_rate", fmt(c.temporal.covariate_drift_rate));
      kv("temporal.class_separation", fmt(c.temporal.class_separation));
      kv("temporal.n_per_domain", std::to_string(c.temporal.n_per_domain));
      kv("temporal.n_val_per_domain", std::to_string(c.temporal.n_val_per_domain));
      kv("temporal.num_classes", std::to_string(c.temporal.num_classes));
      kv("temporal.dim", std::to_string(c.temporal.dim));
      kv("temporal.seed", std::to_string(c.temporal.seed));
      break;
    case DatasetSource::csv:
      kv("dataset.path", c.csv_path.string());
      break;
  }
  kv("strategies", join(c.strategies, ','));
  kv("model.arch", c.model.arch == Architecture::mlp ? "mlp" : "linear");
  kv("model.hidden_units", std::to_string(c.model.hidden_units));
  kv("model.init_scale", fmt(c.model.init_scale));
  kv("train.learning_rate", fmt(c.train.learning_rate));
  kv("train.batch_size", std::to_string(c.train.batch_size));
  kv("train.max_epochs", std::to_string(c.train.max_epochs));
  kv("train.steps_per_epoch", std::to_string(c.train.steps_per_epoch));
  kv("train.early_stop", std::string(to_string(c.train.early_stop_metric)));
  kv("train.momentum", fmt(c.train.momentum));
  kv("train.weight_decay", fmt(c.train.weight_decay));
  std::vector<std::string> seeds;
  for (auto s : c.seeds) seeds.push_back(std::to_string(s));
  kv("seeds", join(seeds, ','));
  kv("analysis.divergence", c.divergence_analysis ? "true" : "false");
  kv("analysis.sampled_distribution", c.sampled_distribution ? "true" : "false");
  kv("analysis.uniformity", c.uniformity_report ? "true" : "false");
  kv("analysis.sampled_draws", std::to_string(c.sampled_draws));
  kv("report.metric", c.primary_metric());
  kv("output", c.output_dir.string());
  kv("workers", std::to_string(c.workers));
  return out.str();
}

// ---- data -----------------------------------------------------------------

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  switch (config.source) {
    case DatasetSource::spurious: {
      auto d = gen_spurious_correlation(config.spurious);
      return {std::move(d.train), std::move(d.val), std::move(d.test)};
    }
    case DatasetSource::temporal: {
      auto d = gen_temporal_label_shift(config.temporal);
      return {std::move(d.train), std::move(d.val), pooled(d.tests, Split::test)};
    }
    case DatasetSource::csv: {
      const Dataset all = load_dataset_csv(config.csv_path);
      CsvSchema schema;
      schema.num_classes = all.num_classes();
      schema.num_domains = all.num_domains();
      auto part = [&](Split s) {
        schema.only_split = s;
        return load_dataset_csv(config.csv_path, schema);
      };
      return {part(Split::train), part(Split::validation), part(Split::test)};
    }
  }
  throw ConfigError("unknown dataset source");
}

void generate_datasets(const ExperimentConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  SynthMetadata meta;
  ExperimentData data = [&] {
    if (config.source == DatasetSource::spurious) {
      auto d = gen_spurious_correlation(config.spurious);
      meta = std::move(d.metadata);
      return ExperimentData{std::move(d.train), std::move(d.val), std::move(d.test)};
    }
    if (config.source == DatasetSource::temporal) {
      auto d = gen_temporal_label_shift(config.temporal);
      meta = std::move(d.metadata);
      return ExperimentData{std::move(d.train), std::move(d.val), pooled(d.tests, Split::test)};
    }
    auto d = load_experiment_data(config);
    meta.set("generator", "csv");
    meta.set("source", config.csv_path.string());
    return d;
  }();
  meta.set("num_classes", std::to_string(data.train.num_classes()));
  meta.set("num_domains", std::to_string(data.train.num_domains()));
  meta.set("count.train", std::to_string(data.train.size()));
  meta.set("count.val", std::to_string(data.val.size()));
  meta.set("count.test", std::to_string(data.test.size()));
  const Dataset* parts[] = {&data.train, &data.val, &data.test};
  write_datasets_csv(out_dir / "data.csv", parts);
  meta.save(out_dir / "metadata.txt");
}

SamplingStrategy resolve_strategy(const std::string& name, const ExperimentData& data) {
  std::string canonical = name;
  std::optional<int> domain;
  if (const auto pos = name.find("target=test:"); pos != std::string::npos) {
    const auto start = pos + std::string_view("target=test:").size();
    auto end = name.find('+', start);
    if (end == std::string::npos) end = name.size();
    const auto d = text::parse_int(std::string_view(name).substr(start, end - start));
    if (!d) throw InvalidArgument("bad test domain in '" + name + "'");
    domain = static_cast<int>(*d);
    canonical = name.substr(0, start - 1) + name.substr(end);
  }
  SamplingStrategy s = parse_strategy(canonical);
  if (s.resample == ResampleAxis::target && s.target_from_test) {
    s.target = domain ? empirical_class_distribution(data.test.domain_subset(*domain))
                      : empirical_class_distribution(data.test);
    s.target_from_test = false;
  }
  return s;
}

// ---- grid -----------------------------------------------------------------

GridOutcome run_experiment_grid(const ExperimentConfig& input, const GridOptions& options) {
  ExperimentConfig config = input;
  for (auto& s : config.seeds) s += options.seed_offset;
  if (options.workers > 0) config.workers = options.workers;
  config.validate();

  const ExperimentData data = load_experiment_data(config);
  const fs::path out_dir = config.output_dir;
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "config.txt", std::ios::binary);
    if (!out) throw Error("cannot write " + (out_dir / "config.txt").string());
    out << format_experiment_config(config);
  }

  const std::size_t n_strategies = config.strategies.size();
  std::vector<std::optional<SamplingStrategy>> resolved(n_strategies);
  std::vector<std::string> resolve_errors(n_strategies);
  for (std::size_t i = 0; i < n_strategies; ++i) {
    try {
      resolved[i] = resolve_strategy(config.strategies[i], data);
    } catch (const Error& e) {
      resolve_errors[i] = e.what();
    }
  }

  const std::size_t n_cells = n_strategies * config.seeds.size();
  std::vector<CellResult> cells(n_cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_cells; i = next++) {
      const auto si = i / config.seeds.size();
      const auto seed = config.seeds[i % config.seeds.size()];
      CellResult& cell = cells[i];
      if (!resolved[si]) {
        cell.error = resolve_errors[si];
        continue;
      }
      try {
        ModelSpec spec = config.model;
        spec.input_dim = static_cast<int>(data.train.feature_dim());
        spec.num_classes = data.train.num_classes();
        spec.seed = seed;
        TrainConfig tc = config.train;
        tc.seed = seed;
        const auto trained = train(data.train, data.val, *resolved[si], spec, tc);
        cell.train = evaluate(trained.model, data.train);
        cell.val = evaluate(trained.model, data.val);
        cell.test = evaluate(trained.model, data.test);
        cell.best_epoch = trained.best_epoch;
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(config.workers), n_cells);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  GridOutcome outcome;
  Table runs{kRunColumns, {}};
  Table failures{{"strategy", "seed", "error"}, {}};
  auto clean = [](std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
  };
  for (std::size_t i = 0; i < n_cells; ++i) {
    const auto& strategy = config.strategies[i / config.seeds.size()];
    const auto seed = config.seeds[i % config.seeds.size()];
    const auto& cell = cells[i];
    if (!cell.ok) {
      ++outcome.failed;
      outcome.failures.push_back(strategy + "@" + std::to_string(seed) + ": " + cell.error);
      failures.rows.push_back({strategy, std::to_string(seed), clean(cell.error)});
      continue;
    }
    ++outcome.completed;
    append_report_rows(runs, strategy, seed, to_string(Split::train), cell.train, cell.best_epoch);
    append_report_rows(runs, strategy, seed, to_string(Split::validation), cell.val, cell.best_epoch);
    append_report_rows(runs, strategy, seed, to_string(Split::test), cell.test, cell.best_epoch);
  }
  write_table(out_dir / "runs.csv", runs);
  write_table(out_dir / "summary.csv", summarize(config.strategies, config.seeds, runs, failures));

  // Effective sampled distributions, shared by the table and the divergences.
  const PairPool pool(data.train);
  const std::uint64_t analysis_seed = config.seeds.front();
  std::vector<std::optional<SampledDistribution>> sampled(n_strategies);
  if (config.sampled_distribution || config.divergence_analysis) {
    for (std::size_t i = 0; i < n_strategies; ++i) {
      if (!resolved[i]) continue;
      try {
        Rng rng = make_rng(analysis_seed, 0x73616d70ULL + i);
        sampled[i] = effective_sampled_distribution(data.train, pool, *resolved[i],
                                                    config.sampled_draws, rng);
      } catch (const Error& e) {
        failures.rows.push_back({config.strategies[i], "analysis", clean(e.what())});
      }
    }
  }

  const auto train_classes = empirical_class_distribution(data.train);
  const auto majority = static_cast<std::size_t>(
      std::max_element(train_classes.begin(), train_classes.end()) - train_classes.begin());
  if (config.sampled_distribution) {
    Table table;
    table.header = {"source", "majority_class", "majority_class_proportion"};
    for (int c = 0; c < data.train.num_classes(); ++c) table.header.push_back("class_" + std::to_string(c));
    for (int d = 0; d < data.train.num_domains(); ++d) table.header.push_back("domain_" + std::to_string(d));
    for (int g = 0; g < data.train.num_groups(); ++g) table.header.push_back("group_" + std::to_string(g));
    auto add = [&](const std::string& source, const ClassDistribution& classes,
                   const std::vector<double>& domains, const std::vector<double>& groups) {
      Row row{source, std::to_string(majority), fmt(classes[majority])};
      for (double p : classes) row.push_back(fmt(p));
      for (double p : domains) row.push_back(fmt(p));
      for (double p : groups) row.push_back(fmt(p));
      table.rows.push_back(std::move(row));
    };
    add("dataset:train", train_classes, empirical_domain_distribution(data.train),
        empirical_group_distribution(data.train));
    add("dataset:val", empirical_class_distribution(data.val), empirical_domain_distribution(data.val),
        empirical_group_distribution(data.val));
    add("dataset:test", empirical_class_distribution(data.test), empirical_domain_distribution(data.test),
        empirical_group_distribution(data.test));
    for (std::size_t i = 0; i < n_strategies; ++i) {
      if (sampled[i]) add(config.strategies[i], sampled[i]->classes, sampled[i]->domains, sampled[i]->groups);
    }
    write_table(out_dir / "sampled_distribution.csv", table);
  }

  if (config.divergence_analysis) {
    Table table;
    table.header = {"strategy",      "domain",        "kl_divergence", "tv_divergence",
                    "covariate_distance", "accuracy_mean", "accuracy_std",  "pearson_kl",
                    "pearson_tv",    "pearson_covariate"};
    const auto test_domains = data.test.observed_domains();
    const auto c_strategy = runs.column("strategy");
    const auto c_split = runs.column("split");
    const auto c_domain = runs.column("domain");
    const auto c_acc = runs.column("accuracy");
    std::vector<Dataset> domain_sets;
    for (int d : test_domains) domain_sets.push_back(data.test.domain_subset(d));
    // Rows are grouped by domain so the per-domain Pearson columns are local.
    for (std::size_t di = 0; di < test_domains.size(); ++di) {
      const auto& test_d = domain_sets[di];
      const auto test_classes = empirical_class_distribution(test_d);
      std::vector<std::vector<double>> test_features;
      for (const auto& e : test_d) test_features.push_back(e.features);
      const std::size_t first = table.rows.size();
      std::vector<double> kls, tvs, covs, accs;
      for (std::size_t i = 0; i < n_strategies; ++i) {
        if (!sampled[i]) continue;
        std::vector<double> seed_acc;
        for (const auto& row : runs.rows) {
          if (row[c_strategy] == config.strategies[i] && row[c_split] == "test" &&
              row[c_domain] == std::to_string(test_domains[di])) {
            seed_acc.push_back(*text::parse_double(row[c_acc]));
          }
        }
        if (seed_acc.empty()) continue;
        const auto acc = mean_std(seed_acc);
        const double kl = distribution_divergence(test_classes, sampled[i]->classes, DivergenceKind::kl);
        const double tv =
            distribution_divergence(test_classes, sampled[i]->classes, DivergenceKind::total_variation);
        Rng rng = make_rng(analysis_seed, 0x636f76ULL + i);
        const auto reference = strategy_features(data.train, pool, *resolved[i], kCovariateSample, rng);
        const double cov = nn_covariate_divergence(reference, test_features);
        kls.push_back(kl);
        tvs.push_back(tv);
        covs.push_back(cov);
        accs.push_back(acc.mean);
        table.rows.push_back({config.strategies[i], std::to_string(test_domains[di]), fmt(kl), fmt(tv),
                              fmt(cov), fmt(acc.mean), fmt(acc.std), "", "", ""});
      }
      auto pearson = [&](const std::vector<double>& xs) -> std::string {
        try {
          return fmt(pearson_correlation(xs, accs));
        } catch (const UndefinedMetricError&) {
          return "";
        }
      };
      const auto pk = pearson(kls), pt = pearson(tvs), pc = pearson(covs);
      for (std::size_t r = first; r < table.rows.size(); ++r) {
        table.rows[r][7] = pk;
        table.rows[r][8] = pt;
        table.rows[r][9] = pc;
      }
    }
    write_table(out_dir / "divergence.csv", table);
  }

  if (config.uniformity_report) {
    Table table{{"split", "domain", "count", "minority_class_ratio", "class_entropy"}, {}};
    for (const Dataset* d : {&data.train, &data.val, &data.test}) {
      for (const auto& u : uniformity_shift_report(*d)) {
        table.rows.push_back({std::string(to_string(d->split())), std::to_string(u.domain_index),
                              std::to_string(u.count), fmt(u.minority_class_ratio), fmt(u.class_entropy)});
      }
    }
    write_table(out_dir / "uniformity.csv", table);
  }

  write_table(out_dir / "failures.csv", failures);
  return outcome;
}

// ---- reports --------------------------------------------------------------

namespace {

ExperimentConfig load_results_config(const fs::path& dir) {
  if (!fs::exists(dir / "config.txt")) throw Error("no results in " + dir.string() + " (config.txt missing)");
  return load_experiment_config(dir / "config.txt");
}

void require_complete(const fs::path& dir, const ExperimentConfig& config) {
  std::vector<std::string> absent;
  std::optional<Table> runs;
  if (fs::exists(dir / "runs.csv")) runs = read_table(dir / "runs.csv");
  for (const auto& strategy : config.strategies) {
    for (auto seed : config.seeds) {
      bool found = false;
      if (runs) {
        const auto cs = runs->column("strategy"), ce = runs->column("seed");
        const auto cp = runs->column("split"), cd = runs->column("domain");
        for (const auto& row : runs->rows) {
          if (row[cs] == strategy && row[ce] == std::to_string(seed) && row[cp] == "test" &&
              row[cd] == "all") {
            found = true;
            break;
          }
        }
      }
      if (!found) absent.push_back(strategy + "@" + std::to_string(seed));
    }
  }
  if (!absent.empty()) throw Error("missing results for runs: " + join(absent, ' '));
}

}  // namespace

fs::path emit_plot_data(const fs::path& dir, PlotKind kind) {
  const auto config = load_results_config(dir);
  require_complete(dir, config);
  Table out;
  fs::path path;
  switch (kind) {
    case PlotKind::bars: {
      const auto summary = read_table(dir / "summary.csv");
      const auto metric = config.primary_metric();
      const auto cs = summary.column("strategy");
      const auto cm = summary.column(metric + "_mean");
      const auto cd = summary.column(metric + "_std");
      out.header = {"strategy", "metric", "mean", "std"};
      for (const auto& strategy : config.strategies) {
        for (const auto& row : summary.rows) {
          if (row[cs] == strategy) out.rows.push_back({strategy, metric, row[cm], row[cd]});
        }
      }
      path = dir / "plot_bars.csv";
      break;
    }
    case PlotKind::scatter: {
      if (!fs::exists(dir / "divergence.csv")) throw Error("divergence analysis was not run in " + dir.string());
      const auto div = read_table(dir / "divergence.csv");
      const auto cs = div.column("strategy"), cd = div.column("domain");
      const auto ck = div.column("kl_divergence"), ca = div.column("accuracy_mean");
      const auto cp = div.column("pearson_kl");
      out.header = {"strategy", "domain", "divergence", "accuracy", "pearson"};
      for (const auto& row : div.rows) out.rows.push_back({row[cs], row[cd], row[ck], row[ca], row[cp]});
      path = dir / "plot_scatter.csv";
      break;
    }
    case PlotKind::timeseries: {
      if (!fs::exists(dir / "uniformity.csv")) throw Error("uniformity report was not run in " + dir.string());
      auto uni = read_table(dir / "uniformity.csv");
      const auto cs = uni.column("split"), cd = uni.column("domain");
      const auto cm = uni.column("minority_class_ratio"), ce = uni.column("class_entropy");
      std::stable_sort(uni.rows.begin(), uni.rows.end(), [&](const Row& a, const Row& b) {
        return text::parse_int(a[cd]).value_or(0) < text::parse_int(b[cd]).value_or(0);
      });
      out.header = {"split", "domain", "minority_class_ratio", "class_entropy"};
      for (const auto& row : uni.rows) out.rows.push_back({row[cs], row[cd], row[cm], row[ce]});
      path = dir / "plot_timeseries.csv";
      break;
    }
  }
  write_table(path, out);
  return path;
}

AuditResult audit_results(const fs::path& dir) {
  const auto config = load_results_config(dir);
  const auto runs = read_table(dir / "runs.csv");
  const auto failures = read_table(dir / "failures.csv");
  const auto stored = read_table(dir / "summary.csv");
  const auto expected = summarize(config.strategies, config.seeds, runs, failures);

  AuditResult result;
  if (stored.header != expected.header) {
    result.mismatches.push_back("summary.csv header differs from the recomputed summary");
  } else if (stored.rows.size() != expected.rows.size()) {
    result.mismatches.push_back("summary.csv has " + std::to_string(stored.rows.size()) + " rows, expected " +
                                std::to_string(expected.rows.size()));
  } else {
    for (std::size_t r = 0; r < stored.rows.size(); ++r) {
      for (std::size_t c = 0; c < stored.header.size(); ++c) {
        const auto& a = stored.rows[r][c];
        const auto& b = expected.rows[r][c];
        if (a == b) continue;
        const auto x = text::parse_double(a), y = text::parse_double(b);
        if (x && y && std::abs(*x - *y) <= 1e-12 * std::max(1.0, std::abs(*y))) continue;
        result.mismatches.push_back("row " + std::to_string(r + 1) + " (" + expected.rows[r][0] + ") column " +
                                    stored.header[c] + ": stored '" + a + "', recomputed '" + b + "'");
      }
    }
  }
  result.ok = result.mismatches.empty();
  return result;
}

}  // namespace selmix
