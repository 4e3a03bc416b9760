#include <optional>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "selmix/core_data.hpp"
#include "selmix/error.hpp"
#include "selmix/experiment.hpp"
#include "selmix/metrics.hpp"
#include "selmix/pairing.hpp"
#include "selmix/strategies.hpp"
#include "selmix/synth.hpp"
#include "selmix/trainer.hpp"

namespace py = pybind11;
using namespace selmix;

namespace {

Dataset make_dataset(const std::vector<std::vector<double>>& features, const std::vector<int>& classes,
                     const std::vector<int>& domains, int num_classes, int num_domains,
                     const std::string& split) {
  if (features.size() != classes.size() || features.size() != domains.size()) {
    throw InvalidArgument("features, classes and domains must have equal lengths");
  }
  std::vector<Example> examples(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    examples[i] = Example{features[i], classes[i], domains[i]};
  }
  return Dataset(std::move(examples), num_classes, num_domains, parse_split(split));
}

PairCriterion criterion_of(const std::string& text) { return parse_criterion(text); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Selective mixup, selective sampling and resampling strategies";

  // Translators run newest first, so the base class goes first.
  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", base.ptr());
  py::register_exception<EmptyDatasetError>(m, "EmptyDatasetError", base.ptr());

  py::class_<ClassDistribution>(m, "ClassDistribution")
      .def(py::init<std::vector<double>>())
      .def_static("uniform", &ClassDistribution::uniform)
      .def("probs", [](const ClassDistribution& p) { return std::vector<double>(p.begin(), p.end()); })
      .def("__len__", &ClassDistribution::size)
      .def("__getitem__", [](const ClassDistribution& p, std::size_t i) {
        if (i >= p.size()) throw py::index_error();
        return p[i];
      });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("features"), py::arg("classes"), py::arg("domains"),
           py::arg("num_classes"), py::arg("num_domains"), py::arg("split") = "train")
      .def("__len__", &Dataset::size)
      .def_property_readonly("num_classes", &Dataset::num_classes)
      .def_property_readonly("num_domains", &Dataset::num_domains)
      .def_property_readonly("feature_dim", &Dataset::feature_dim)
      .def_property_readonly("split", [](const Dataset& d) { return std::string(to_string(d.split())); })
      .def("features", [](const Dataset& d) {
        std::vector<std::vector<double>> out;
        for (const auto& e : d) out.push_back(e.features);
        return out;
      })
      .def("classes", [](const Dataset& d) {
        std::vector<int> out;
        for (const auto& e : d) out.push_back(e.class_index);
        return out;
      })
      .def("domains", [](const Dataset& d) {
        std::vector<int> out;
        for (const auto& e : d) out.push_back(e.domain_index);
        return out;
      })
      .def("class_counts", &Dataset::class_counts)
      .def("group_counts", &Dataset::group_counts)
      .def("domain_subset", &Dataset::domain_subset);

  m.def("load_dataset_csv", [](const std::filesystem::path& path) { return load_dataset_csv(path); });
  m.def("write_dataset_csv", &write_dataset_csv, py::arg("path"), py::arg("data"),
        py::arg("with_split") = false);
  m.def("entropy", [](const std::vector<double>& p) { return entropy(p); });

  m.def(
      "virtual_class_distribution",
      [](const ClassDistribution& p, const std::string& criterion, const std::string& mode) {
        return virtual_class_distribution(p, criterion_of(criterion), parse_selection_mode(mode));
      },
      py::arg("p"), py::arg("criterion"), py::arg("mode") = "example_uniform");
  m.def("combined_distribution", &combined_distribution);

  m.def("parse_strategy", [](const std::string& text) { return to_string(parse_strategy(text)); },
        "Canonical form of a strategy name");

  py::class_<SampledDistribution>(m, "SampledDistribution")
      .def_property_readonly("classes", [](const SampledDistribution& s) {
        return std::vector<double>(s.classes.begin(), s.classes.end());
      })
      .def_readonly("domains", &SampledDistribution::domains)
      .def_readonly("groups", &SampledDistribution::groups);
  m.def(
      "effective_sampled_distribution",
      [](const Dataset& data, const std::string& strategy, std::size_t num_draws, std::uint64_t seed) {
        const PairPool pool(data);
        Rng rng = make_rng(seed, 0);
        return effective_sampled_distribution(data, pool, parse_strategy(strategy), num_draws, rng);
      },
      py::arg("data"), py::arg("strategy"), py::arg("num_draws"), py::arg("seed") = 0);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init([](const std::string& arch, int input_dim, int num_classes, int hidden_units,
                       double init_scale, std::uint64_t seed) {
             ModelSpec s;
             s.arch = arch == "mlp" ? Architecture::mlp : Architecture::linear;
             s.input_dim = input_dim;
             s.num_classes = num_classes;
             s.hidden_units = hidden_units;
             s.init_scale = init_scale;
             s.seed = seed;
             s.validate();
             return s;
           }),
           py::arg("arch") = "linear", py::arg("input_dim") = 0, py::arg("num_classes") = 2,
           py::arg("hidden_units") = 0, py::arg("init_scale") = 1.0, py::arg("seed") = 0)
      .def_readwrite("input_dim", &ModelSpec::input_dim)
      .def_readwrite("num_classes", &ModelSpec::num_classes)
      .def_readwrite("seed", &ModelSpec::seed);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](double lr, std::size_t batch_size, int max_epochs, int steps_per_epoch,
                       const std::string& early_stop, std::uint64_t seed) {
             TrainConfig c;
             c.learning_rate = lr;
             c.batch_size = batch_size;
             c.max_epochs = max_epochs;
             c.steps_per_epoch = steps_per_epoch;
             c.early_stop_metric = parse_early_stop_metric(early_stop);
             c.seed = seed;
             c.validate();
             return c;
           }),
           py::arg("learning_rate") = 0.1, py::arg("batch_size") = 64, py::arg("max_epochs") = 30,
           py::arg("steps_per_epoch") = 50, py::arg("early_stop") = "validation_accuracy",
           py::arg("seed") = 0);

  py::class_<Model>(m, "Model")
      .def(py::init<ModelSpec>())
      .def("predict", [](const Model& model, const std::vector<double>& x) { return model.predict(x); })
      .def("predict_proba",
           [](const Model& model, const std::vector<double>& x) { return model.predict_proba(x); })
      .def("parameter_count", [](const Model& model) { return model.parameters().count(); });

  m.def(
      "train",
      [](const Dataset& train_set, const Dataset& val, const std::string& strategy, const ModelSpec& spec,
         const TrainConfig& config) {
        const auto parsed = parse_strategy(strategy);
        std::optional<TrainedModel> t;
        {
          py::gil_scoped_release release;
          t = train(train_set, val, parsed, spec, config);
        }
        return py::make_tuple(std::move(t->model), t->best_epoch);
      },
      py::arg("train"), py::arg("validation"), py::arg("strategy"), py::arg("spec"), py::arg("config"));

  py::class_<EvaluationReport>(m, "EvaluationReport")
      .def_readonly("count", &EvaluationReport::count)
      .def_readonly("overall_accuracy", &EvaluationReport::overall_accuracy)
      .def_readonly("worst_group_accuracy", &EvaluationReport::worst_group_accuracy)
      .def_readonly("worst_domain_accuracy", &EvaluationReport::worst_domain_accuracy)
      .def_readonly("auroc", &EvaluationReport::auroc)
      .def_readonly("worst_domain_auroc", &EvaluationReport::worst_domain_auroc)
      .def_readonly("skipped_groups", &EvaluationReport::skipped_groups);
  m.def("evaluate", &evaluate);

  m.def("auroc", [](const std::vector<double>& scores, const std::vector<int>& labels) {
    return auroc(scores, labels);
  });
  m.def(
      "distribution_divergence",
      [](const std::vector<double>& p, const std::vector<double>& q, const std::string& kind) {
        if (kind != "kl" && kind != "total_variation") throw InvalidArgument("kind must be kl or total_variation");
        return distribution_divergence(p, q, kind == "kl" ? DivergenceKind::kl : DivergenceKind::total_variation);
      },
      py::arg("p"), py::arg("q"), py::arg("kind") = "kl");
  m.def("nn_covariate_divergence",
        [](const std::vector<std::vector<double>>& train_x, const std::vector<std::vector<double>>& test_x) {
          return nn_covariate_divergence(train_x, test_x);
        });
  m.def("pearson_correlation", [](const std::vector<double>& xs, const std::vector<double>& ys) {
    return pearson_correlation(xs, ys);
  });
  m.def("uniformity_shift_report", [](const Dataset& data) {
    std::vector<py::dict> out;
    for (const auto& u : uniformity_shift_report(data)) {
      py::dict d;
      d["domain"] = u.domain_index;
      d["count"] = u.count;
      d["minority_class_ratio"] = u.minority_class_ratio;
      d["class_entropy"] = u.class_entropy;
      out.push_back(d);
    }
    return out;
  });

  m.def(
      "gen_spurious_correlation",
      [](std::size_t n_train, std::size_t n_val, std::size_t n_test, double class_balance,
         double strength_train, double strength_test, std::uint64_t seed) {
        SpuriousCorrConfig c;
        c.n_train = n_train;
        c.n_val = n_val;
        c.n_test = n_test;
        c.class_balance_train = class_balance;
        c.spurious_strength_train = strength_train;
        c.spurious_strength_test = strength_test;
        c.seed = seed;
        auto d = gen_spurious_correlation(c);
        return py::make_tuple(std::move(d.train), std::move(d.val), std::move(d.test));
      },
      py::arg("n_train") = 4000, py::arg("n_val") = 1000, py::arg("n_test") = 2000,
      py::arg("class_balance_train") = 0.77, py::arg("spurious_strength_train") = 0.95,
      py::arg("spurious_strength_test") = 0.05, py::arg("seed") = 0);
  m.def(
      "gen_temporal_label_shift",
      [](const std::vector<double>& schedule, std::pair<int, int> train_domains,
         std::pair<int, int> test_domains, double drift, std::size_t n_per_domain, std::uint64_t seed) {
        TemporalShiftConfig c;
        c.num_domains = static_cast<int>(schedule.size());
        c.class_ratio_schedule = schedule;
        c.train_domains = {train_domains.first, train_domains.second};
        c.test_domains = {test_domains.first, test_domains.second};
        c.covariate_drift_rate = drift;
        c.n_per_domain = n_per_domain;
        c.seed = seed;
        auto d = gen_temporal_label_shift(c);
        return py::make_tuple(std::move(d.train), std::move(d.val), std::move(d.tests));
      },
      py::arg("schedule"), py::arg("train_domains"), py::arg("test_domains"),
      py::arg("covariate_drift_rate") = 0.0, py::arg("n_per_domain") = 400, py::arg("seed") = 0);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readwrite("strategies", &ExperimentConfig::strategies)
      .def_readwrite("seeds", &ExperimentConfig::seeds)
      .def_readwrite("output_dir", &ExperimentConfig::output_dir)
      .def_readwrite("workers", &ExperimentConfig::workers)
      .def("__str__", &format_experiment_config);
  m.def("load_experiment_config", &load_experiment_config);

  py::class_<GridOutcome>(m, "GridOutcome")
      .def_readonly("completed", &GridOutcome::completed)
      .def_readonly("failed", &GridOutcome::failed)
      .def_readonly("failures", &GridOutcome::failures);
  m.def(
      "run_experiment_grid",
      [](const ExperimentConfig& config, int workers, std::uint64_t seed_offset) {
        py::gil_scoped_release release;
        return run_experiment_grid(config, GridOptions{workers, seed_offset});
      },
      py::arg("config"), py::arg("workers") = 0, py::arg("seed_offset") = 0);
  m.def("emit_plot_data", [](const std::filesystem::path& dir, const std::string& kind) {
    if (kind == "bars") return emit_plot_data(dir, PlotKind::bars);
    if (kind == "scatter") return emit_plot_data(dir, PlotKind::scatter);
    if (kind == "timeseries") return emit_plot_data(dir, PlotKind::timeseries);
    throw InvalidArgument("kind must be bars, scatter or timeseries");
  });
  m.def("audit_results", [](const std::filesystem::path& dir) {
    const auto r = audit_results(dir);
    return py::make_tuple(r.ok, r.mismatches);
  });
}
