// Python bindings for the selection, prediction and experiment entry points.
// Structured values cross the boundary as lists, dicts and JSON strings.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "metaal/experiment.hpp"
#include "metaal/predictor.hpp"
#include "metaal/selector.hpp"

namespace py = pybind11;
using namespace metaal;

namespace {

py::dict mask_dict(const selector::SelectionMask& m) {
  py::dict d;
  d["alpha"] = std::vector<int>(m.alpha.begin(), m.alpha.end());
  d["chosen"] = m.chosen;
  d["selected"] = m.selected();
  d["log_prob"] = m.log_prob;
  return d;
}

py::list rows_list(const std::vector<experiment::ResultRow>& rows) {
  py::list out;
  for (const auto& r : rows) {
    py::dict d;
    d["dataset"] = r.dataset;
    d["classes_per_problem"] = r.classes_per_problem;
    d["budget"] = r.budget;
    d["strategy"] = r.strategy;
    d["split"] = r.split;
    d["accuracy_mean"] = r.accuracy_mean;
    d["accuracy_std"] = r.accuracy_std;
    d["n_problems"] = r.n_problems;
    d["seed"] = r.seed;
    out.append(d);
  }
  return out;
}

py::dict outputs_dict(const experiment::RunOutputs& o) {
  py::dict d;
  d["rows"] = rows_list(o.rows);
  d["results_csv"] = o.results_csv;
  d["manifest"] = o.manifest;
  d["train_log"] = o.train_log;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<experiment::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<experiment::CompareError>(m, "CompareError", PyExc_RuntimeError);

  m.def("cosine_similarity", [](std::vector<double> a, std::vector<double> b) {
    return predictor::cosine_similarity(a, b);
  });
  m.def("euclidean_similarity", [](std::vector<double> a, std::vector<double> b) {
    return predictor::euclidean_similarity(a, b);
  });
  m.def(
      "predict",
      [](std::vector<double> x, std::vector<std::vector<double>> support, std::vector<std::size_t> labels,
         std::size_t num_classes, const std::string& similarity, double temperature) {
        predictor::LabeledSubset s;
        s.embeddings = std::move(support);
        s.labels = std::move(labels);
        s.num_classes = num_classes;
        for (std::size_t i = 0; i < s.labels.size(); ++i) s.pool_indices.push_back(i);
        s.validate();
        return predictor::predict(x, s, predictor::parse_similarity(similarity), temperature);
      },
      py::arg("x"), py::arg("support"), py::arg("labels"), py::arg("num_classes"),
      py::arg("similarity") = "euclidean", py::arg("temperature") = 1.0);

  m.def("select_random", [](std::size_t n, std::size_t k, std::uint64_t seed) {
    return mask_dict(selector::select_random(n, k, seed));
  }, py::arg("n"), py::arg("k"), py::arg("seed"));
  m.def(
      "kmedoids",
      [](std::vector<std::vector<double>> points, std::size_t k, std::uint64_t seed) {
        const auto r = selector::kmedoids(points, k, seed);
        py::dict d;
        d["medoids"] = r.medoids;
        d["initial_medoids"] = r.initial_medoids;
        d["assignment"] = r.assignment;
        d["cost_history"] = r.cost_history;
        d["cost"] = r.cost();
        return d;
      },
      py::arg("points"), py::arg("k"), py::arg("seed"));
  m.def(
      "sample_alpha",
      [](std::vector<double> scores, std::size_t k, std::uint64_t seed, bool with_replacement) {
        return mask_dict(selector::sample_alpha(selector::policy_output_from_scores(scores), k, seed, with_replacement));
      },
      py::arg("scores"), py::arg("k"), py::arg("seed"), py::arg("with_replacement") = false);

  py::class_<data::BaseDataset>(m, "Dataset")
      .def_property_readonly("rows", &data::BaseDataset::rows)
      .def_property_readonly("feature_dim", &data::BaseDataset::feature_dim)
      .def_property_readonly("class_count", &data::BaseDataset::class_count)
      .def_property_readonly("class_names", &data::BaseDataset::class_names)
      .def("row", [](const data::BaseDataset& d, std::size_t i) {
        if (i >= d.rows()) throw py::index_error("row out of range");
        auto r = d.row(i);
        return std::vector<double>(r.begin(), r.end());
      })
      .def("label", [](const data::BaseDataset& d, std::size_t i) {
        if (i >= d.rows()) throw py::index_error("row out of range");
        return d.label(i);
      })
      .def("__len__", &data::BaseDataset::rows);
  m.def("load_dataset", [](const std::filesystem::path& path, const std::string& format) {
    return data::load_dataset(path, data::parse_format(format));
  }, py::arg("path"), py::arg("format") = "csv");

  m.def("default_config_json", [] { return experiment::RunConfig{}.to_json().dump(); });
  m.def(
      "run_experiment_json",
      [](const std::string& patch) {
        auto j = experiment::RunConfig{}.to_json();
        j.merge_patch(nlohmann::json::parse(patch));
        const auto cfg = experiment::RunConfig::from_json(j);
        py::gil_scoped_release release;
        auto out = experiment::run_experiment(cfg);
        py::gil_scoped_acquire acquire;
        return outputs_dict(out);
      },
      py::arg("patch"));
  m.def(
      "replay",
      [](const std::filesystem::path& manifest, const std::filesystem::path& out) {
        experiment::RunOutputs o;
        {
          py::gil_scoped_release release;
          o = experiment::replay(manifest, out);
        }
        return outputs_dict(o);
      },
      py::arg("manifest"), py::arg("out"));
  m.def("compare_json", [](const std::vector<std::filesystem::path>& paths) {
    return experiment::to_json(experiment::compare(paths)).dump();
  }, py::arg("paths"));
  m.def(
      "gen_synthetic",
      [](const std::filesystem::path& path, std::size_t classes, std::size_t per_class, std::size_t features,
         double spread, std::uint64_t seed) {
        experiment::gen_synthetic({classes, per_class, features, spread, seed}, path);
      },
      py::arg("path"), py::arg("classes") = 40, py::arg("per_class") = 100, py::arg("features") = 16,
      py::arg("spread") = 0.5, py::arg("seed") = 0);
}
