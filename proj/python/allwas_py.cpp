#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "allwas/barysample.hpp"
#include "allwas/config.hpp"
#include "allwas/coreset.hpp"
#include "allwas/data.hpp"
#include "allwas/error.hpp"
#include "allwas/gradspace.hpp"
#include "allwas/harness.hpp"
#include "allwas/stats.hpp"
#include "allwas/transport.hpp"

namespace py = pybind11;
using namespace allwas;

namespace {

DistanceMatrix as_matrix(const Eigen::MatrixXd& values) {
  if (values.rows() != values.cols()) throw DataError("distance matrix must be square");
  DistanceMatrix m;
  m.values = values;
  m.ids.resize(static_cast<std::size_t>(values.rows()));
  for (std::size_t i = 0; i < m.ids.size(); ++i) m.ids[i] = i;
  return m;
}

}  // namespace

PYBIND11_MODULE(_allwas, m) {
  m.doc() = "Optimal transport, coreset selection and active-learning experiments";

  static py::exception<Error> error(m, "Error");
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<DataError> data_error(m, "DataError", error.ptr());
  static py::exception<RuntimeFailure> runtime_error(m, "RuntimeFailure", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(config_error.ptr(), e.what());
    } catch (const DataError& e) {
      PyErr_SetString(data_error.ptr(), e.what());
    } catch (const RuntimeFailure& e) {
      PyErr_SetString(runtime_error.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  py::class_<DiscreteMeasure>(m, "DiscreteMeasure")
      .def(py::init<Eigen::MatrixXd, Eigen::VectorXd>(), py::arg("support"), py::arg("weights"))
      .def_static("uniform", &DiscreteMeasure::uniform, py::arg("support"))
      .def_readonly("support", &DiscreteMeasure::support)
      .def_readonly("weights", &DiscreteMeasure::weights)
      .def("__len__", &DiscreteMeasure::size);

  py::class_<TransportPlan>(m, "TransportPlan")
      .def_readonly("coupling", &TransportPlan::coupling)
      .def_readonly("cost", &TransportPlan::cost)
      .def_readonly("regularized_cost", &TransportPlan::regularized_cost)
      .def_readonly("epsilon", &TransportPlan::epsilon)
      .def_readonly("converged", &TransportPlan::converged)
      .def_readonly("iterations", &TransportPlan::iterations)
      .def_readonly("marginal_violation", &TransportPlan::marginal_violation);

  m.def(
      "sinkhorn_distance",
      [](const DiscreteMeasure& a, const DiscreteMeasure& b, double p, std::optional<double> epsilon,
         double eps_scale, std::size_t max_iter, double tol) {
        SinkhornOptions o;
        o.p = p;
        o.epsilon = epsilon;
        o.eps_scale = eps_scale;
        o.max_iter = max_iter;
        o.tol = tol;
        py::gil_scoped_release release;
        return sinkhorn_distance(a, b, o);
      },
      py::arg("a"), py::arg("b"), py::arg("p") = 2.0, py::arg("epsilon") = py::none(),
      py::arg("eps_scale") = 0.05, py::arg("max_iter") = 1000, py::arg("tol") = 1e-6);

  m.def("exact_distance", &exact_distance_oracle, py::arg("a"), py::arg("b"), py::arg("p") = 2.0);

  py::class_<BarycenterResult>(m, "BarycenterResult")
      .def_readonly("barycenter", &BarycenterResult::barycenter)
      .def_readonly("objective_trace", &BarycenterResult::objective_trace)
      .def_readonly("regularized_trace", &BarycenterResult::regularized_trace)
      .def_readonly("epsilon", &BarycenterResult::epsilon);

  m.def(
      "wasserstein_barycenter",
      [](const std::vector<DiscreteMeasure>& measures, const std::vector<double>& lambdas,
         std::size_t support_size, double p, std::size_t outer_iter) {
        BarycenterOptions o;
        o.p = p;
        o.outer_iter = outer_iter;
        py::gil_scoped_release release;
        return wasserstein_barycenter(measures, lambdas, support_size, o);
      },
      py::arg("measures"), py::arg("lambdas"), py::arg("support_size") = 0, py::arg("p") = 2.0,
      py::arg("outer_iter") = 10);

  m.def(
      "pairwise_wasserstein",
      [](const std::vector<DiscreteMeasure>& measures, double p) {
        PairwiseOptions o;
        o.p = p;
        py::gil_scoped_release release;
        return pairwise_wasserstein(measures, o).values;
      },
      py::arg("measures"), py::arg("p") = 2.0);

  py::class_<SelectionState>(m, "SelectionState")
      .def_readonly("selected", &SelectionState::selected)
      .def_readonly("appended", &SelectionState::appended)
      .def_readonly("value", &SelectionState::value)
      .def_readonly("value_trace", &SelectionState::value_trace)
      .def_readonly("s0_cost", &SelectionState::s0_cost);

  m.def(
      "greedy_select",
      [](const Eigen::MatrixXd& distances, std::size_t k, const std::vector<std::size_t>& warm_start,
         std::optional<double> s0_cost) {
        const DistanceMatrix dm = as_matrix(distances);
        return greedy_select(dm, k, warm_start, s0_cost.value_or(default_s0_cost(dm)));
      },
      py::arg("distances"), py::arg("k"), py::arg("warm_start") = std::vector<std::size_t>{},
      py::arg("s0_cost") = py::none());

  m.def(
      "objective_f",
      [](const Eigen::MatrixXd& distances, const std::vector<std::size_t>& selected, double s0_cost) {
        return objective_F(as_matrix(distances), selected, s0_cost);
      },
      py::arg("distances"), py::arg("selected"), py::arg("s0_cost"));

  py::class_<WilcoxonResult>(m, "WilcoxonResult")
      .def_readonly("statistic", &WilcoxonResult::statistic)
      .def_readonly("p", &WilcoxonResult::p)
      .def_readonly("n_used", &WilcoxonResult::n_used)
      .def_readonly("zeros_dropped", &WilcoxonResult::zeros_dropped)
      .def_readonly("exact", &WilcoxonResult::exact);

  m.def(
      "wilcoxon_signed_rank",
      [](const std::vector<double>& x, const std::vector<double>& y, const std::string& mode) {
        WilcoxonMode wm = WilcoxonMode::kAuto;
        if (mode == "exact") {
          wm = WilcoxonMode::kExact;
        } else if (mode == "normal") {
          wm = WilcoxonMode::kNormalApprox;
        } else if (mode != "auto") {
          throw ConfigError("mode must be auto, exact or normal");
        }
        return wilcoxon_signed_rank(x, y, wm);
      },
      py::arg("x"), py::arg("y"), py::arg("mode") = "auto");

  m.def(
      "f1_target",
      [](const std::vector<std::size_t>& preds, const std::vector<std::size_t>& truth, std::size_t target) {
        return f1_target(preds, truth, target);
      },
      py::arg("preds"), py::arg("truth"), py::arg("target"));
  m.def(
      "f1_macro",
      [](const std::vector<std::size_t>& preds, const std::vector<std::size_t>& truth, std::size_t classes) {
        return f1_macro(preds, truth, classes);
      },
      py::arg("preds"), py::arg("truth"), py::arg("num_classes"));

  m.def(
      "featurize_text",
      [](const std::string& text, std::size_t d, std::uint64_t seed) { return featurize_text(text, d, seed).tokens; },
      py::arg("text"), py::arg("d") = 64, py::arg("seed") = 0);

  m.def(
      "make_synthetic",
      [](const std::string& spec_json) {
        const Corpus c = make_synthetic(parse_synthetic_spec(spec_json));
        Eigen::MatrixXd pooled(static_cast<Eigen::Index>(c.size()), static_cast<Eigen::Index>(c.dim()));
        std::vector<std::size_t> labels;
        for (std::size_t i = 0; i < c.size(); ++i) {
          pooled.row(static_cast<Eigen::Index>(i)) = c.examples[i].embedding.pooled.transpose();
          labels.push_back(c.examples[i].label);
        }
        return py::make_tuple(pooled, labels);
      },
      py::arg("spec_json"), "Pooled embeddings and labels of a synthetic corpus.");

  m.def(
      "run_experiment",
      [](const std::string& config_json, const std::filesystem::path& base_dir, bool write_files) {
        const ExperimentConfig cfg = parse_config(config_json, base_dir);
        RunOptions opts;
        opts.write_files = write_files;
        opts.resume = false;
        RunRecord rec;
        {
          py::gil_scoped_release release;
          rec = run_experiment(cfg, opts);
        }
        py::list rows;
        for (const auto& r : rec.rows) {
          py::dict d;
          d["setting"] = r.setting;
          d["strategy"] = r.strategy;
          d["seed"] = r.seed;
          d["iteration"] = r.iteration;
          d["labeled"] = r.labeled;
          d["f1"] = r.f1;
          d["seconds"] = r.seconds;
          rows.append(d);
        }
        return py::make_tuple(rec.config_hash, rows);
      },
      py::arg("config_json"), py::arg("base_dir") = std::filesystem::path(), py::arg("write_files") = false,
      "Runs a config; returns (config_hash, rows).");
}
