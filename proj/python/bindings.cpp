// Python bindings: thin wrappers, JSON payloads cross as Python dicts.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dssddi/errors.hpp"
#include "dssddi/evalmetrics.hpp"
#include "dssddi/medsupport.hpp"
#include "dssddi/pipeline.hpp"
#include "dssddi/synth.hpp"

namespace py = pybind11;
using namespace dssddi;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

DdiGraph graph_from_edges(std::size_t n, const std::vector<std::tuple<DrugId, DrugId, int>>& edges) {
  std::vector<Drug> drugs;
  for (std::size_t i = 0; i < n; ++i) drugs.push_back({i, "d" + std::to_string(i), {}});
  std::vector<DdiEdge> es;
  for (auto [u, v, s] : edges) es.push_back({u, v, s});
  return DdiGraph(std::move(drugs), std::move(es));
}

struct Model {
  pipeline::LoadedModel m;
  medsupport::TrussIndex truss;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "DDI-aware drug suggestion";

  // Error hierarchy; the more specific ones first so translation picks them.
  static py::exception<Error> base(m, "Error");
  static py::exception<ArgumentError> arg(m, "ArgumentError", base.ptr());
  static py::exception<QueryError> query(m, "QueryError", base.ptr());
  static py::exception<ConfigError> config(m, "ConfigError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ArgumentError& e) {
      arg(e.what());
    } catch (const QueryError& e) {
      query(e.what());
    } catch (const ConfigError& e) {
      config(e.what());
    } catch (const Error& e) {
      base(e.what());
    }
  });

  m.def(
      "generate_synthetic",
      [](const std::filesystem::path& out, std::uint64_t seed, std::size_t groups, std::size_t patients_per_group,
         double noise) {
        synth::SynthConfig c;
        c.seed = seed;
        c.groups = groups;
        c.patients_per_group = patients_per_group;
        c.noise = noise;
        c.num_drugs = std::max(c.num_drugs, groups * c.drugs_per_group);
        auto d = synth::generate_synthetic_cohort(c);
        synth::write_synthetic(d, out);
        return py::dict(py::arg("patients") = d.patient_ids.size(), py::arg("drugs") = d.graph.num_drugs(),
                        py::arg("edges") = d.graph.edges().size());
      },
      py::arg("out_dir"), py::arg("seed") = 7, py::arg("groups") = 5, py::arg("patients_per_group") = 40,
      py::arg("noise") = 0.1);

  m.def(
      "train",
      [](const std::filesystem::path& data, const std::filesystem::path& out, const py::dict& overrides) {
        pipeline::PipelineConfig c;
        for (auto [k, v] : overrides) pipeline::apply_config_value(c, py::str(k), py::str(v));
        c.validate();
        pipeline::RunResult r;
        {
          py::gil_scoped_release release;
          r = pipeline::run_training_pipeline(pipeline::DataPaths::from_dir(data), c, out);
        }
        py::dict metrics;
        for (const auto& row : r.metrics) metrics[py::make_tuple(row.metric, row.k)] = row.value;
        return py::dict(py::arg("metrics") = metrics, py::arg("manifest") = to_py(r.manifest),
                        py::arg("best_validation_ndcg") = r.best_validation_ndcg);
      },
      py::arg("data_dir"), py::arg("out_dir"), py::arg("config") = py::dict(),
      "Runs the pipeline; `config` maps config-file keys to values.");

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::filesystem::path& bundle) {
             auto lm = pipeline::load_model(bundle);
             auto t = medsupport::truss_decomposition(lm.graph);
             return Model{std::move(lm), std::move(t)};
           }),
           py::arg("bundle_dir"))
      .def_property_readonly("num_drugs", [](const Model& self) { return self.m.bundle.num_drugs(); })
      .def_property_readonly("feature_names", [](const Model& self) { return self.m.bundle.feature_names; })
      .def("drug_name", [](const Model& self, DrugId id) { return self.m.graph.drug(id).name; })
      .def(
          "suggest",
          [](const Model& self, const std::vector<double>& features, std::size_t k) {
            std::vector<std::pair<DrugId, double>> out;
            for (const auto& s : mdgcn::suggest_top_k(features, k, self.m.bundle)) out.emplace_back(s.drug, s.score);
            return out;
          },
          py::arg("features"), py::arg("k") = 4, "Top-k (drug id, score); NaN features are imputed.")
      .def(
          "explain",
          [](const Model& self, const std::vector<DrugId>& drugs, double alpha) {
            auto sub = medsupport::explain(self.m.graph, self.truss, drugs, alpha);
            return to_py(medsupport::explanation_to_json(sub, self.m.graph));
          },
          py::arg("drug_ids"), py::arg("alpha") = medsupport::kDefaultAlpha);

  m.def(
      "truss_decomposition",
      [](std::size_t n, const std::vector<std::tuple<DrugId, DrugId, int>>& edges) {
        auto t = medsupport::truss_decomposition(graph_from_edges(n, edges));
        std::map<std::pair<DrugId, DrugId>, int> out(t.truss.begin(), t.truss.end());
        return out;
      },
      py::arg("num_drugs"), py::arg("edges"), "Edge truss numbers keyed by (u, v) with u < v.");

  m.def(
      "suggestion_satisfaction",
      [](std::size_t k, std::size_t n, std::size_t pos, std::size_t neg, std::size_t out_neg, double alpha) {
        return medsupport::suggestion_satisfaction(k, n, pos, neg, out_neg, alpha);
      },
      py::arg("k"), py::arg("n"), py::arg("pos"), py::arg("neg"), py::arg("out_neg"),
      py::arg("alpha") = medsupport::kDefaultAlpha);

  m.def(
      "ndcg_at_k",
      [](const std::vector<DrugId>& suggested, const std::vector<DrugId>& truth) {
        std::vector<eval::RankedSuggestion> batch{{0, suggested, truth}};
        return eval::ndcg_at_k(batch);
      },
      py::arg("suggested"), py::arg("truth"));

  m.def(
      "parse_config",
      [](const std::string& text) { return to_py(pipeline::parse_config_text(text).to_json()); },
      py::arg("text"));
  m.def("config_from_json", [](const py::object& o) {
    return to_py(pipeline::PipelineConfig::from_json(from_py(o)).to_json());
  });
}
