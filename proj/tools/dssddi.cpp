// dssddi command line: synthetic data, training, evaluation, suggestion,
// explanation and the HTTP service.
#include <csignal>
#include <cstdio>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "dssddi/csv.hpp"
#include "dssddi/errors.hpp"
#include "dssddi/medsupport.hpp"
#include "dssddi/pipeline.hpp"
#include "dssddi/service.hpp"
#include "dssddi/synth.hpp"

using namespace dssddi;
namespace fs = std::filesystem;

namespace {

void print_metrics(std::span<const eval::MetricRow> rows) {
  // metric -> k -> value, printed as a small table
  std::map<std::string, std::map<std::size_t, double>> table;
  for (const auto& r : rows) table[r.metric][r.k] = r.value;
  std::printf("%-20s", "metric");
  for (std::size_t k = 1; k <= pipeline::kMaxReportK; ++k) std::printf("  @%-6zu", k);
  std::printf("\n");
  for (const auto& [metric, by_k] : table) {
    std::printf("%-20s", metric.c_str());
    for (std::size_t k = 1; k <= pipeline::kMaxReportK; ++k) {
      auto it = by_k.find(k);
      if (it == by_k.end())
        std::printf("  %-7s", "-");
      else
        std::printf("  %-7.4f", it->second);
    }
    std::printf("\n");
  }
}

std::vector<DrugId> parse_drug_list(const std::string& text, const DdiGraph& graph) {
  std::vector<DrugId> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    long long id = -1;
    if (parse_long(item, id) && id >= 0) {
      out.push_back(static_cast<DrugId>(id));
      continue;
    }
    // fall back to names
    bool found = false;
    for (const auto& d : graph.drugs())
      if (d.name == item) {
        out.push_back(d.id);
        found = true;
        break;
      }
    if (!found) throw QueryError("unknown drug '" + item + "'");
  }
  return out;
}

service::Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drug suggestion with DDI-aware graph models"};
  app.require_subcommand(1);

  // gen-synth
  synth::SynthConfig sc;
  std::string synth_out;
  auto* gen = app.add_subcommand("gen-synth", "Write a planted-group synthetic cohort");
  gen->add_option("--out", synth_out, "Output directory")->required();
  gen->add_option("--seed", sc.seed, "Generator seed")->capture_default_str();
  gen->add_option("--groups", sc.groups)->capture_default_str();
  gen->add_option("--patients-per-group", sc.patients_per_group)->capture_default_str();
  gen->add_option("--drugs-per-group", sc.drugs_per_group)->capture_default_str();
  gen->add_option("--drugs", sc.num_drugs, "Total drug budget")->capture_default_str();
  gen->add_option("--dim", sc.patient_dim, "Patient feature dimension")->capture_default_str();
  gen->add_option("--noise", sc.noise)->capture_default_str();
  gen->add_option("--subtypes", sc.subtypes)->capture_default_str();

  // train
  std::string data_dir, out_dir, config_file, manifest_file, backbone;
  bool no_ddi = false;
  std::optional<double> delta, mdgcn_lr, ddigcn_lr;
  std::optional<std::size_t> ddigcn_epochs, mdgcn_epochs, threads;
  std::optional<std::uint64_t> seed;
  auto* train = app.add_subcommand("train", "Run the full training pipeline");
  train->add_option("--data", data_dir, "Directory with drugs.csv, ddi_edges.csv, patients.csv, prescriptions.csv");
  train->add_option("--out", out_dir, "Run output directory")->required();
  train->add_option("--config", config_file, "key = value config file (defaults come from $DSSDDI_CONFIG)");
  train->add_option("--manifest", manifest_file, "Re-run a recorded run_manifest.json");
  train->add_flag("--no-ddi", no_ddi, "Skip DDI fusion in the suggestion model");
  train->add_option("--delta", delta, "Counterfactual loss weight");
  train->add_option("--backbone", backbone, "sgcn or gin");
  train->add_option("--ddigcn-epochs", ddigcn_epochs);
  train->add_option("--mdgcn-epochs", mdgcn_epochs);
  train->add_option("--ddigcn-lr", ddigcn_lr);
  train->add_option("--mdgcn-lr", mdgcn_lr);
  train->add_option("--seed", seed);
  train->add_option("--threads", threads);
  train->get_option("--data")->excludes(train->get_option("--manifest"));

  // eval
  std::string run_dir, metrics_out;
  auto* ev = app.add_subcommand("eval", "Re-score the test split of a run");
  ev->add_option("--run", run_dir, "Run directory written by train")->required();
  ev->add_option("--out", metrics_out, "Also write metric,k,value CSV here");

  // suggest
  std::string bundle_dir, patient_file;
  std::size_t k = 4;
  auto* sug = app.add_subcommand("suggest", "Top-k drugs for each patient in a file");
  sug->add_option("--bundle", bundle_dir, "Model bundle directory")->required();
  sug->add_option("--patient-file", patient_file, "CSV: id,feature...")->required();
  sug->add_option("--k", k)->capture_default_str();

  // explain
  std::string drugs_arg;
  double alpha = medsupport::kDefaultAlpha;
  auto* exp = app.add_subcommand("explain", "Closest truss community and SS for a drug set");
  exp->add_option("--bundle", bundle_dir, "Model bundle directory")->required();
  exp->add_option("--drugs", drugs_arg, "Comma separated drug ids or names")->required();
  exp->add_option("--alpha", alpha)->capture_default_str();

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP API for the clinician UI");
  serve->add_option("--bundle", bundle_dir, "Model bundle directory")->required();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      auto data = synth::generate_synthetic_cohort(sc);
      synth::write_synthetic(data, synth_out);
      std::printf("wrote %zu patients, %zu drugs, %zu DDI edges to %s\n", data.patient_ids.size(),
                  data.graph.num_drugs(), data.graph.edges().size(), synth_out.c_str());
    } else if (*train) {
      pipeline::RunResult r;
      if (!manifest_file.empty()) {
        r = pipeline::rerun_from_manifest(manifest_file, out_dir);
      } else {
        if (data_dir.empty()) throw ArgumentError("train needs --data or --manifest");
        auto config = pipeline::config_from_env();
        if (!config_file.empty()) config = pipeline::load_config_file(config_file, config);
        if (no_ddi) config.use_ddi = false;
        if (delta) config.delta = *delta;
        if (!backbone.empty()) config.backbone = ddigcn::backbone_from_string(backbone);
        if (ddigcn_epochs) config.ddigcn_epochs = *ddigcn_epochs;
        if (mdgcn_epochs) config.mdgcn_epochs = *mdgcn_epochs;
        if (ddigcn_lr) config.ddigcn_lr = *ddigcn_lr;
        if (mdgcn_lr) config.mdgcn_lr = *mdgcn_lr;
        if (seed) config.seed = *seed;
        if (threads) config.threads = *threads;
        r = pipeline::run_training_pipeline(pipeline::DataPaths::from_dir(data_dir), config, out_dir);
      }
      for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      print_metrics(r.metrics);
      std::printf("best validation ndcg@6 %.4f, %.1f s, run written to %s\n", r.best_validation_ndcg,
                  r.manifest["duration_seconds"].get<double>(), out_dir.c_str());
    } else if (*ev) {
      auto e = pipeline::evaluate_run(run_dir);
      for (const auto& w : e.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      print_metrics(e.rows);
      if (!metrics_out.empty()) eval::write_metrics_csv(metrics_out, e.rows);
    } else if (*sug) {
      auto model = pipeline::load_model(bundle_dir);
      auto table = read_csv(patient_file);
      if (table.header.size() != model.bundle.feature_dim() + 1)
        throw ArgumentError(patient_file + ": expected id plus " + std::to_string(model.bundle.feature_dim()) +
                            " feature columns");
      for (const auto& row : table.rows) {
        std::vector<double> x;
        for (std::size_t c = 1; c < row.cells.size(); ++c) {
          double v = std::numeric_limits<double>::quiet_NaN();  // blank = missing
          if (!row.cells[c].empty() && !parse_double(row.cells[c], v))
            throw IngestionError(patient_file + ":" + std::to_string(row.line) + ": bad number '" + row.cells[c] + "'");
          x.push_back(v);
        }
        std::printf("%s:", row.cells[0].c_str());
        for (const auto& s : mdgcn::suggest_top_k(x, k, model.bundle))
          std::printf(" %s(%.3f)", model.graph.drug(s.drug).name.c_str(), s.score);
        std::printf("\n");
      }
    } else if (*exp) {
      auto model = pipeline::load_model(bundle_dir);
      auto q = parse_drug_list(drugs_arg, model.graph);
      auto sub = medsupport::explain(model.graph, q, alpha);
      std::cout << medsupport::explanation_to_json(sub, model.graph).dump(2) << "\n";
    } else if (*serve) {
      service::Service svc(bundle_dir);
      const int bound = svc.bind(host, port);
      g_service = &svc;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::printf("serving %s on http://%s:%d\n", bundle_dir.c_str(), host.c_str(), bound);
      std::fflush(stdout);
      svc.listen();
      g_service = nullptr;
    }
  } catch (const StageError& e) {
    std::fprintf(stderr, "error in stage %s: %s\n", e.stage().c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
