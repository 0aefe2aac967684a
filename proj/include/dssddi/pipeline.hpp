#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dssddi/ddigcn.hpp"
#include "dssddi/ddigraph.hpp"
#include "dssddi/evalmetrics.hpp"
#include "dssddi/mdgcn.hpp"
#include "json.hpp"

namespace dssddi::pipeline {

/// Run settings. Text form is one `key = value` per line, `#` starts a
/// comment; keys match the field names below.
struct PipelineConfig {
  std::uint64_t seed = 7;
  ddigcn::Backbone backbone = ddigcn::Backbone::kSgcn;
  std::size_t embedding_dim = mdgcn::kEmbeddingDim;
  std::size_t ddigcn_layers = 3;
  std::size_t ddigcn_epochs = 400;
  double ddigcn_lr = 0.001;
  std::size_t mdgcn_layers = 2;
  std::size_t mdgcn_epochs = 1000;
  double mdgcn_lr = 0.01;
  double delta = 1.0;
  std::size_t negative_ratio = 1;
  std::size_t eval_every = 10;
  bool use_ddi = true;
  std::size_t clusters = 5;
  double gamma_patient = 0.0;  // <= 0 picks the 10th distance percentile
  double gamma_drug = 0.0;
  double zero_edge_ratio = 1.0;
  double split_train = 5, split_validation = 3, split_test = 2;
  double alpha = 0.5;
  std::size_t threads = 1;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
  /// Throws ConfigError on an out-of-range value.
  void validate() const;
};

inline constexpr const char* kConfigEnvVar = "DSSDDI_CONFIG";

/// Sets one field from its text form; ConfigError on unknown keys or values.
void apply_config_value(PipelineConfig& config, const std::string& key, const std::string& value);
PipelineConfig parse_config_text(const std::string& text, PipelineConfig base = {});
PipelineConfig load_config_file(const std::filesystem::path& path, PipelineConfig base = {});
/// Defaults, overlaid with the file named by DSSDDI_CONFIG when set.
PipelineConfig config_from_env();

struct DataPaths {
  std::filesystem::path drugs, edges, patients, prescriptions;
  /// The four standard file names under `dir`.
  static DataPaths from_dir(const std::filesystem::path& dir);
};

/// 64-bit FNV-1a of a file's bytes as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);
std::string text_hash(const std::string& text);

/// Y_U = cos(X_U, X_O) Y_O. A zero-norm row gets similarity 0.
numkit::Tensor usersim_baseline(const numkit::Tensor& x_unobserved, const numkit::Tensor& x_observed,
                                const numkit::Tensor& y_observed);
/// Baseline scores of the test patients, observed = training split.
numkit::Tensor usersim_baseline(const Cohort& cohort);

/// Rows of `scores` ranked into suggestion lists of length `k`, truth taken
/// from the cohort's prescriptions of patients `rows`.
std::vector<eval::RankedSuggestion> rank_rows(const numkit::Tensor& scores, const Cohort& cohort,
                                              std::span<const std::size_t> rows, std::size_t k);

inline constexpr std::size_t kMaxReportK = 6;

struct Evaluation {
  std::vector<eval::MetricRow> rows;
  std::vector<std::string> warnings;
};

/// Test-split precision/recall/ndcg for k = 1..6, SS for k = 2..6 and the
/// UserSim rows (usersim_precision, ...) for the same k.
Evaluation evaluate_bundle(const mdgcn::ModelBundle& bundle, const DdiGraph& graph,
                           const Cohort& cohort, double alpha);

struct RunResult {
  nlohmann::json manifest;
  std::vector<eval::MetricRow> metrics;
  std::vector<double> ddigcn_loss;
  std::vector<double> mdgcn_loss;
  std::vector<std::pair<std::size_t, double>> validation_ndcg;
  double best_validation_ndcg = 0.0;
  std::vector<std::string> warnings;
};

/// ddigcn -> causal -> mdgcn -> evaluation, then writes under `output_dir`:
/// bundle/ (model, manifest, signed graph), metrics.csv, losses.csv and
/// run_manifest.json. A failing stage raises StageError naming it.
RunResult run_training_pipeline(const DataPaths& paths, const PipelineConfig& config,
                                const std::filesystem::path& output_dir);

/// Signed graph and split cohort exactly as a run with `config` sees them.
std::pair<DdiGraph, Cohort> ingest(const DataPaths& paths, const PipelineConfig& config);

struct RecordedRun {
  nlohmann::json manifest;
  PipelineConfig config;
  DataPaths paths;
};
RecordedRun read_run_manifest(const std::filesystem::path& manifest_path);

/// Re-scores the test split of a finished run directory with its bundle.
Evaluation evaluate_run(const std::filesystem::path& run_dir);

/// Replays the run described by a run_manifest.json after checking the
/// input hashes. Throws IngestionError when an input changed.
RunResult rerun_from_manifest(const std::filesystem::path& manifest_path,
                              const std::filesystem::path& output_dir);

/// Bundle plus the signed graph it explains with.
struct LoadedModel {
  mdgcn::ModelBundle bundle;
  DdiGraph graph;  // synergy/antagonism edges only
};
LoadedModel load_model(const std::filesystem::path& bundle_dir);

}  // namespace dssddi::pipeline
