#include "dssddi/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "dssddi/causal.hpp"
#include "dssddi/csv.hpp"
#include "dssddi/errors.hpp"
#include "dssddi/medsupport.hpp"
#include "dssddi/rng.hpp"

namespace dssddi::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using numkit::Tensor;

// ---- config ----

namespace {

std::string trim(std::string s) {
  const char* ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  const auto end = s.find_last_not_of(ws);
  s.erase(end == std::string::npos ? 0 : end + 1);
  return s;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  long long out = 0;
  if (!parse_long(v, out) || out < 0) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(out);
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0;
  if (!parse_double(v, out) || !std::isfinite(out)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool to_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

}  // namespace

void apply_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "seed") {
    c.seed = to_count(key, v);
  } else if (key == "backbone") {
    try {
      c.backbone = ddigcn::backbone_from_string(v);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("backbone: ") + e.what());
    }
  } else if (key == "embedding_dim") {
    c.embedding_dim = to_count(key, v);
  } else if (key == "ddigcn_layers") {
    c.ddigcn_layers = to_count(key, v);
  } else if (key == "ddigcn_epochs") {
    c.ddigcn_epochs = to_count(key, v);
  } else if (key == "ddigcn_lr") {
    c.ddigcn_lr = to_real(key, v);
  } else if (key == "mdgcn_layers") {
    c.mdgcn_layers = to_count(key, v);
  } else if (key == "mdgcn_epochs") {
    c.mdgcn_epochs = to_count(key, v);
  } else if (key == "mdgcn_lr") {
    c.mdgcn_lr = to_real(key, v);
  } else if (key == "delta") {
    c.delta = to_real(key, v);
  } else if (key == "negative_ratio") {
    c.negative_ratio = to_count(key, v);
  } else if (key == "eval_every") {
    c.eval_every = to_count(key, v);
  } else if (key == "use_ddi") {
    c.use_ddi = to_flag(key, v);
  } else if (key == "clusters") {
    c.clusters = to_count(key, v);
  } else if (key == "gamma_patient") {
    c.gamma_patient = to_real(key, v);
  } else if (key == "gamma_drug") {
    c.gamma_drug = to_real(key, v);
  } else if (key == "zero_edge_ratio") {
    c.zero_edge_ratio = to_real(key, v);
  } else if (key == "split") {
    // train:validation:test
    std::vector<double> parts;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(to_real(key, trim(item)));
    if (parts.size() != 3) throw ConfigError("split: expected train:validation:test, got '" + v + "'");
    c.split_train = parts[0];
    c.split_validation = parts[1];
    c.split_test = parts[2];
  } else if (key == "alpha") {
    c.alpha = to_real(key, v);
  } else if (key == "threads") {
    c.threads = to_count(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void PipelineConfig::validate() const {
  if (embedding_dim == 0 || embedding_dim % 2) throw ConfigError("embedding_dim must be even and positive");
  if (ddigcn_layers == 0 || mdgcn_layers == 0) throw ConfigError("layer counts must be positive");
  if (!(ddigcn_lr > 0) || !(mdgcn_lr > 0)) throw ConfigError("learning rates must be positive");
  if (delta < 0) throw ConfigError("delta must be >= 0");
  if (negative_ratio == 0) throw ConfigError("negative_ratio must be positive");
  if (clusters == 0) throw ConfigError("clusters must be positive");
  if (zero_edge_ratio < 0) throw ConfigError("zero_edge_ratio must be >= 0");
  if (split_train <= 0 || split_validation < 0 || split_test <= 0)
    throw ConfigError("split needs positive train and test parts");
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
  if (threads == 0) throw ConfigError("threads must be positive");
}

json PipelineConfig::to_json() const {
  return {{"seed", seed},
          {"backbone", ddigcn::to_string(backbone)},
          {"embedding_dim", embedding_dim},
          {"ddigcn_layers", ddigcn_layers},
          {"ddigcn_epochs", ddigcn_epochs},
          {"ddigcn_lr", ddigcn_lr},
          {"mdgcn_layers", mdgcn_layers},
          {"mdgcn_epochs", mdgcn_epochs},
          {"mdgcn_lr", mdgcn_lr},
          {"delta", delta},
          {"negative_ratio", negative_ratio},
          {"eval_every", eval_every},
          {"use_ddi", use_ddi},
          {"clusters", clusters},
          {"gamma_patient", gamma_patient},
          {"gamma_drug", gamma_drug},
          {"zero_edge_ratio", zero_edge_ratio},
          {"split", {split_train, split_validation, split_test}},
          {"alpha", alpha},
          {"threads", threads}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.backbone = ddigcn::backbone_from_string(j.at("backbone").get<std::string>());
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.ddigcn_layers = j.at("ddigcn_layers").get<std::size_t>();
    c.ddigcn_epochs = j.at("ddigcn_epochs").get<std::size_t>();
    c.ddigcn_lr = j.at("ddigcn_lr").get<double>();
    c.mdgcn_layers = j.at("mdgcn_layers").get<std::size_t>();
    c.mdgcn_epochs = j.at("mdgcn_epochs").get<std::size_t>();
    c.mdgcn_lr = j.at("mdgcn_lr").get<double>();
    c.delta = j.at("delta").get<double>();
    c.negative_ratio = j.at("negative_ratio").get<std::size_t>();
    c.eval_every = j.at("eval_every").get<std::size_t>();
    c.use_ddi = j.at("use_ddi").get<bool>();
    c.clusters = j.at("clusters").get<std::size_t>();
    c.gamma_patient = j.at("gamma_patient").get<double>();
    c.gamma_drug = j.at("gamma_drug").get<double>();
    c.zero_edge_ratio = j.at("zero_edge_ratio").get<double>();
    const auto& split = j.at("split");
    c.split_train = split.at(0).get<double>();
    c.split_validation = split.at(1).get<double>();
    c.split_test = split.at(2).get<double>();
    c.alpha = j.at("alpha").get<double>();
    c.threads = j.at("threads").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config snapshot: ") + e.what());
  }
  return c;
}

PipelineConfig parse_config_text(const std::string& text, PipelineConfig base) {
  std::stringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    try {
      apply_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

PipelineConfig load_config_file(const fs::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

PipelineConfig config_from_env() {
  const char* path = std::getenv(kConfigEnvVar);
  if (!path || !*path) return {};
  return load_config_file(path);
}

DataPaths DataPaths::from_dir(const fs::path& dir) {
  return {dir / "drugs.csv", dir / "ddi_edges.csv", dir / "patients.csv", dir / "prescriptions.csv"};
}

// ---- hashing ----

namespace {

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void feed(const char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(p[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

}  // namespace

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot read " + path.string());
  Fnv f;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) f.feed(buf, static_cast<std::size_t>(in.gcount()));
  return f.hex();
}

std::string text_hash(const std::string& text) {
  Fnv f;
  f.feed(text.data(), text.size());
  return f.hex();
}

// ---- baseline and ranking ----

Tensor usersim_baseline(const Tensor& xu, const Tensor& xo, const Tensor& yo) {
  if (xu.cols() != xo.cols()) throw ShapeError("usersim: feature widths differ");
  if (xo.rows() != yo.rows()) throw ShapeError("usersim: observed rows differ");
  if (xo.rows() == 0) throw ArgumentError("usersim: observed split is empty");
  auto normalized = [](const Tensor& x) {
    Tensor out = x;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double norm = 0;
      for (double v : x.row(r)) norm += v * v;
      norm = std::sqrt(norm);
      for (double& v : out.row(r)) v = norm > 0 ? v / norm : 0.0;
    }
    return out;
  };
  Tensor a = normalized(xu);
  Tensor b = normalized(xo);
  Tensor sim(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0;
      for (std::size_t f = 0; f < a.cols(); ++f) s += a(i, f) * b(j, f);
      sim(i, j) = s;
    }
  return numkit::matmul(sim, yo);
}

namespace {

Tensor gather(const Tensor& m, std::span<const std::size_t> rows) {
  Tensor out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(m.row(rows[r]).begin(), m.row(rows[r]).end(), out.row(r).begin());
  return out;
}

}  // namespace

Tensor usersim_baseline(const Cohort& cohort) {
  auto train = cohort.indices(Split::kTrain);
  auto test = cohort.indices(Split::kTest);
  return usersim_baseline(gather(cohort.features, test), gather(cohort.features, train),
                          gather(cohort.medications, train));
}

std::vector<eval::RankedSuggestion> rank_rows(const Tensor& scores, const Cohort& cohort,
                                              std::span<const std::size_t> rows, std::size_t k) {
  if (scores.rows() != rows.size()) throw ShapeError("rank_rows: score rows differ from patient rows");
  std::vector<eval::RankedSuggestion> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    eval::RankedSuggestion s;
    s.patient_id = cohort.patient_ids[rows[r]];
    auto ranked = mdgcn::rank_drugs(scores.row(r));
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) s.suggested.push_back(ranked[i].drug);
    s.truth = cohort.drugs_of(rows[r]);
    out.push_back(std::move(s));
  }
  return out;
}

Evaluation evaluate_bundle(const mdgcn::ModelBundle& bundle, const DdiGraph& graph,
                           const Cohort& cohort, double alpha) {
  Evaluation out;
  auto test = cohort.indices(Split::kTest);
  if (test.empty()) throw ArgumentError("test split is empty");
  const std::size_t kmax = std::min(kMaxReportK, bundle.num_drugs());
  std::vector<std::size_t> ks(kmax);
  std::iota(ks.begin(), ks.end(), 1);

  Tensor scores(test.size(), bundle.num_drugs());
  for (std::size_t r = 0; r < test.size(); ++r) {
    auto s = bundle.score_all(cohort.raw_features.row(test[r]));
    std::copy(s.begin(), s.end(), scores.row(r).begin());
  }
  auto ranked = rank_rows(scores, cohort, test, kmax);
  out.rows = eval::ranking_metrics(ranked, ks);

  DdiGraph signed_graph = graph.signed_only();
  auto truss = medsupport::truss_decomposition(signed_graph);
  for (std::size_t k = 2; k <= kmax; ++k) {
    double total = 0;
    for (const auto& r : ranked) {
      std::vector<DrugId> q(r.suggested.begin(), r.suggested.begin() + k);
      total += medsupport::explain(signed_graph, truss, q, alpha).ss;
    }
    out.rows.push_back({"ss", k, total / static_cast<double>(ranked.size())});
  }

  auto base = rank_rows(usersim_baseline(cohort), cohort, test, kmax);
  for (auto row : eval::ranking_metrics(base, ks)) {
    row.metric = "usersim_" + row.metric;
    out.rows.push_back(row);
  }
  std::vector<std::string> warnings;
  eval::recall_at_k(ranked, &warnings);
  out.warnings = warnings;
  return out;
}

// ---- orchestration ----

namespace {

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

// Same, recording wall time under `timings[name]`.
template <typename Fn>
auto timed_stage(json& timings, const std::string& name, Fn&& fn) -> decltype(fn()) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Record {
    json& timings;
    const std::string& name;
    std::chrono::steady_clock::time_point t0;
    ~Record() { timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
  } record{timings, name, t0};
  return stage(name, std::forward<Fn>(fn));
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json metrics_json(const std::vector<eval::MetricRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) out.push_back({{"metric", r.metric}, {"k", r.k}, {"value", r.value}});
  return out;
}

void write_losses(const fs::path& path, const RunResult& r) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "stage,epoch,loss\n";
  for (std::size_t e = 0; e < r.ddigcn_loss.size(); ++e) out << "ddigcn," << e << ',' << format_double(r.ddigcn_loss[e]) << '\n';
  for (std::size_t e = 0; e < r.mdgcn_loss.size(); ++e) out << "mdgcn," << e << ',' << format_double(r.mdgcn_loss[e]) << '\n';
}

}  // namespace

std::pair<DdiGraph, Cohort> ingest(const DataPaths& paths, const PipelineConfig& config) {
  DdiGraph g = load_ddi_graph(paths.drugs, paths.edges).signed_only();
  CohortOptions opts;
  opts.ratio = {config.split_train, config.split_validation, config.split_test};
  opts.seed = stage_seed(config.seed, "split");
  Cohort c = load_cohort(paths.patients, paths.prescriptions, g, opts);
  return {std::move(g), std::move(c)};
}

namespace {

RunResult run_with_paths(const DataPaths& paths, const PipelineConfig& config, const fs::path& output_dir,
                         json inputs) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  RunResult result;
  json timings = json::object();
  json seeds = {{"root", config.seed},
                {"split", stage_seed(config.seed, "split")},
                {"zero_edges", stage_seed(config.seed, "zero_edges")},
                {"ddigcn", stage_seed(config.seed, "ddigcn")},
                {"causal", stage_seed(config.seed, "causal")},
                {"mdgcn", stage_seed(config.seed, "mdgcn")}};

  auto [graph, cohort] = timed_stage(timings, "ingest", [&] { return ingest(paths, config); });
  result.warnings = cohort.warnings;

  auto ddi = timed_stage(timings, "ddigcn", [&] {
    const auto count = static_cast<std::size_t>(
        std::llround(config.zero_edge_ratio * static_cast<double>(graph.edges().size())));
    auto zeros = sample_zero_edges(graph, count, seeds["zero_edges"].get<std::uint64_t>());
    ddigcn::Config dc;
    dc.backbone = config.backbone;
    dc.layers = config.ddigcn_layers;
    dc.embedding_dim = config.embedding_dim;
    dc.hidden_dim = config.embedding_dim;
    dc.learning_rate = config.ddigcn_lr;
    dc.epochs = config.ddigcn_epochs;
    dc.seed = seeds["ddigcn"].get<std::uint64_t>();
    return ddigcn::train_ddigcn(graph.with_edges(zeros), dc);
  });
  result.ddigcn_loss = ddi.loss_curve;

  auto state = timed_stage(timings, "causal", [&] {
    causal::CfConfig cf;
    cf.gamma_patient = config.gamma_patient;
    cf.gamma_drug = config.gamma_drug;
    cf.clusters = config.clusters;
    cf.seed = seeds["causal"].get<std::uint64_t>();
    return causal::prepare_treatments(cohort, ddi.embeddings.z, graph, cf, config.threads);
  });

  mdgcn::TrainConfig mc;
  mc.delta = config.delta;
  mc.epochs = config.mdgcn_epochs;
  mc.learning_rate = config.mdgcn_lr;
  mc.negative_ratio = config.negative_ratio;
  mc.layers = config.mdgcn_layers;
  mc.width = config.embedding_dim;
  mc.decoder_hidden = config.embedding_dim;
  mc.seed = seeds["mdgcn"].get<std::uint64_t>();
  mc.eval_every = config.eval_every;

  auto [trained, data] = timed_stage(timings, "mdgcn", [&] {
    Tensor fusion = config.use_ddi ? ddi.embeddings.z : Tensor(graph.num_drugs(), config.embedding_dim);
    auto d = mdgcn::make_training_data(cohort, state, mdgcn::drug_input_features(graph), fusion);
    auto r = mdgcn::train_mdgcn(d, mc);
    return std::pair{std::move(r), std::move(d)};
  });
  result.mdgcn_loss = trained.loss;
  result.validation_ndcg = trained.validation_ndcg;
  for (const auto& [epoch, v] : trained.validation_ndcg)
    if (epoch == trained.best_epoch) result.best_validation_ndcg = v;

  auto bundle = mdgcn::make_bundle(trained, data, cohort, state, graph, mc);
  bundle.manifest["use_ddi"] = config.use_ddi;
  bundle.manifest["backbone"] = ddigcn::to_string(config.backbone);
  bundle.manifest["inputs"] = inputs;
  bundle.manifest["alpha"] = config.alpha;

  auto evaluation = timed_stage(timings, "evaluate", [&] { return evaluate_bundle(bundle, graph, cohort, config.alpha); });
  result.metrics = evaluation.rows;
  if (!trained.validation_ndcg.empty())
    result.metrics.push_back({"val_ndcg", mc.eval_k, result.best_validation_ndcg});
  for (auto& w : evaluation.warnings) result.warnings.push_back(w);

  stage("persist", [&] {
    fs::create_directories(output_dir);
    const fs::path bundle_dir = output_dir / "bundle";
    mdgcn::save_bundle(bundle_dir, bundle);
    save_ddi_graph(graph, bundle_dir / "drugs.csv", bundle_dir / "ddi_edges.csv");
    eval::write_metrics_csv(output_dir / "metrics.csv", result.metrics);
    write_losses(output_dir / "losses.csv", result);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.manifest = {{"format", "dssddi.run"},
                       {"version", 1},
                       {"config", config.to_json()},
                       {"inputs", inputs},
                       {"seeds", seeds},
                       {"metrics", metrics_json(result.metrics)},
                       {"metrics_hash", file_hash(output_dir / "metrics.csv")},
                       {"checkpoints", {{"bundle", "bundle"}, {"metrics", "metrics.csv"}, {"losses", "losses.csv"}}},
                       {"best_epoch", trained.best_epoch},
                       {"warnings", result.warnings},
                       {"finished_at", utc_now()},
                       {"stage_seconds", timings},
                       {"duration_seconds", seconds}};
    std::ofstream out(output_dir / "run_manifest.json");
    if (!out) throw IngestionError("cannot write run manifest");
    out << result.manifest.dump(2) << '\n';
  });
  return result;
}

json describe_inputs(const DataPaths& paths) {
  json out = json::object();
  auto add = [&](const char* name, const fs::path& p) {
    out[name] = {{"path", fs::absolute(p).lexically_normal().string()}, {"fnv1a", file_hash(p)}};
  };
  add("drugs", paths.drugs);
  add("edges", paths.edges);
  add("patients", paths.patients);
  add("prescriptions", paths.prescriptions);
  return out;
}

}  // namespace

RunResult run_training_pipeline(const DataPaths& paths, const PipelineConfig& config,
                                const fs::path& output_dir) {
  json inputs = stage("ingest", [&] { return describe_inputs(paths); });
  return run_with_paths(paths, config, output_dir, std::move(inputs));
}

RecordedRun read_run_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IngestionError("cannot read " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "dssddi.run") throw FormatError(manifest_path.string() + ": not a run manifest");
  PipelineConfig config = PipelineConfig::from_json(manifest.at("config"));
  const json& inputs = manifest.at("inputs");
  DataPaths paths{inputs.at("drugs").at("path").get<std::string>(), inputs.at("edges").at("path").get<std::string>(),
                  inputs.at("patients").at("path").get<std::string>(),
                  inputs.at("prescriptions").at("path").get<std::string>()};
  return {std::move(manifest), config, paths};
}

Evaluation evaluate_run(const fs::path& run_dir) {
  auto [manifest, config, paths] = read_run_manifest(run_dir / "run_manifest.json");
  auto model = load_model(run_dir / "bundle");
  auto [graph, cohort] = ingest(paths, config);
  return evaluate_bundle(model.bundle, model.graph, cohort, config.alpha);
}

RunResult rerun_from_manifest(const fs::path& manifest_path, const fs::path& output_dir) {
  auto [manifest, config, paths] = read_run_manifest(manifest_path);
  const json& inputs = manifest.at("inputs");
  json now = describe_inputs(paths);
  for (const auto& [name, entry] : inputs.items())
    if (now.at(name).at("fnv1a") != entry.at("fnv1a"))
      throw IngestionError("input '" + name + "' changed since the recorded run: " + entry.at("path").get<std::string>());
  return run_with_paths(paths, config, output_dir, now);
}

LoadedModel load_model(const fs::path& bundle_dir) {
  LoadedModel out{mdgcn::load_bundle(bundle_dir),
                  load_ddi_graph(bundle_dir / "drugs.csv", bundle_dir / "ddi_edges.csv").signed_only()};
  if (out.graph.num_drugs() != out.bundle.num_drugs())
    throw FormatError(bundle_dir.string() + ": graph and model disagree on the drug count");
  return out;
}

}  // namespace dssddi::pipeline
