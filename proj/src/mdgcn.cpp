#include "dssddi/mdgcn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dssddi/errors.hpp"
#include "dssddi/evalmetrics.hpp"
#include "dssddi/numkit/adam.hpp"
#include "dssddi/numkit/checkpoint.hpp"

namespace dssddi::mdgcn {

using numkit::SparseMatrix;
using numkit::Tape;

namespace {

double leaky(double v) { return v > 0 ? v : numkit::kLeakySlope * v; }

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double apply(double v, numkit::Activation a) {
  switch (a) {
    case numkit::Activation::kIdentity: return v;
    case numkit::Activation::kRelu: return v > 0 ? v : 0.0;
    case numkit::Activation::kLeakyRelu: return leaky(v);
    case numkit::Activation::kTanh: return std::tanh(v);
  }
  return v;
}

Tensor dense_encode(const Tensor& x, const numkit::Dense& d) {
  if (x.cols() != d.weight.rows()) {
    throw ShapeError("encoder expects " + std::to_string(d.weight.rows()) + " features, got " +
                     std::to_string(x.cols()));
  }
  Tensor h = numkit::matmul(x, d.weight);
  for (std::size_t r = 0; r < h.rows(); ++r)
    for (std::size_t c = 0; c < h.cols(); ++c) h(r, c) = leaky(h(r, c) + d.bias[c]);
  return h;
}

Var tape_encode(Tape& tape, Var x, numkit::Dense& d) {
  if (x.cols() != d.weight.rows()) {
    throw ShapeError("encoder expects " + std::to_string(d.weight.rows()) + " features, got " +
                     std::to_string(x.cols()));
  }
  return numkit::leaky_relu(
      add_row(matmul(x, tape.parameter(d.weight)), tape.parameter(d.bias)), numkit::kLeakySlope);
}

Tensor column(const Tensor& m, std::span<const std::size_t> rows, std::span<const DrugId> cols) {
  Tensor out(rows.size(), 1);
  for (std::size_t k = 0; k < rows.size(); ++k) out(k, 0) = m(rows[k], cols[k]);
  return out;
}

Tensor select_rows(const Tensor& m, std::span<const std::size_t> rows) {
  Tensor out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(m.row(rows[r]).begin(), m.row(rows[r]).end(), out.row(r).begin());
  return out;
}

double validation_ndcg(const Model& model, const TrainingData& data, std::size_t k) {
  std::vector<std::size_t> patients;
  for (std::size_t i : data.validation_patients) {
    bool any = false;
    for (DrugId v = 0; v < data.truth.cols(); ++v) any |= data.truth(i, v) == 1.0;
    if (any) patients.push_back(i);
  }
  if (patients.empty()) return 0.0;
  const Tensor reps = drug_representations(model, data);
  const Tensor scores = score_patients(model, select_rows(data.patient_features, patients), reps,
                                       select_rows(data.t, patients));
  const std::size_t kk = std::min(k, data.truth.cols());
  std::vector<eval::RankedSuggestion> batch;
  for (std::size_t r = 0; r < patients.size(); ++r) {
    eval::RankedSuggestion s;
    s.patient_id = static_cast<long long>(patients[r]);
    for (const auto& sd : rank_drugs(scores.row(r))) {
      if (s.suggested.size() == kk) break;
      s.suggested.push_back(sd.drug);
    }
    for (DrugId v = 0; v < data.truth.cols(); ++v)
      if (data.truth(patients[r], v) == 1.0) s.truth.push_back(v);
    batch.push_back(std::move(s));
  }
  return eval::ndcg_at_k(batch);
}

}  // namespace

EncoderParams EncoderParams::create(std::size_t patient_dim, std::size_t drug_dim,
                                    std::size_t width, Rng& rng) {
  EncoderParams p;
  p.patient = {Tensor(patient_dim, width), Tensor(1, width)};
  p.drug = {Tensor(drug_dim, width), Tensor(1, width)};
  numkit::init_uniform(p.patient.weight, patient_dim, rng);
  numkit::init_uniform(p.patient.bias, patient_dim, rng);
  numkit::init_uniform(p.drug.weight, drug_dim, rng);
  numkit::init_uniform(p.drug.bias, drug_dim, rng);
  return p;
}

std::pair<Tensor, Tensor> encode_features(const Tensor& x, const Tensor& z,
                                          const EncoderParams& params) {
  return {dense_encode(x, params.patient), dense_encode(z, params.drug)};
}

BipartiteGraph BipartiteGraph::from_links(const Tensor& links) {
  BipartiteGraph g;
  const std::size_t n = links.rows(), m = links.cols();
  g.drugs_of.resize(n);
  g.patients_of.resize(m);
  for (std::size_t i = 0; i < n; ++i)
    for (DrugId v = 0; v < m; ++v) {
      const double e = links(i, v);
      if (e != 0.0 && e != 1.0) throw ArgumentError("link matrix must be binary");
      if (e == 1.0) {
        g.drugs_of[i].push_back(v);
        g.patients_of[v].push_back(i);
      }
    }
  std::vector<SparseMatrix::Entry> to_p, to_d;
  for (std::size_t i = 0; i < n; ++i)
    for (DrugId v : g.drugs_of[i]) {
      const double w = 1.0 / std::sqrt(static_cast<double>(g.drugs_of[i].size()) *
                                       static_cast<double>(g.patients_of[v].size()));
      to_p.push_back({i, v, w});
      to_d.push_back({v, i, w});
    }
  g.to_patients = std::make_shared<const SparseMatrix>(SparseMatrix::from_entries(n, m, std::move(to_p)));
  g.to_drugs = std::make_shared<const SparseMatrix>(SparseMatrix::from_entries(m, n, std::move(to_d)));
  return g;
}

LayerOutputs propagate_bipartite(const BipartiteGraph& graph, const Tensor& patients0,
                                 const Tensor& drugs0, std::size_t layers) {
  if (patients0.rows() != graph.num_patients() || drugs0.rows() != graph.num_drugs())
    throw ShapeError("propagation inputs must have one row per node");
  LayerOutputs out;
  out.patients.push_back(patients0);
  out.drugs.push_back(drugs0);
  for (std::size_t t = 1; t <= layers; ++t) {
    out.patients.push_back(graph.to_patients->multiply(out.drugs[t - 1]));
    out.drugs.push_back(graph.to_drugs->multiply(out.patients[t - 1]));
  }
  return out;
}

std::vector<double> default_betas(std::size_t layers) {
  std::vector<double> b(layers + 1);
  for (std::size_t t = 0; t <= layers; ++t) b[t] = 1.0 / static_cast<double>(t + 2);
  return b;
}

Tensor combine_layers(std::span<const Tensor> layer_outputs, std::span<const double> betas) {
  if (layer_outputs.empty() || layer_outputs.size() != betas.size())
    throw ArgumentError("one weight per layer output expected");
  Tensor out(layer_outputs[0].rows(), layer_outputs[0].cols());
  for (std::size_t t = 0; t < layer_outputs.size(); ++t) {
    numkit::require_same_shape(out, layer_outputs[t], "combine_layers");
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += betas[t] * layer_outputs[t][k];
  }
  return out;
}

Tensor fuse_ddi(const Tensor& drug_reps, const Tensor& ddi_embeddings) {
  numkit::require_same_shape(drug_reps, ddi_embeddings, "fuse_ddi");
  Tensor out = drug_reps;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += ddi_embeddings[k];
  return out;
}

Tensor decoder_logits(const numkit::Mlp& decoder, const Tensor& inputs) {
  Tensor h = inputs;
  for (std::size_t l = 0; l < decoder.layers.size(); ++l) {
    const auto& d = decoder.layers[l];
    if (h.cols() != d.weight.rows()) throw ShapeError("decoder input width mismatch");
    h = numkit::matmul(h, d.weight);
    if (!d.bias.empty())
      for (std::size_t r = 0; r < h.rows(); ++r)
        for (std::size_t c = 0; c < h.cols(); ++c) h(r, c) += d.bias[c];
    if (l + 1 < decoder.layers.size()) {
      if (l < decoder.norms.size() && decoder.norms[l]) throw ArgumentError("decoder must not use batch norm");
      for (double& v : h.data()) v = apply(v, decoder.hidden_activation);
    }
  }
  return h;
}

double decode_pair(std::span<const double> h_i, std::span<const double> h_v, double t,
                   const numkit::Mlp& decoder) {
  if (h_i.size() != h_v.size()) throw ShapeError("decode_pair: embedding widths differ");
  Tensor in(1, h_i.size() + 1);
  for (std::size_t c = 0; c < h_i.size(); ++c) in(0, c) = h_i[c] * h_v[c];
  in(0, h_i.size()) = t;
  return sigmoid(decoder_logits(decoder, in)(0, 0));
}

Model Model::create(std::size_t patient_dim, std::size_t drug_dim, const TrainConfig& config) {
  Rng rng(stage_seed(config.seed, "mdgcn.init"));
  Model m;
  m.encoder = EncoderParams::create(patient_dim, drug_dim, config.width, rng);
  m.decoder = numkit::Mlp::create({config.width + 1, config.decoder_hidden, 1},
                                  numkit::Activation::kRelu, false, rng);
  m.betas = default_betas(config.layers);
  return m;
}

std::vector<numkit::NamedTensor> Model::parameters() {
  std::vector<numkit::NamedTensor> out{
      {"mdgcn.encoder.patient.weight", &encoder.patient.weight},
      {"mdgcn.encoder.patient.bias", &encoder.patient.bias},
      {"mdgcn.encoder.drug.weight", &encoder.drug.weight},
      {"mdgcn.encoder.drug.bias", &encoder.drug.bias},
  };
  for (auto& nt : decoder.parameters("mdgcn.decoder")) out.push_back(nt);
  return out;
}

Tensor drug_input_features(const DdiGraph& graph) {
  if (graph.feature_dim() == 0) return Tensor::identity(graph.num_drugs());
  return graph.feature_matrix();
}

TrainingData make_training_data(const Cohort& cohort, const causal::TreatmentState& state,
                                const Tensor& drug_features, const Tensor& ddi) {
  if (drug_features.rows() != cohort.num_drugs() || ddi.rows() != cohort.num_drugs())
    throw ShapeError("drug features and DDI embeddings need one row per drug");
  TrainingData d;
  d.patient_features = cohort.features;
  d.drug_features = drug_features;
  d.ddi = ddi;
  d.t = state.t;
  d.t_cf = state.cf.t_cf;
  d.y = state.y;
  d.y_cf = state.cf.y_cf;
  d.truth = cohort.medications;
  d.graph = BipartiteGraph::from_links(state.y);
  d.train_patients = cohort.indices(Split::kTrain);
  d.validation_patients = cohort.indices(Split::kValidation);
  return d;
}

PairBatch sample_pairs(const TrainingData& data, std::size_t ratio, Rng& rng) {
  PairBatch b;
  const std::size_t m = data.y.cols();
  std::vector<DrugId> pool;
  for (std::size_t i : data.train_patients) {
    pool.clear();
    std::size_t positives = 0;
    for (DrugId v = 0; v < m; ++v) {
      if (data.y(i, v) == 1.0) {
        b.patients.push_back(i);
        b.drugs.push_back(v);
        ++positives;
      } else {
        pool.push_back(v);
      }
    }
    const std::size_t count = std::min(pool.size(), ratio * positives);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t j = k + uniform_index(rng, pool.size() - k);
      std::swap(pool[k], pool[j]);
      b.patients.push_back(i);
      b.drugs.push_back(pool[k]);
    }
  }
  if (b.patients.empty()) throw ArgumentError("no training links to sample from");
  b.y = column(data.y, b.patients, b.drugs);
  b.t = column(data.t, b.patients, b.drugs);
  b.y_cf = column(data.y_cf, b.patients, b.drugs);
  b.t_cf = column(data.t_cf, b.patients, b.drugs);
  return b;
}

Loss mdgcn_loss(Tape& tape, Model& model, const TrainingData& data, const PairBatch& batch,
                double delta) {
  if (delta < 0) throw ConfigError("counterfactual weight must be non-negative");
  const std::size_t layers = model.betas.size() - 1;
  Var hp0 = tape_encode(tape, tape.constant(data.patient_features), model.encoder.patient);
  Var hd0 = tape_encode(tape, tape.constant(data.drug_features), model.encoder.drug);
  std::vector<Var> p{hp0}, d{hd0};
  for (std::size_t t = 1; t <= layers; ++t) {
    if (t < layers) p.push_back(spmm(data.graph.to_patients, d[t - 1]));
    d.push_back(spmm(data.graph.to_drugs, p[t - 1]));
  }
  Var drugs = scale(d[0], model.betas[0]);
  for (std::size_t t = 1; t <= layers; ++t) drugs = add(drugs, scale(d[t], model.betas[t]));
  numkit::require_same_shape(drugs.value(), data.ddi, "fuse_ddi");
  drugs = add(drugs, tape.constant(data.ddi));

  Var had = mul(gather_rows(hp0, batch.patients), gather_rows(drugs, batch.drugs));
  auto decode = [&](const Tensor& t) {
    const std::vector<Var> parts{had, tape.constant(t)};
    return mlp_forward(tape, model.decoder, concat_cols(parts), true);
  };
  Loss loss;
  loss.factual = bce_with_logits(decode(batch.t), batch.y);
  if (delta == 0.0) {
    loss.counterfactual = loss.factual;
    loss.total = loss.factual;
    return loss;
  }
  loss.counterfactual = bce_with_logits(decode(batch.t_cf), batch.y_cf);
  loss.total = add(loss.factual, scale(loss.counterfactual, delta));
  return loss;
}

Tensor drug_representations(const Model& model, const TrainingData& data) {
  const auto [hp0, hd0] = encode_features(data.patient_features, data.drug_features, model.encoder);
  const std::size_t layers = model.betas.size() - 1;
  const LayerOutputs out = propagate_bipartite(data.graph, hp0, hd0, layers);
  return fuse_ddi(combine_layers(out.drugs, model.betas), data.ddi);
}

Tensor score_patients(const Model& model, const Tensor& patient_features, const Tensor& drug_reps,
                      const Tensor& treatments) {
  if (treatments.rows() != patient_features.rows() || treatments.cols() != drug_reps.rows())
    throw ShapeError("treatments must be patients x drugs");
  const Tensor hp = dense_encode(patient_features, model.encoder.patient);
  if (hp.cols() != drug_reps.cols()) throw ShapeError("patient and drug widths differ");
  const std::size_t w = hp.cols(), m = drug_reps.rows();
  Tensor scores(hp.rows(), m);
  Tensor in(m, w + 1);
  for (std::size_t i = 0; i < hp.rows(); ++i) {
    for (DrugId v = 0; v < m; ++v) {
      for (std::size_t c = 0; c < w; ++c) in(v, c) = hp(i, c) * drug_reps(v, c);
      in(v, w) = treatments(i, v);
    }
    const Tensor logits = decoder_logits(model.decoder, in);
    for (DrugId v = 0; v < m; ++v) scores(i, v) = sigmoid(logits(v, 0));
  }
  return scores;
}

std::vector<ScoredDrug> rank_drugs(std::span<const double> scores) {
  std::vector<ScoredDrug> out;
  out.reserve(scores.size());
  for (DrugId v = 0; v < scores.size(); ++v) out.push_back({v, scores[v]});
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredDrug& a, const ScoredDrug& b) { return a.score > b.score; });
  return out;
}

TrainResult train_mdgcn(const TrainingData& data, const TrainConfig& config) {
  if (config.layers == 0) throw ConfigError("MDGCN needs at least one propagation layer");
  if (config.delta < 0) throw ConfigError("counterfactual weight must be non-negative");
  TrainResult result;
  Model model = Model::create(data.patient_features.cols(), data.drug_features.cols(), config);
  auto named = model.parameters();
  std::vector<Tensor*> params;
  for (auto& nt : named) params.push_back(nt.tensor);
  numkit::Adam adam(config.learning_rate);
  Rng neg_rng(stage_seed(config.seed, "mdgcn.negatives"));
  const bool select = config.eval_every > 0 && !data.validation_patients.empty();
  double best = -1.0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const PairBatch batch = sample_pairs(data, config.negative_ratio, neg_rng);
    Tape tape;
    const Loss loss = mdgcn_loss(tape, model, data, batch, config.delta);
    const double total = loss.total.value()[0];
    if (!std::isfinite(total))
      throw DivergenceError("MDGCN loss became non-finite at epoch " + std::to_string(epoch));
    result.loss.push_back(total);
    result.factual_loss.push_back(loss.factual.value()[0]);
    result.counterfactual_loss.push_back(config.delta == 0.0 ? 0.0 : loss.counterfactual.value()[0]);
    tape.backward(loss.total);
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (Tensor* p : params) grads.push_back(tape.parameter_grad(*p));
    try {
      adam.step(params, grads);
    } catch (const DivergenceError& e) {
      throw DivergenceError("MDGCN diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (select && ((epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs)) {
      const double ndcg = validation_ndcg(model, data, config.eval_k);
      result.validation_ndcg.emplace_back(epoch + 1, ndcg);
      if (ndcg > best) {
        best = ndcg;
        result.model = model;
        result.best_epoch = epoch + 1;
      }
    }
  }
  if (!select || best < 0) {
    result.model = model;
    result.best_epoch = config.epochs;
  }
  result.drug_reps = drug_representations(result.model, data);
  return result;
}

std::vector<double> ModelBundle::standardize(std::span<const double> raw) const {
  if (raw.size() != feature_dim()) {
    throw ShapeError("expected " + std::to_string(feature_dim()) + " patient features, got " +
                     std::to_string(raw.size()));
  }
  return standardizer.apply_row(raw);
}

std::vector<double> ModelBundle::treatment_row(std::span<const double> standardized) const {
  causal::ClusterAssignment a;
  a.centroids = centroids;
  const std::size_t c = a.nearest(standardized);
  const auto row = cluster_treatment.row(c);
  return {row.begin(), row.end()};
}

std::vector<double> ModelBundle::score_all(std::span<const double> raw) const {
  const std::vector<double> x = standardize(raw);
  const std::vector<double> t = treatment_row(x);
  const Tensor scores = score_patients(model, Tensor(1, x.size(), x), drug_reps, Tensor(1, t.size(), t));
  const auto row = scores.row(0);
  return {row.begin(), row.end()};
}

ModelBundle make_bundle(const TrainResult& result, const TrainingData& data, const Cohort& cohort,
                        const causal::TreatmentState& state, const DdiGraph& graph,
                        const TrainConfig& config) {
  ModelBundle b;
  b.model = result.model;
  b.drug_reps = result.drug_reps;
  b.ddi_embeddings = data.ddi;
  b.standardizer = cohort.standardizer;
  b.feature_names = cohort.feature_names;
  for (const Drug& d : graph.drugs()) b.drug_names.push_back(d.name);
  b.centroids = state.clusters.centroids;
  b.cluster_treatment = state.cluster_treatment;
  b.manifest = {
      {"format", "dssddi.bundle"},
      {"version", 1},
      {"patient_dim", data.patient_features.cols()},
      {"drug_dim", data.drug_features.cols()},
      {"num_drugs", graph.num_drugs()},
      {"width", config.width},
      {"decoder_hidden", config.decoder_hidden},
      {"layers", config.layers},
      {"betas", result.model.betas},
      {"delta", config.delta},
      {"epochs", config.epochs},
      {"learning_rate", config.learning_rate},
      {"negative_ratio", config.negative_ratio},
      {"seed", config.seed},
      {"best_epoch", result.best_epoch},
      {"clusters", state.clusters.k()},
      {"gamma_patient", state.config.gamma_patient},
      {"gamma_drug", state.config.gamma_drug},
      {"feature_names", b.feature_names},
      {"drug_names", b.drug_names},
  };
  return b;
}

std::vector<ScoredDrug> suggest_top_k(std::span<const double> raw_features, std::size_t k,
                                      const ModelBundle& bundle) {
  if (k < 1 || k > bundle.num_drugs()) {
    throw ArgumentError("k must be between 1 and " + std::to_string(bundle.num_drugs()) + ", got " +
                        std::to_string(k));
  }
  auto ranked = rank_drugs(bundle.score_all(raw_features));
  ranked.resize(k);
  return ranked;
}

namespace {

Tensor as_row(const std::vector<double>& v) { return Tensor(1, v.size(), v); }

std::vector<double> from_row(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle) {
  std::filesystem::create_directories(dir);
  numkit::Checkpoint ckpt;
  Model model = bundle.model;
  for (const auto& nt : model.parameters()) ckpt.tensors[nt.name] = *nt.tensor;
  ckpt.tensors["bundle.drug_reps"] = bundle.drug_reps;
  ckpt.tensors["bundle.ddi"] = bundle.ddi_embeddings;
  ckpt.tensors["bundle.centroids"] = bundle.centroids;
  ckpt.tensors["bundle.cluster_treatment"] = bundle.cluster_treatment;
  ckpt.tensors["bundle.standardizer.mean"] = as_row(bundle.standardizer.mean);
  ckpt.tensors["bundle.standardizer.scale"] = as_row(bundle.standardizer.scale);
  ckpt.tensors["bundle.standardizer.fill"] = as_row(bundle.standardizer.fill);
  ckpt.metadata = bundle.manifest;
  numkit::save_checkpoint(dir / "model.json", ckpt);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IngestionError("cannot write " + (dir / "manifest.json").string());
  out << bundle.manifest.dump(2) << '\n';
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  const numkit::Checkpoint ckpt = numkit::load_checkpoint(dir / "model.json");
  const nlohmann::json& m = ckpt.metadata;
  ModelBundle b;
  try {
    if (m.at("format") != "dssddi.bundle") throw FormatError("not a model bundle");
    TrainConfig cfg;
    cfg.width = m.at("width").get<std::size_t>();
    cfg.decoder_hidden = m.at("decoder_hidden").get<std::size_t>();
    cfg.layers = m.at("layers").get<std::size_t>();
    b.model = Model::create(m.at("patient_dim").get<std::size_t>(), m.at("drug_dim").get<std::size_t>(), cfg);
    b.model.betas = m.at("betas").get<std::vector<double>>();
    b.feature_names = m.at("feature_names").get<std::vector<std::string>>();
    b.drug_names = m.at("drug_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "model.json").string() + ": bad bundle manifest: " + e.what());
  }
  for (const auto& nt : b.model.parameters()) {
    const Tensor& t = ckpt.at(nt.name);
    if (t.shape() != nt.tensor->shape()) throw FormatError("bundle tensor " + nt.name + " has the wrong shape");
    *nt.tensor = t;
  }
  b.drug_reps = ckpt.at("bundle.drug_reps");
  b.ddi_embeddings = ckpt.at("bundle.ddi");
  b.centroids = ckpt.at("bundle.centroids");
  b.cluster_treatment = ckpt.at("bundle.cluster_treatment");
  b.standardizer.mean = from_row(ckpt.at("bundle.standardizer.mean"));
  b.standardizer.scale = from_row(ckpt.at("bundle.standardizer.scale"));
  b.standardizer.fill = from_row(ckpt.at("bundle.standardizer.fill"));
  b.manifest = m;
  if (b.drug_reps.rows() != b.drug_names.size() || b.cluster_treatment.cols() != b.drug_names.size() ||
      b.centroids.cols() != b.feature_names.size() || b.standardizer.mean.size() != b.feature_names.size())
    throw FormatError((dir / "model.json").string() + ": bundle tensors disagree on dimensions");
  return b;
}

}  // namespace dssddi::mdgcn
