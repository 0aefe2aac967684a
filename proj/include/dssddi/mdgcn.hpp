#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dssddi/causal.hpp"
#include "dssddi/ddigraph.hpp"
#include "dssddi/numkit/nn.hpp"
#include "json.hpp"

namespace dssddi::mdgcn {

using numkit::Tensor;
using numkit::Var;

inline constexpr std::size_t kEmbeddingDim = 64;

/// Patient and drug feature encoders: h = LeakyReLU(x W + b).
struct EncoderParams {
  numkit::Dense patient;  // d1 x d3
  numkit::Dense drug;     // d2 x d3

  static EncoderParams create(std::size_t patient_dim, std::size_t drug_dim, std::size_t width,
                              Rng& rng);
};

std::pair<Tensor, Tensor> encode_features(const Tensor& x, const Tensor& z,
                                          const EncoderParams& params);

/// Patient-drug adjacency over observed links with symmetric
/// 1/sqrt(|N_i||N_v|) normalization.
struct BipartiteGraph {
  std::vector<std::vector<DrugId>> drugs_of;         // N_i
  std::vector<std::vector<std::size_t>> patients_of; // N_v
  std::shared_ptr<const numkit::SparseMatrix> to_patients;  // n x |V|
  std::shared_ptr<const numkit::SparseMatrix> to_drugs;     // |V| x n

  static BipartiteGraph from_links(const Tensor& links);
  std::size_t num_patients() const { return drugs_of.size(); }
  std::size_t num_drugs() const { return patients_of.size(); }
};

struct LayerOutputs {
  std::vector<Tensor> patients;  // layers + 1 entries, index 0 is the input
  std::vector<Tensor> drugs;
};

/// Parameter-free light propagation for `layers` steps.
LayerOutputs propagate_bipartite(const BipartiteGraph& graph, const Tensor& patients0,
                                 const Tensor& drugs0, std::size_t layers);

/// beta_t = 1 / (t + 2) for t = 0..layers.
std::vector<double> default_betas(std::size_t layers);

Tensor combine_layers(std::span<const Tensor> layer_outputs, std::span<const double> betas);

/// Adds the DDI relation embedding of each drug to its representation.
Tensor fuse_ddi(const Tensor& drug_reps, const Tensor& ddi_embeddings);

/// sigmoid(f([h_i * h_v, t])).
double decode_pair(std::span<const double> h_i, std::span<const double> h_v, double t,
                   const numkit::Mlp& decoder);

/// Logits of the decoder for each row of [h_i * h_v, t] inputs.
Tensor decoder_logits(const numkit::Mlp& decoder, const Tensor& inputs);

struct TrainConfig {
  double delta = 1.0;
  std::size_t epochs = 1000;
  double learning_rate = 0.01;
  std::size_t negative_ratio = 1;
  std::size_t layers = 2;
  std::size_t width = kEmbeddingDim;
  std::size_t decoder_hidden = kEmbeddingDim;
  std::uint64_t seed = 0;
  /// Validation NDCG@eval_k is computed every eval_every epochs and the best
  /// parameters are kept. 0 disables selection.
  std::size_t eval_every = 10;
  std::size_t eval_k = 6;
};

struct Model {
  EncoderParams encoder;
  numkit::Mlp decoder;  // (width + 1) -> hidden -> 1
  std::vector<double> betas;

  static Model create(std::size_t patient_dim, std::size_t drug_dim, const TrainConfig& config);
  std::vector<numkit::NamedTensor> parameters();
};

/// Inputs fixed for a training run.
struct TrainingData {
  Tensor patient_features;  // n x d1, standardized
  Tensor drug_features;     // |V| x d2
  Tensor ddi;               // |V| x width, zeros to disable fusion
  Tensor t, t_cf, y, y_cf;  // n x |V|
  Tensor truth;             // n x |V| full prescriptions, for validation ranking
  BipartiteGraph graph;
  std::vector<std::size_t> train_patients;
  std::vector<std::size_t> validation_patients;
};

/// Drug input features: the catalog's feature vectors, or one-hot ids when
/// the catalog carries none.
Tensor drug_input_features(const DdiGraph& graph);

TrainingData make_training_data(const Cohort& cohort, const causal::TreatmentState& state,
                                const Tensor& drug_features, const Tensor& ddi);

struct PairBatch {
  std::vector<std::size_t> patients;
  std::vector<DrugId> drugs;
  Tensor y, t, y_cf, t_cf;  // m x 1
};

/// Every observed link of the training patients plus `ratio` uniformly drawn
/// unlinked drugs per link (without replacement, capped by availability).
PairBatch sample_pairs(const TrainingData& data, std::size_t ratio, Rng& rng);

struct Loss {
  Var total;
  Var factual;
  Var counterfactual;  // equals factual's tape slot when delta == 0
};

Loss mdgcn_loss(numkit::Tape& tape, Model& model, const TrainingData& data,
                const PairBatch& batch, double delta);

/// Final drug representations h'_v: combined propagation layers plus DDI.
Tensor drug_representations(const Model& model, const TrainingData& data);

/// Scores of every drug for each patient row: sigmoid(f([h_i * h'_v, t_iv])).
Tensor score_patients(const Model& model, const Tensor& patient_features, const Tensor& drug_reps,
                      const Tensor& treatments);

struct ScoredDrug {
  DrugId drug;
  double score;
};

/// Drugs by descending score, lower id first on ties.
std::vector<ScoredDrug> rank_drugs(std::span<const double> scores);

struct TrainResult {
  Model model;  // selected parameters
  Tensor drug_reps;
  std::vector<double> loss, factual_loss, counterfactual_loss;
  std::vector<std::pair<std::size_t, double>> validation_ndcg;  // (epoch, value)
  std::size_t best_epoch = 0;
};

/// Full-batch Adam on L = BCE_factual + delta * BCE_counterfactual with
/// negatives redrawn every epoch. Throws DivergenceError on a non-finite loss.
TrainResult train_mdgcn(const TrainingData& data, const TrainConfig& config);

/// Everything needed to serve suggestions for unseen patients.
struct ModelBundle {
  Model model;
  Tensor drug_reps;
  Tensor ddi_embeddings;
  Standardizer standardizer;
  std::vector<std::string> feature_names;
  std::vector<std::string> drug_names;
  Tensor centroids;          // K x d1, standardized space
  Tensor cluster_treatment;  // K x |V|
  nlohmann::json manifest = nlohmann::json::object();

  std::size_t num_drugs() const { return drug_reps.rows(); }
  std::size_t feature_dim() const { return feature_names.size(); }
  /// Standardizes a raw feature row; NaN cells take the training fill value.
  std::vector<double> standardize(std::span<const double> raw) const;
  std::vector<double> treatment_row(std::span<const double> standardized) const;
  std::vector<double> score_all(std::span<const double> raw) const;
};

ModelBundle make_bundle(const TrainResult& result, const TrainingData& data, const Cohort& cohort,
                        const causal::TreatmentState& state, const DdiGraph& graph,
                        const TrainConfig& config);

/// Top-k drugs for a raw feature row. Throws ArgumentError unless
/// 1 <= k <= |V|, ShapeError on a feature width mismatch.
std::vector<ScoredDrug> suggest_top_k(std::span<const double> raw_features, std::size_t k,
                                      const ModelBundle& bundle);

/// Writes `model.json` (checkpoint) and `manifest.json` under `dir`.
void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& dir);

}  // namespace dssddi::mdgcn
