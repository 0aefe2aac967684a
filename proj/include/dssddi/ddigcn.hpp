#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dssddi/ddigraph.hpp"
#include "dssddi/numkit/nn.hpp"

namespace dssddi::ddigcn {

using numkit::Tensor;
using numkit::Var;

enum class Backbone { kGin, kSgcn };
Backbone backbone_from_string(const std::string& name);
std::string to_string(Backbone b);

/// z' = f((1 + eps) z + mean of neighbor z), then optional norm and ReLU.
struct GinLayer {
  Tensor epsilon = Tensor::scalar(0.0);
  numkit::Mlp mlp;
  std::optional<numkit::BatchNorm> norm;
  bool activate = false;
};

/// Signed convolution with separate synergy (balanced) and antagonism
/// (unbalanced) paths. Each weight maps the concatenation
/// [synergy-neighbor mean, antagonism-neighbor mean, self] of width 3 * in
/// to the per-path output width.
struct SgcnLayer {
  Tensor w_balanced;
  Tensor w_unbalanced;
  std::optional<numkit::BatchNorm> norm_balanced;
  std::optional<numkit::BatchNorm> norm_unbalanced;
  bool activate = false;
};

/// Final drug relation representations, one row per drug.
struct DdiEmbeddings {
  Tensor z;
};

/// Mean-aggregation operators over the interaction graph. Rows of drugs with
/// no neighbor in a set are empty, so their mean term is the zero vector.
struct Aggregators {
  std::shared_ptr<const numkit::SparseMatrix> all;          // any sign, incl. sampled zeros
  std::shared_ptr<const numkit::SparseMatrix> synergy;      // e = +1
  std::shared_ptr<const numkit::SparseMatrix> antagonism;   // e = -1

  static Aggregators build(const DdiGraph& graph);
};

Var gin_forward(numkit::Tape& tape, const Aggregators& agg, Var input,
                std::vector<GinLayer>& layers, bool training);
Var sgcn_forward(numkit::Tape& tape, const Aggregators& agg, Var input,
                 std::vector<SgcnLayer>& layers, bool training);

/// Value-only forward passes over the whole graph.
DdiEmbeddings gin_forward(const DdiGraph& graph, const Tensor& input,
                          std::vector<GinLayer>& layers, bool training = true);
DdiEmbeddings sgcn_forward(const DdiGraph& graph, const Tensor& input,
                           std::vector<SgcnLayer>& layers, bool training = true);

/// Predicted interaction score of two drugs: their inner product.
double edge_score(std::span<const double> z_v, std::span<const double> z_u);

struct Config {
  Backbone backbone = Backbone::kSgcn;
  std::size_t layers = 3;
  std::size_t embedding_dim = 64;  // SGCN uses embedding_dim / 2 per path
  std::size_t hidden_dim = 64;
  double learning_rate = 0.001;
  std::size_t epochs = 400;
  std::uint64_t seed = 0;
  /// Zero the last layer so every initial score is exactly 0.
  bool zero_init_output = false;
};

/// Trainable DDIGCN: stacked GIN or SGCN layers over one-hot drug inputs,
/// batch norm + ReLU between layers, affine last layer.
struct Model {
  Backbone backbone = Backbone::kSgcn;
  std::vector<GinLayer> gin;
  std::vector<SgcnLayer> sgcn;

  static Model create(std::size_t num_drugs, const Config& config);

  Var forward(numkit::Tape& tape, const Aggregators& agg, Var input, bool training);
  std::vector<numkit::NamedTensor> parameters();
  std::vector<numkit::NamedTensor> buffers();
};

/// One-hot identity features for `num_drugs` drugs.
Tensor one_hot_inputs(std::size_t num_drugs);

/// Mean squared error of inner-product scores against the edge signs.
Var edge_regression_loss(numkit::Tape& tape, Model& model, const Aggregators& agg,
                         const Tensor& input, std::span<const DdiEdge> edges);

struct TrainResult {
  DdiEmbeddings embeddings;
  std::vector<double> loss_curve;  // loss before each epoch's update
  Model model;
};

/// Fits the model by full-batch edge regression on every edge of `graph`
/// (signed edges plus sampled zero edges). Throws DivergenceError naming the
/// epoch if the loss turns non-finite.
TrainResult train_ddigcn(const DdiGraph& graph, const Config& config);

}  // namespace dssddi::ddigcn
