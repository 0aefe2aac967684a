#include "dssddi/ddigcn.hpp"

#include <cmath>

#include "dssddi/errors.hpp"
#include "dssddi/numkit/adam.hpp"

namespace dssddi::ddigcn {

using numkit::SparseMatrix;
using numkit::Tape;

Backbone backbone_from_string(const std::string& name) {
  if (name == "gin" || name == "GIN") return Backbone::kGin;
  if (name == "sgcn" || name == "SGCN") return Backbone::kSgcn;
  throw ArgumentError("unknown backbone '" + name + "' (expected gin or sgcn)");
}

std::string to_string(Backbone b) { return b == Backbone::kGin ? "gin" : "sgcn"; }

namespace {

std::shared_ptr<const SparseMatrix> mean_operator(std::size_t n,
                                                  const std::vector<std::vector<DrugId>>& nbrs) {
  std::vector<SparseMatrix::Entry> entries;
  for (std::size_t v = 0; v < n; ++v) {
    const double w = nbrs[v].empty() ? 0.0 : 1.0 / static_cast<double>(nbrs[v].size());
    for (DrugId u : nbrs[v]) entries.push_back({v, u, w});
  }
  return std::make_shared<const SparseMatrix>(SparseMatrix::from_entries(n, n, std::move(entries)));
}


}  // namespace

Aggregators Aggregators::build(const DdiGraph& graph) {
  const std::size_t n = graph.num_drugs();
  std::vector<std::vector<DrugId>> all(n), pos(n), neg(n);
  for (DrugId v = 0; v < n; ++v) {
    all[v] = graph.neighbors(v);
    pos[v] = graph.neighbors(v, kSynergy);
    neg[v] = graph.neighbors(v, kAntagonism);
  }
  return {mean_operator(n, all), mean_operator(n, pos), mean_operator(n, neg)};
}

Var gin_forward(Tape& tape, const Aggregators& agg, Var input, std::vector<GinLayer>& layers,
                bool training) {
  Var z = input;
  for (GinLayer& layer : layers) {
    Var self = scalar_mul(add_const(tape.parameter(layer.epsilon), 1.0), z);
    Var h = add(self, spmm(agg.all, z));
    z = mlp_forward(tape, layer.mlp, h, training);
    if (layer.norm) z = layer.norm->forward(tape, z, training);
    if (layer.activate) z = numkit::relu(z);
  }
  return z;
}

Var sgcn_forward(Tape& tape, const Aggregators& agg, Var input, std::vector<SgcnLayer>& layers,
                 bool training) {
  Var hb = input;
  Var hu = input;
  for (SgcnLayer& layer : layers) {
    const std::vector<Var> b_parts{spmm(agg.synergy, hb), spmm(agg.antagonism, hu), hb};
    const std::vector<Var> u_parts{spmm(agg.synergy, hu), spmm(agg.antagonism, hb), hu};
    Var b_in = concat_cols(b_parts);
    Var u_in = concat_cols(u_parts);
    if (b_in.cols() != layer.w_balanced.rows() || u_in.cols() != layer.w_unbalanced.rows()) {
      throw ShapeError("sgcn layer expects input width " +
                       std::to_string(layer.w_balanced.rows()) + ", got " +
                       std::to_string(b_in.cols()));
    }
    Var nb = matmul(b_in, tape.parameter(layer.w_balanced));
    Var nu = matmul(u_in, tape.parameter(layer.w_unbalanced));
    if (layer.norm_balanced) nb = layer.norm_balanced->forward(tape, nb, training);
    if (layer.norm_unbalanced) nu = layer.norm_unbalanced->forward(tape, nu, training);
    if (layer.activate) {
      nb = numkit::relu(nb);
      nu = numkit::relu(nu);
    }
    hb = nb;
    hu = nu;
  }
  const std::vector<Var> z{hb, hu};
  return concat_cols(z);
}

DdiEmbeddings gin_forward(const DdiGraph& graph, const Tensor& input,
                          std::vector<GinLayer>& layers, bool training) {
  if (input.rows() != graph.num_drugs()) throw ShapeError("one input row per drug expected");
  Tape tape;
  const auto agg = Aggregators::build(graph);
  return {gin_forward(tape, agg, tape.constant(input), layers, training).value()};
}

DdiEmbeddings sgcn_forward(const DdiGraph& graph, const Tensor& input,
                           std::vector<SgcnLayer>& layers, bool training) {
  if (input.rows() != graph.num_drugs()) throw ShapeError("one input row per drug expected");
  Tape tape;
  const auto agg = Aggregators::build(graph);
  return {sgcn_forward(tape, agg, tape.constant(input), layers, training).value()};
}

double edge_score(std::span<const double> z_v, std::span<const double> z_u) {
  if (z_v.size() != z_u.size()) throw ShapeError("edge_score: embedding widths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < z_v.size(); ++i) s += z_v[i] * z_u[i];
  return s;
}

Model Model::create(std::size_t num_drugs, const Config& config) {
  if (config.layers == 0) throw ConfigError("DDIGCN needs at least one layer");
  Rng rng(config.seed);
  Model m;
  m.backbone = config.backbone;
  if (config.backbone == Backbone::kGin) {
    std::size_t in = num_drugs;
    for (std::size_t t = 0; t < config.layers; ++t) {
      const bool last = t + 1 == config.layers;
      GinLayer layer;
      layer.mlp = numkit::Mlp::create({in, config.hidden_dim, config.embedding_dim},
                                      numkit::Activation::kRelu, true, rng);
      if (last) {
        if (config.zero_init_output) layer.mlp.zero_output_layer();
      } else {
        // batch norm follows, so the output bias would be inert
        layer.mlp.layers.back().bias = Tensor();
        layer.norm = numkit::BatchNorm::create(config.embedding_dim);
        layer.activate = true;
      }
      m.gin.push_back(std::move(layer));
      in = config.embedding_dim;
    }
  } else {
    if (config.embedding_dim % 2 != 0) throw ConfigError("SGCN embedding width must be even");
    const std::size_t width = config.embedding_dim / 2;
    std::size_t in = num_drugs;
    for (std::size_t t = 0; t < config.layers; ++t) {
      const bool last = t + 1 == config.layers;
      SgcnLayer layer;
      layer.w_balanced = Tensor(3 * in, width);
      layer.w_unbalanced = Tensor(3 * in, width);
      numkit::init_uniform(layer.w_balanced, 3 * in, rng);
      numkit::init_uniform(layer.w_unbalanced, 3 * in, rng);
      if (last) {
        if (config.zero_init_output) {
          layer.w_balanced.fill(0.0);
          layer.w_unbalanced.fill(0.0);
        }
      } else {
        layer.norm_balanced = numkit::BatchNorm::create(width);
        layer.norm_unbalanced = numkit::BatchNorm::create(width);
        layer.activate = true;
      }
      m.sgcn.push_back(std::move(layer));
      in = width;
    }
  }
  return m;
}

Var Model::forward(Tape& tape, const Aggregators& agg, Var input, bool training) {
  return backbone == Backbone::kGin ? gin_forward(tape, agg, input, gin, training)
                                    : sgcn_forward(tape, agg, input, sgcn, training);
}

std::vector<numkit::NamedTensor> Model::parameters() {
  std::vector<numkit::NamedTensor> out;
  for (std::size_t t = 0; t < gin.size(); ++t) {
    const std::string p = "ddigcn.gin" + std::to_string(t);
    out.push_back({p + ".epsilon", &gin[t].epsilon});
    for (auto& nt : gin[t].mlp.parameters(p + ".mlp")) out.push_back(nt);
    if (gin[t].norm) {
      out.push_back({p + ".bn.gamma", &gin[t].norm->gamma});
      out.push_back({p + ".bn.beta", &gin[t].norm->beta});
    }
  }
  for (std::size_t t = 0; t < sgcn.size(); ++t) {
    const std::string p = "ddigcn.sgcn" + std::to_string(t);
    out.push_back({p + ".w_balanced", &sgcn[t].w_balanced});
    out.push_back({p + ".w_unbalanced", &sgcn[t].w_unbalanced});
    if (sgcn[t].norm_balanced) {
      out.push_back({p + ".bn_balanced.gamma", &sgcn[t].norm_balanced->gamma});
      out.push_back({p + ".bn_balanced.beta", &sgcn[t].norm_balanced->beta});
    }
    if (sgcn[t].norm_unbalanced) {
      out.push_back({p + ".bn_unbalanced.gamma", &sgcn[t].norm_unbalanced->gamma});
      out.push_back({p + ".bn_unbalanced.beta", &sgcn[t].norm_unbalanced->beta});
    }
  }
  return out;
}

std::vector<numkit::NamedTensor> Model::buffers() {
  std::vector<numkit::NamedTensor> out;
  auto add_norm = [&](const std::string& p, std::optional<numkit::BatchNorm>& bn) {
    if (!bn) return;
    out.push_back({p + ".running_mean", &bn->running_mean});
    out.push_back({p + ".running_var", &bn->running_var});
  };
  for (std::size_t t = 0; t < gin.size(); ++t) {
    const std::string p = "ddigcn.gin" + std::to_string(t);
    for (auto& nt : gin[t].mlp.buffers(p + ".mlp")) out.push_back(nt);
    add_norm(p + ".bn", gin[t].norm);
  }
  for (std::size_t t = 0; t < sgcn.size(); ++t) {
    const std::string p = "ddigcn.sgcn" + std::to_string(t);
    add_norm(p + ".bn_balanced", sgcn[t].norm_balanced);
    add_norm(p + ".bn_unbalanced", sgcn[t].norm_unbalanced);
  }
  return out;
}

Tensor one_hot_inputs(std::size_t num_drugs) { return Tensor::identity(num_drugs); }

Var edge_regression_loss(Tape& tape, Model& model, const Aggregators& agg, const Tensor& input,
                         std::span<const DdiEdge> edges) {
  if (edges.empty()) throw ArgumentError("edge regression needs at least one edge");
  Var z = model.forward(tape, agg, tape.constant(input), true);
  std::vector<std::size_t> us, vs;
  Tensor target(edges.size(), 1);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    us.push_back(edges[k].u);
    vs.push_back(edges[k].v);
    target(k, 0) = edges[k].sign;
  }
  Var score = row_dot(gather_rows(z, std::move(us)), gather_rows(z, std::move(vs)));
  return mse_loss(score, target);
}

TrainResult train_ddigcn(const DdiGraph& graph, const Config& config) {
  TrainResult result;
  result.model = Model::create(graph.num_drugs(), config);
  Model& model = result.model;
  const auto agg = Aggregators::build(graph);
  const Tensor input = one_hot_inputs(graph.num_drugs());
  const auto& edges = graph.edges();

  auto named = model.parameters();
  std::vector<Tensor*> params;
  for (auto& nt : named) params.push_back(nt.tensor);
  numkit::Adam adam(config.learning_rate);
  result.loss_curve.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Tape tape;
    Var loss = edge_regression_loss(tape, model, agg, input, edges);
    const double lv = loss.value()[0];
    if (!std::isfinite(lv)) {
      throw DivergenceError("DDIGCN loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.loss_curve.push_back(lv);
    tape.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (Tensor* p : params) grads.push_back(tape.parameter_grad(*p));
    try {
      adam.step(params, grads);
    } catch (const DivergenceError& e) {
      throw DivergenceError("DDIGCN diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }
  Tape tape;
  result.embeddings.z = model.forward(tape, agg, tape.constant(input), true).value();
  if (!result.embeddings.z.all_finite()) {
    throw DivergenceError("DDIGCN produced non-finite embeddings");
  }
  return result;
}

}  // namespace dssddi::ddigcn
