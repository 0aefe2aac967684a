#include "dssddi/numkit/nn.hpp"

#include <cmath>

#include "dssddi/errors.hpp"

namespace dssddi::numkit {

Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return x;
    case Activation::kRelu:
      return relu(x);
    case Activation::kLeakyRelu:
      return leaky_relu(x, kLeakySlope);
    case Activation::kTanh:
      return numkit::tanh(x);
  }
  return x;
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ArgumentError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kLeakyRelu:
      return "leaky_relu";
    case Activation::kTanh:
      return "tanh";
  }
  return "identity";
}

void init_uniform(Tensor& w, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (double& v : w.data()) v = uniform(rng, -bound, bound);
}

BatchNorm BatchNorm::create(std::size_t width) {
  return BatchNorm{Tensor(1, width, 1.0), Tensor(1, width, 0.0), Tensor(1, width, 0.0),
                   Tensor(1, width, 1.0)};
}

Var BatchNorm::forward(Tape& tape, Var x, bool training) {
  Var g = tape.parameter(gamma);
  Var b = tape.parameter(beta);
  if (!training) return batch_norm_eval(x, g, b, running_mean, running_var, kBatchNormEps);
  Tensor mu, var;
  Var out = batch_norm_train(x, g, b, kBatchNormEps, &mu, &var);
  const double n = static_cast<double>(x.rows());
  const double unbias = n > 1 ? n / (n - 1) : 1.0;
  for (std::size_t c = 0; c < mu.cols(); ++c) {
    running_mean[c] = (1 - kBatchNormMomentum) * running_mean[c] + kBatchNormMomentum * mu[c];
    const double v = (1 - kBatchNormMomentum) * running_var[c] +
                     kBatchNormMomentum * var[c] * unbias;
    running_var[c] = std::max(v, kBatchNormEps);
  }
  return out;
}

Mlp Mlp::create(const std::vector<std::size_t>& dims, Activation hidden, bool batch_norm,
                Rng& rng) {
  if (dims.size() < 2) throw ArgumentError("an MLP needs at least input and output widths");
  Mlp m;
  m.hidden_activation = hidden;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const bool is_hidden = l + 2 < dims.size();
    Dense d;
    d.weight = Tensor(dims[l], dims[l + 1]);
    init_uniform(d.weight, dims[l], rng);
    if (!(is_hidden && batch_norm)) {
      d.bias = Tensor(1, dims[l + 1]);
      init_uniform(d.bias, dims[l], rng);
    }
    m.layers.push_back(std::move(d));
    if (is_hidden) {
      m.norms.push_back(batch_norm ? std::optional<BatchNorm>(BatchNorm::create(dims[l + 1]))
                                   : std::nullopt);
    }
  }
  return m;
}

void Mlp::zero_output_layer() {
  layers.back().weight.fill(0.0);
  layers.back().bias.fill(0.0);
}

std::vector<NamedTensor> Mlp::parameters(const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    out.push_back({p + ".weight", &layers[l].weight});
    if (!layers[l].bias.empty()) out.push_back({p + ".bias", &layers[l].bias});
    if (l < norms.size() && norms[l]) {
      out.push_back({p + ".bn.gamma", &norms[l]->gamma});
      out.push_back({p + ".bn.beta", &norms[l]->beta});
    }
  }
  return out;
}

std::vector<NamedTensor> Mlp::buffers(const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (std::size_t l = 0; l < norms.size(); ++l) {
    if (!norms[l]) continue;
    const std::string p = prefix + ".layer" + std::to_string(l);
    out.push_back({p + ".bn.running_mean", &norms[l]->running_mean});
    out.push_back({p + ".bn.running_var", &norms[l]->running_var});
  }
  return out;
}

Var mlp_forward(Tape& tape, Mlp& mlp, Var input, bool training) {
  if (input.cols() != mlp.in_dim()) {
    throw ShapeError("mlp_forward: input " + input.value().shape_string() +
                     " for first layer with " + std::to_string(mlp.in_dim()) + " inputs");
  }
  Var h = input;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    Dense& d = mlp.layers[l];
    h = matmul(h, tape.parameter(d.weight));
    if (!d.bias.empty()) h = add_row(h, tape.parameter(d.bias));
    if (l + 1 < mlp.layers.size()) {
      if (mlp.norms[l]) h = mlp.norms[l]->forward(tape, h, training);
      h = activate(h, mlp.hidden_activation);
    }
  }
  return h;
}

Tensor mlp_forward(Mlp& mlp, const Tensor& input, bool training) {
  Tape tape;
  return mlp_forward(tape, mlp, tape.constant(input), training).value();
}

}  // namespace dssddi::numkit
