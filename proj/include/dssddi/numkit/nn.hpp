#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dssddi/numkit/autograd.hpp"
#include "dssddi/rng.hpp"

namespace dssddi::numkit {

enum class Activation { kIdentity, kRelu, kLeakyRelu, kTanh };

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kBatchNormEps = 1e-8;
inline constexpr double kBatchNormMomentum = 0.1;

Var activate(Var x, Activation a);
Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

/// Named reference to a tensor owned by a model. Parameters are optimized;
/// buffers (running statistics) are only persisted.
struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

/// Fills `w` uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform(Tensor& w, std::size_t fan_in, Rng& rng);

struct Dense {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out, empty when the layer has no bias
};

struct BatchNorm {
  Tensor gamma;         // 1 x d
  Tensor beta;          // 1 x d
  Tensor running_mean;  // 1 x d
  Tensor running_var;   // 1 x d, strictly positive

  static BatchNorm create(std::size_t width);
  Var forward(Tape& tape, Var x, bool training);
};

/// Fully connected network. Hidden layers apply (optional batch norm) then
/// the hidden activation; the output layer is affine. Layers followed by
/// batch norm carry no bias since normalization removes it.
struct Mlp {
  std::vector<Dense> layers;
  std::vector<std::optional<BatchNorm>> norms;  // one per hidden layer
  Activation hidden_activation = Activation::kRelu;

  static Mlp create(const std::vector<std::size_t>& dims, Activation hidden,
                    bool batch_norm, Rng& rng);

  std::size_t in_dim() const { return layers.front().weight.rows(); }
  std::size_t out_dim() const { return layers.back().weight.cols(); }

  void zero_output_layer();
  std::vector<NamedTensor> parameters(const std::string& prefix);
  std::vector<NamedTensor> buffers(const std::string& prefix);
};

/// Records the network on `tape`. In training mode batch norm uses batch
/// statistics over the rows and updates the running estimates.
Var mlp_forward(Tape& tape, Mlp& mlp, Var input, bool training);

/// Value-only evaluation.
Tensor mlp_forward(Mlp& mlp, const Tensor& input, bool training);

}  // namespace dssddi::numkit
