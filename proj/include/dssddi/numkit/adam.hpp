#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dssddi/numkit/tensor.hpp"

namespace dssddi::numkit {

/// Bias-corrected Adam. Moment buffers are created on the first step and
/// must keep the shapes of the parameters they track.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  /// Updates params in place. Throws DivergenceError on a non-finite gradient
  /// before touching any parameter.
  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

  std::uint64_t steps() const { return steps_; }
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace dssddi::numkit
