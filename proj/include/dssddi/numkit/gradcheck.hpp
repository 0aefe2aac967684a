#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dssddi/numkit/tensor.hpp"

namespace dssddi::numkit {

/// Evaluates a scalar loss at the current parameter values. When `grads` is
/// non-null it also receives the analytic gradient, one tensor per parameter.
using LossFn = std::function<double(std::vector<Tensor>* grads)>;

/// Worst relative error between analytic and central-difference gradients,
/// |a - d| / (|a| + |d| + 1e-12) maximized over every parameter entry.
/// `h` must lie in [1e-6, 1e-4]. Parameters are restored before returning.
double grad_check(const LossFn& loss, std::span<Tensor* const> params, double h);

}  // namespace dssddi::numkit
