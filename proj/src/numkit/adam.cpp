#include "dssddi/numkit/adam.hpp"

#include <cmath>

#include "dssddi/errors.hpp"

namespace dssddi::numkit {

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(learning_rate > 0)) throw ArgumentError("Adam learning rate must be positive");
}

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("Adam: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    require_same_shape(*params[p], grads[p], "Adam gradient");
    if (!grads[p].all_finite()) {
      throw DivergenceError("non-finite gradient for parameter " + std::to_string(p) +
                            " at step " + std::to_string(steps_ + 1));
    }
  }
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  } else if (m_.size() != params.size()) {
    throw ShapeError("Adam: parameter count changed between steps");
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    Tensor& m = m_[p];
    Tensor& v = v_[p];
    require_same_shape(w, m, "Adam moments");
    const Tensor& g = grads[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace dssddi::numkit
