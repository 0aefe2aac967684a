#include "dssddi/numkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dssddi/errors.hpp"

namespace dssddi::numkit {

double grad_check(const LossFn& loss, std::span<Tensor* const> params, double h) {
  if (!(h >= 1e-6 && h <= 1e-4)) throw ArgumentError("grad_check step must be in [1e-6, 1e-4]");
  std::vector<Tensor> analytic;
  loss(&analytic);
  if (analytic.size() != params.size()) {
    throw ShapeError("grad_check: loss returned " + std::to_string(analytic.size()) +
                     " gradients for " + std::to_string(params.size()) + " parameters");
  }
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    require_same_shape(w, analytic[p], "grad_check");
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = loss(nullptr);
      w[i] = saved - h;
      const double down = loss(nullptr);
      w[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[p][i];
      const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace dssddi::numkit
