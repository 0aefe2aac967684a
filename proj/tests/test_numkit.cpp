#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "dssddi/errors.hpp"
#include "dssddi/numkit/adam.hpp"
#include "dssddi/numkit/autograd.hpp"
#include "dssddi/numkit/checkpoint.hpp"
#include "dssddi/numkit/gradcheck.hpp"
#include "dssddi/numkit/nn.hpp"

using namespace dssddi;
using namespace dssddi::numkit;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -1, double hi = 1) {
  Tensor t(r, c);
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

// Loss = sum(op(inputs) * weights) with fixed random weights, so every
// output entry contributes a distinct gradient.
double check_op(const std::function<Var(Tape&, std::vector<Var>&)>& op,
                std::vector<Tensor> inputs, std::uint64_t seed) {
  Rng rng(seed);
  Tensor weights;
  std::vector<Tensor*> params;
  for (auto& t : inputs) params.push_back(&t);
  LossFn loss = [&](std::vector<Tensor>* grads) {
    Tape tape;
    std::vector<Var> vars;
    for (auto& t : inputs) vars.push_back(tape.parameter(t));
    Var out = op(tape, vars);
    if (weights.empty()) weights = random_tensor(out.rows(), out.cols(), rng);
    Var total = sum(mul(out, tape.constant(weights)));
    if (grads) {
      tape.backward(total);
      grads->clear();
      for (auto& t : inputs) grads->push_back(tape.parameter_grad(t));
    }
    return total.value()[0];
  };
  return grad_check(loss, params, 1e-6);
}

// Straight-line evaluation of a dense network, independent of the tape.
Tensor reference_mlp(const Mlp& m, const Tensor& x) {
  Tensor h = x;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& d = m.layers[l];
    Tensor next(h.rows(), d.weight.cols());
    for (std::size_t r = 0; r < h.rows(); ++r)
      for (std::size_t j = 0; j < d.weight.cols(); ++j) {
        double s = d.bias.empty() ? 0.0 : d.bias[j];
        for (std::size_t k = 0; k < h.cols(); ++k) s += h(r, k) * d.weight(k, j);
        if (l + 1 < m.layers.size()) s = s > 0 ? s : 0.0;
        next(r, j) = s;
      }
    h = next;
  }
  return h;
}

}  // namespace

TEST_CASE("mlp_forward identity network passes input through") {
  Rng rng(1);
  Mlp m = Mlp::create({2, 2}, Activation::kIdentity, false, rng);
  m.layers[0].weight = Tensor::identity(2);
  m.layers[0].bias.fill(0.0);
  Tensor out = mlp_forward(m, Tensor::from_rows({{1, 2}}), false);
  CHECK(out == Tensor::from_rows({{1, 2}}));
}

TEST_CASE("single-layer MLP followed by ReLU clips the negative sum") {
  Rng rng(1);
  Mlp m = Mlp::create({2, 1}, Activation::kRelu, false, rng);
  m.layers[0].weight = Tensor::from_rows({{1}, {1}});
  m.layers[0].bias = Tensor::from_rows({{0}});
  Tape tape;
  Var pre = mlp_forward(tape, m, tape.constant(Tensor::from_rows({{-3, 1}})), false);
  CHECK(pre.value()[0] == -2.0);
  CHECK(relu(pre).value()[0] == 0.0);
}

TEST_CASE("two-layer MLP matches straight-line evaluation") {
  Rng rng(7);
  Mlp m = Mlp::create({5, 8, 3}, Activation::kRelu, false, rng);
  Tensor x = random_tensor(6, 5, rng);
  CHECK(max_abs_diff(mlp_forward(m, x, false), reference_mlp(m, x)) < 1e-12);
}

TEST_CASE("mlp_forward rejects a mismatched input width") {
  Rng rng(1);
  Mlp m = Mlp::create({3, 2}, Activation::kRelu, false, rng);
  CHECK_THROWS_AS(mlp_forward(m, Tensor(1, 4), false), ShapeError);
}

TEST_CASE("inference-mode forward is bit-for-bit deterministic") {
  Rng rng(3);
  Mlp m = Mlp::create({4, 16, 2}, Activation::kRelu, true, rng);
  Tensor x = random_tensor(10, 4, rng);
  mlp_forward(m, x, true);  // populate running statistics
  Tensor a = mlp_forward(m, x, false);
  Tensor b = mlp_forward(m, x, false);
  CHECK(a == b);
}

TEST_CASE("batch norm normalizes each feature over the node dimension") {
  Rng rng(11);
  Tensor x = random_tensor(50, 4, rng, -3, 5);
  for (std::size_t r = 0; r < 50; ++r) x(r, 2) = 10 * x(r, 2) + 7;
  Tape tape;
  Var out = batch_norm_train(tape.constant(x), tape.constant(Tensor(1, 4, 1.0)),
                             tape.constant(Tensor(1, 4, 0.0)), kBatchNormEps);
  for (std::size_t c = 0; c < 4; ++c) {
    double mu = 0, var = 0;
    for (std::size_t r = 0; r < 50; ++r) mu += out.value()(r, c);
    mu /= 50;
    for (std::size_t r = 0; r < 50; ++r) var += std::pow(out.value()(r, c) - mu, 2);
    var /= 50;
    CHECK(std::abs(mu) < 1e-8);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("running variance stays strictly positive") {
  Rng rng(2);
  Mlp m = Mlp::create({3, 4, 1}, Activation::kRelu, true, rng);
  Tensor constant(5, 3, 1.0);
  for (int i = 0; i < 50; ++i) mlp_forward(m, constant, true);
  for (double v : m.norms[0]->running_var.data()) CHECK(v > 0);
}

TEST_CASE("backward of every primitive matches central differences") {
  Rng rng(21);
  auto T = [&](std::size_t r, std::size_t c) { return random_tensor(r, c, rng); };
  CHECK(check_op([](Tape&, auto& v) { return matmul(v[0], v[1]); }, {T(3, 4), T(4, 2)}, 1) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return add(v[0], v[1]); }, {T(3, 2), T(3, 2)}, 2) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return sub(v[0], v[1]); }, {T(3, 2), T(3, 2)}, 3) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return mul(v[0], v[1]); }, {T(3, 2), T(3, 2)}, 4) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return add_row(v[0], v[1]); }, {T(3, 2), T(1, 2)}, 5) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return scale(v[0], -1.7); }, {T(2, 3)}, 6) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return scalar_mul(add_const(v[0], 1.0), v[1]); },
                 {T(1, 1), T(3, 3)}, 7) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return relu(v[0]); }, {T(4, 3)}, 8) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return leaky_relu(v[0], 0.01); }, {T(4, 3)}, 9) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return numkit::tanh(v[0]); }, {T(4, 3)}, 10) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return sigmoid(v[0]); }, {T(4, 3)}, 11) < 1e-4);
  CHECK(check_op(
            [](Tape&, auto& v) {
              std::vector<Var> parts{v[0], v[1]};
              return concat_cols(parts);
            },
            {T(3, 2), T(3, 1)}, 12) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return gather_rows(v[0], {2, 0, 2, 1}); }, {T(3, 2)}, 13) <
        1e-4);
  auto op = std::make_shared<SparseMatrix>(SparseMatrix::from_entries(
      3, 4, {{0, 1, 0.5}, {0, 3, 2.0}, {2, 0, -1.0}, {2, 1, 0.25}}));
  CHECK(check_op([op](Tape&, auto& v) { return spmm(op, v[0]); }, {T(4, 2)}, 14) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return row_dot(v[0], v[1]); }, {T(4, 3), T(4, 3)}, 15) <
        1e-4);
  CHECK(check_op([](Tape&, auto& v) { return mean(v[0]); }, {T(4, 3)}, 16) < 1e-4);
  CHECK(check_op([](Tape&, auto& v) { return batch_norm_train(v[0], v[1], v[2], kBatchNormEps); },
                 {T(6, 3), T(1, 3), T(1, 3)}, 17) < 1e-4);
  Tensor rm = T(1, 3), rv = random_tensor(1, 3, rng, 0.5, 2);
  CHECK(check_op(
            [&](Tape&, auto& v) { return batch_norm_eval(v[0], v[1], v[2], rm, rv, 1e-8); },
            {T(6, 3), T(1, 3), T(1, 3)}, 18) < 1e-4);
  Tensor target = T(4, 1);
  CHECK(check_op([&](Tape&, auto& v) { return mse_loss(v[0], target); }, {T(4, 1)}, 19) < 1e-4);
  Tensor labels = Tensor::from_rows({{1}, {0}, {1}, {0}});
  CHECK(check_op([&](Tape&, auto& v) { return bce_with_logits(v[0], labels); }, {T(4, 1)}, 20) <
        1e-4);
}

TEST_CASE("gradients of unused leaves are zero") {
  Tape tape;
  Tensor used = Tensor::from_rows({{2.0}});
  Tensor unused = Tensor::from_rows({{5.0}});
  Var a = tape.parameter(used);
  tape.parameter(unused);
  tape.backward(sum(mul(a, a)));
  CHECK(tape.parameter_grad(used)[0] == 4.0);
  CHECK(tape.parameter_grad(unused)[0] == 0.0);
}

TEST_CASE("grad_check on a quadratic is exact up to roundoff") {
  Tensor w = Tensor::from_rows({{0.3, -1.2, 2.5}});
  std::vector<Tensor*> params{&w};
  LossFn loss = [&](std::vector<Tensor>* grads) {
    double s = 0;
    Tensor g(1, 3);
    for (std::size_t i = 0; i < 3; ++i) {
      s += (i + 1.0) * w[i] * w[i];
      g[i] = 2 * (i + 1.0) * w[i];
    }
    if (grads) *grads = {g};
    return s;
  };
  CHECK(grad_check(loss, params, 1e-5) < 1e-8);
  CHECK_THROWS_AS(grad_check(loss, params, 1e-3), ArgumentError);
}

TEST_CASE("Adam leaves parameters unchanged under a zero gradient") {
  Tensor w = Tensor::from_rows({{1.5, -2.0}});
  Tensor before = w;
  Adam adam(0.01);
  std::vector<Tensor*> params{&w};
  std::vector<Tensor> grads{Tensor(1, 2)};
  adam.step(params, grads);
  CHECK(w == before);
  CHECK(adam.steps() == 1);
}

TEST_CASE("Adam first step equals lr * g / (|g| + eps)") {
  Tensor w = Tensor::scalar(0.0);
  Adam adam(0.01);
  std::vector<Tensor*> params{&w};
  std::vector<Tensor> grads{Tensor::scalar(0.5)};
  adam.step(params, grads);
  CHECK(w[0] == doctest::Approx(-0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("Adam converges on (w - 3)^2") {
  Tensor w = Tensor::scalar(0.0);
  Adam adam(0.1);
  std::vector<Tensor*> params{&w};
  for (int i = 0; i < 100; ++i) {
    std::vector<Tensor> grads{Tensor::scalar(2 * (w[0] - 3))};
    adam.step(params, grads);
  }
  CHECK(std::abs(w[0] - 3) < 0.5);
}

TEST_CASE("Adam rejects non-finite gradients without updating") {
  Tensor w = Tensor::scalar(1.0);
  Adam adam(0.1);
  std::vector<Tensor*> params{&w};
  std::vector<Tensor> grads{Tensor::scalar(std::nan(""))};
  CHECK_THROWS_AS(adam.step(params, grads), DivergenceError);
  CHECK(w[0] == 1.0);
  std::vector<Tensor> wrong{Tensor(2, 2)};
  CHECK_THROWS_AS(adam.step(params, wrong), ShapeError);
}

TEST_CASE("checkpoint save/load is exact") {
  Rng rng(5);
  Checkpoint ck;
  ck.tensors["a"] = random_tensor(3, 4, rng, -1e3, 1e3);
  ck.tensors["b.scalar"] = Tensor::scalar(1.0 / 3.0);
  ck.metadata["note"] = "x";
  auto path = std::filesystem::temp_directory_path() / "dssddi_ckpt_test.json";
  save_checkpoint(path, ck);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.tensors == ck.tensors);
  CHECK(back.metadata == ck.metadata);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(checkpoint_from_json(nlohmann::json{{"format", "other"}}), FormatError);
}
