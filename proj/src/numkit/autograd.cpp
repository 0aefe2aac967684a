#include "dssddi/numkit/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "dssddi/errors.hpp"

namespace dssddi::numkit {

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(Node{std::move(value), {}, nullptr, false}); }

Var Tape::leaf(Tensor value) { return push(Node{std::move(value), {}, nullptr, true}); }

Var Tape::parameter(Tensor& param) {
  if (auto it = params_.find(&param); it != params_.end()) return Var(this, it->second);
  Var v = leaf(param);
  params_.emplace(&param, v.id());
  return v;
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [&](std::size_t i) { return nodes_[i].needs_grad; });
  if (!any) backward = nullptr;
  return push(Node{std::move(value), {}, std::move(backward), any});
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

Tensor Tape::parameter_grad(const Tensor& param) const {
  auto it = params_.find(&param);
  if (it == params_.end()) return Tensor(param.rows(), param.cols());
  const Node& n = nodes_[it->second];
  if (n.grad.empty()) return Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].needs_grad) return;
  Tensor& dst = grad_buffer(id);
  require_same_shape(dst, g, "gradient accumulation");
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

void Tape::backward(Var loss) {
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward requires a 1x1 loss, got " + lv.shape_string());
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

namespace {

Tape& tape_of(Var a) {
  if (a.tape() == nullptr) throw ShapeError("operand is not recorded on a tape");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ShapeError("operands recorded on different tapes");
  }
  return *a.tape();
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

/// Elementwise op whose derivative depends on (input, output).
template <typename F, typename D>
Var unary(Var x, F f, D dfdx) {
  Tape& t = tape_of(x);
  Tensor out = map(x.value(), f);
  const auto ix = x.id();
  const auto out_id = t.size();
  return t.record(std::move(out), {ix}, [ix, out_id, dfdx](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value_at(ix);
    const Tensor& yv = tp.value_at(out_id);
    Tensor& dx = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Tensor out = numkit::matmul(a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    const Tensor& av = tp.value_at(ia);
    const Tensor& bv = tp.value_at(ib);
    if (tp.needs_grad(ia)) tp.accumulate(ia, numkit::matmul(g, bv.transposed()));
    if (tp.needs_grad(ib)) tp.accumulate(ib, numkit::matmul(av.transposed(), g));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, g);
    if (tp.needs_grad(ib)) {
      Tensor& db = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    const Tensor& av = tp.value_at(ia);
    const Tensor& bv = tp.value_at(ib);
    if (tp.needs_grad(ia)) {
      Tensor& da = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
    }
    if (tp.needs_grad(ib)) {
      Tensor& db = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
    }
  });
}

Var add_row(Var x, Var b) {
  Tape& t = tape_of(x, b);
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ShapeError("add_row: bias " + bv.shape_string() + " for input " + xv.shape_string());
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
  const auto ix = x.id(), ib = b.id();
  return t.record(std::move(out), {ix, ib}, [ix, ib](Tape& tp, const Tensor& g) {
    tp.accumulate(ix, g);
    if (tp.needs_grad(ib)) {
      Tensor& db = tp.grad_buffer(ib);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) db[c] += g(r, c);
    }
  });
}

Var scale(Var x, double c) {
  Tape& t = tape_of(x);
  Tensor out = map(x.value(), [c](double v) { return c * v; });
  const auto ix = x.id();
  return t.record(std::move(out), {ix}, [ix, c](Tape& tp, const Tensor& g) {
    Tensor& dx = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += c * g[i];
  });
}

Var scalar_mul(Var s, Var x) {
  Tape& t = tape_of(s, x);
  if (s.value().size() != 1) throw ShapeError("scalar_mul: scale must be 1x1");
  const double sv = s.value()[0];
  Tensor out = map(x.value(), [sv](double v) { return sv * v; });
  const auto is = s.id(), ix = x.id();
  return t.record(std::move(out), {is, ix}, [is, ix](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value_at(ix);
    const double sv = tp.value_at(is)[0];
    if (tp.needs_grad(is)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      tp.grad_buffer(is)[0] += acc;
    }
    if (tp.needs_grad(ix)) {
      Tensor& dx = tp.grad_buffer(ix);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += sv * g[i];
    }
  });
}

Var add_const(Var x, double c) {
  Tape& t = tape_of(x);
  Tensor out = map(x.value(), [c](double v) { return v + c; });
  const auto ix = x.id();
  return t.record(std::move(out), {ix}, [ix](Tape& tp, const Tensor& g) { tp.accumulate(ix, g); });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var x, double slope) {
  return unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double xv, double) { return xv > 0.0 ? 1.0 : slope; });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw ShapeError("concat_cols: operands on different tapes");
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + p.value().shape_string());
    }
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.cols();
  }
  Tensor out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + offsets[k]);
  }
  auto inputs = ids;
  return t.record(std::move(out), std::move(inputs),
                  [ids, offsets](Tape& tp, const Tensor& g) {
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (!tp.needs_grad(ids[k])) continue;
                      Tensor& d = tp.grad_buffer(ids[k]);
                      for (std::size_t r = 0; r < d.rows(); ++r)
                        for (std::size_t c = 0; c < d.cols(); ++c)
                          d(r, c) += g(r, offsets[k] + c);
                    }
                  });
}

Var gather_rows(Var x, std::vector<std::size_t> index) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  Tensor out(index.size(), xv.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= xv.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy(xv.row(index[r]).begin(), xv.row(index[r]).end(), out.row(r).begin());
  }
  const auto ix = x.id();
  return t.record(std::move(out), {ix}, [ix, index = std::move(index)](Tape& tp, const Tensor& g) {
    Tensor& dx = tp.grad_buffer(ix);
    for (std::size_t r = 0; r < index.size(); ++r) {
      auto dst = dx.row(index[r]);
      auto src = g.row(r);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  });
}

Var spmm(std::shared_ptr<const SparseMatrix> a, Var x) {
  Tape& t = tape_of(x);
  Tensor out = a->multiply(x.value());
  const auto ix = x.id();
  return t.record(std::move(out), {ix}, [ix, a](Tape& tp, const Tensor& g) {
    Tensor& dx = tp.grad_buffer(ix);
    for (std::size_t r = 0; r < a->rows; ++r) {
      auto gr = g.row(r);
      for (std::size_t p = a->row_ptr[r]; p < a->row_ptr[r + 1]; ++p) {
        auto dst = dx.row(a->col_idx[p]);
        const double w = a->values[p];
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w * gr[c];
      }
    }
  });
}

Var row_dot(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "row_dot");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) s += av(r, c) * bv(r, c);
    out(r, 0) = s;
  }
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    const Tensor& av = tp.value_at(ia);
    const Tensor& bv = tp.value_at(ib);
    if (tp.needs_grad(ia)) {
      Tensor& da = tp.grad_buffer(ia);
      for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) da(r, c) += g(r, 0) * bv(r, c);
    }
    if (tp.needs_grad(ib)) {
      Tensor& db = tp.grad_buffer(ib);
      for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) db(r, c) += g(r, 0) * av(r, c);
    }
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const auto ix = x.id();
  return t.record(Tensor::scalar(s), {ix}, [ix](Tape& tp, const Tensor& g) {
    Tensor& dx = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[0];
  });
}

Var mean(Var x) {
  const auto n = x.value().size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var batch_norm_train(Var x, Var gamma, Var beta, double eps, Tensor* mean_out,
                     Tensor* var_out) {
  Tape& t = tape_of(x, gamma);
  if (beta.tape() != &t) throw ShapeError("batch_norm: operands on different tapes");
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  if (gamma.value().cols() != d || beta.value().cols() != d) {
    throw ShapeError("batch_norm: scale/shift width does not match input " + xv.shape_string());
  }
  if (n == 0) throw ShapeError("batch_norm: empty batch");
  Tensor mu(1, d), var(1, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mu[c] += xv(r, c);
  for (std::size_t c = 0; c < d; ++c) mu[c] /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = xv(r, c) - mu[c];
      var[c] += dv * dv;
    }
  for (std::size_t c = 0; c < d; ++c) var[c] /= static_cast<double>(n);
  Tensor inv_std(1, d);
  for (std::size_t c = 0; c < d; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  Tensor xhat(n, d), out(n, d);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      xhat(r, c) = (xv(r, c) - mu[c]) * inv_std[c];
      out(r, c) = xhat(r, c) * gv[c] + bv[c];
    }
  if (mean_out) *mean_out = mu;
  if (var_out) *var_out = var;
  const auto ix = x.id(), ig = gamma.id(), ib = beta.id();
  return t.record(
      std::move(out), {ix, ig, ib},
      [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp,
                                                                         const Tensor& g) {
        const std::size_t n = g.rows(), d = g.cols();
        const Tensor& gv = tp.value_at(ig);
        if (tp.needs_grad(ig)) {
          Tensor& dg = tp.grad_buffer(ig);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) dg[c] += g(r, c) * xhat(r, c);
        }
        if (tp.needs_grad(ib)) {
          Tensor& db = tp.grad_buffer(ib);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) db[c] += g(r, c);
        }
        if (tp.needs_grad(ix)) {
          Tensor& dx = tp.grad_buffer(ix);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t c = 0; c < d; ++c) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
              sum_g += g(r, c);
              sum_gx += g(r, c) * xhat(r, c);
            }
            const double k = gv[c] * inv_std[c];
            for (std::size_t r = 0; r < n; ++r) {
              dx(r, c) += k * (g(r, c) - inv_n * sum_g - xhat(r, c) * inv_n * sum_gx);
            }
          }
        }
      });
}

Var batch_norm_eval(Var x, Var gamma, Var beta, const Tensor& running_mean,
                    const Tensor& running_var, double eps) {
  Tape& t = tape_of(x, gamma);
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  if (running_mean.cols() != d || running_var.cols() != d) {
    throw ShapeError("batch_norm: running statistics width does not match input");
  }
  Tensor inv_std(1, d);
  for (std::size_t c = 0; c < d; ++c) inv_std[c] = 1.0 / std::sqrt(running_var[c] + eps);
  Tensor xhat(n, d), out(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      xhat(r, c) = (xv(r, c) - running_mean[c]) * inv_std[c];
      out(r, c) = xhat(r, c) * gamma.value()[c] + beta.value()[c];
    }
  const auto ix = x.id(), ig = gamma.id(), ib = beta.id();
  return t.record(std::move(out), {ix, ig, ib},
                  [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Tape& tp, const Tensor& g) {
                    const Tensor& gv = tp.value_at(ig);
                    const std::size_t n = g.rows(), d = g.cols();
                    if (tp.needs_grad(ig)) {
                      Tensor& dg = tp.grad_buffer(ig);
                      for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t c = 0; c < d; ++c) dg[c] += g(r, c) * xhat(r, c);
                    }
                    if (tp.needs_grad(ib)) {
                      Tensor& db = tp.grad_buffer(ib);
                      for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t c = 0; c < d; ++c) db[c] += g(r, c);
                    }
                    if (tp.needs_grad(ix)) {
                      Tensor& dx = tp.grad_buffer(ix);
                      for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t c = 0; c < d; ++c)
                          dx(r, c) += g(r, c) * gv[c] * inv_std[c];
                    }
                  });
}

Var mse_loss(Var pred, const Tensor& target) {
  Tape& t = tape_of(pred);
  require_same_shape(pred.value(), target, "mse_loss");
  const std::size_t n = target.size();
  if (n == 0) throw ShapeError("mse_loss: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred.value()[i] - target[i];
    s += d * d;
  }
  const auto ip = pred.id();
  return t.record(Tensor::scalar(s / static_cast<double>(n)), {ip},
                  [ip, target](Tape& tp, const Tensor& g) {
                    const Tensor& pv = tp.value_at(ip);
                    Tensor& dp = tp.grad_buffer(ip);
                    const double k = 2.0 * g[0] / static_cast<double>(pv.size());
                    for (std::size_t i = 0; i < pv.size(); ++i) dp[i] += k * (pv[i] - target[i]);
                  });
}

Var bce_with_logits(Var logits, const Tensor& target) {
  Tape& t = tape_of(logits);
  require_same_shape(logits.value(), target, "bce_with_logits");
  const std::size_t n = target.size();
  if (n == 0) throw ShapeError("bce_with_logits: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.value()[i];
    // -[y log s(z) + (1-y) log(1 - s(z))] = max(z,0) - z y + log(1 + e^{-|z|})
    s += std::max(z, 0.0) - z * target[i] + std::log1p(std::exp(-std::abs(z)));
  }
  const auto il = logits.id();
  return t.record(Tensor::scalar(s / static_cast<double>(n)), {il},
                  [il, target](Tape& tp, const Tensor& g) {
                    const Tensor& zv = tp.value_at(il);
                    Tensor& dz = tp.grad_buffer(il);
                    const double k = g[0] / static_cast<double>(zv.size());
                    for (std::size_t i = 0; i < zv.size(); ++i) {
                      const double z = zv[i];
                      const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                                              : std::exp(z) / (1.0 + std::exp(z));
                      dz[i] += k * (p - target[i]);
                    }
                  });
}

}  // namespace dssddi::numkit
