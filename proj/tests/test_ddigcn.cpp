#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "dssddi/ddigcn.hpp"
#include "dssddi/errors.hpp"
#include "dssddi/numkit/gradcheck.hpp"

using namespace dssddi;
using namespace dssddi::ddigcn;
using numkit::Tensor;

namespace {

DdiGraph make_graph(std::size_t n, std::vector<DdiEdge> edges) {
  std::vector<Drug> drugs;
  for (std::size_t i = 0; i < n; ++i) drugs.push_back({i, "d" + std::to_string(i), {}});
  return DdiGraph(std::move(drugs), std::move(edges));
}

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.data()) v = uniform(rng, -1, 1);
  return t;
}

numkit::Mlp identity_mlp(std::size_t d) {
  numkit::Mlp m;
  m.layers.push_back({Tensor::identity(d), Tensor(1, d)});
  return m;
}

// Dense reference implementations, written with explicit loops.
using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  return m;
}

Mat mat_mul(const Mat& a, const Tensor& w) {
  Mat out(a.size(), std::vector<double>(w.cols(), 0.0));
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c)
      for (std::size_t k = 0; k < w.rows(); ++k) out[r][c] += a[r][k] * w(k, c);
  return out;
}

void batch_norm(Mat& x, const numkit::BatchNorm& bn) {
  const std::size_t n = x.size();
  for (std::size_t c = 0; c < x[0].size(); ++c) {
    double mean = 0;
    for (auto& row : x) mean += row[c];
    mean /= n;
    double var = 0;
    for (auto& row : x) var += (row[c] - mean) * (row[c] - mean);
    var /= n;
    for (auto& row : x)
      row[c] = bn.gamma[c] * (row[c] - mean) / std::sqrt(var + numkit::kBatchNormEps) + bn.beta[c];
  }
}

void relu(Mat& x) {
  for (auto& row : x)
    for (double& v : row) v = std::max(v, 0.0);
}

Mat neighbor_mean(const DdiGraph& g, const Mat& z, std::optional<int> sign) {
  Mat out(z.size(), std::vector<double>(z[0].size(), 0.0));
  for (DrugId v = 0; v < g.num_drugs(); ++v) {
    std::size_t count = 0;
    for (DrugId u = 0; u < g.num_drugs(); ++u) {
      auto s = g.sign(v, u);
      if (!s || (sign && *s != *sign)) continue;
      ++count;
      for (std::size_t c = 0; c < z[0].size(); ++c) out[v][c] += z[u][c];
    }
    if (count > 0)
      for (double& x : out[v]) x /= count;
  }
  return out;
}

Mat oracle_gin(const DdiGraph& g, const Tensor& input, const Model& m) {
  Mat z = to_mat(input);
  for (const GinLayer& layer : m.gin) {
    Mat agg = neighbor_mean(g, z, std::nullopt);
    for (std::size_t r = 0; r < z.size(); ++r)
      for (std::size_t c = 0; c < z[0].size(); ++c)
        agg[r][c] += (1 + layer.epsilon[0]) * z[r][c];
    Mat h = agg;
    for (std::size_t l = 0; l < layer.mlp.layers.size(); ++l) {
      h = mat_mul(h, layer.mlp.layers[l].weight);
      if (!layer.mlp.layers[l].bias.empty())
        for (auto& row : h)
          for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.mlp.layers[l].bias[c];
      if (l + 1 < layer.mlp.layers.size()) {
        if (layer.mlp.norms[l]) batch_norm(h, *layer.mlp.norms[l]);
        relu(h);
      }
    }
    if (layer.norm) batch_norm(h, *layer.norm);
    if (layer.activate) relu(h);
    z = h;
  }
  return z;
}

Mat hconcat(const std::vector<const Mat*>& parts) {
  Mat out(parts[0]->size());
  for (const Mat* p : parts)
    for (std::size_t r = 0; r < out.size(); ++r)
      out[r].insert(out[r].end(), (*p)[r].begin(), (*p)[r].end());
  return out;
}

Mat oracle_sgcn(const DdiGraph& g, const Tensor& input, const Model& m) {
  Mat hb = to_mat(input), hu = hb;
  for (const SgcnLayer& layer : m.sgcn) {
    Mat pb = neighbor_mean(g, hb, kSynergy), nu = neighbor_mean(g, hu, kAntagonism);
    Mat pu = neighbor_mean(g, hu, kSynergy), nb = neighbor_mean(g, hb, kAntagonism);
    Mat b = mat_mul(hconcat({&pb, &nu, &hb}), layer.w_balanced);
    Mat u = mat_mul(hconcat({&pu, &nb, &hu}), layer.w_unbalanced);
    if (layer.norm_balanced) batch_norm(b, *layer.norm_balanced);
    if (layer.norm_unbalanced) batch_norm(u, *layer.norm_unbalanced);
    if (layer.activate) {
      relu(b);
      relu(u);
    }
    hb = b;
    hu = u;
  }
  return hconcat({&hb, &hu});
}

double max_diff(const Tensor& t, const Mat& m) {
  double d = 0;
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) d = std::max(d, std::abs(t(r, c) - m[r][c]));
  return d;
}

DdiGraph six_drug_graph() {
  return make_graph(6, {{0, 1, 1}, {0, 2, -1}, {1, 3, 1}, {2, 3, 0}, {3, 4, -1}, {4, 5, 1},
                        {1, 5, 0}, {2, 5, 1}});
}

Config small_config(Backbone b) {
  Config c;
  c.backbone = b;
  c.layers = 2;
  c.embedding_dim = 4;
  c.hidden_dim = 4;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("gin with identity network and zero epsilon leaves an isolated drug unchanged") {
  const DdiGraph g = make_graph(1, {});
  std::vector<GinLayer> layers(1);
  layers[0].mlp = identity_mlp(3);
  const Tensor x = Tensor::from_rows({{0.5, -2.0, 3.0}});
  CHECK(gin_forward(g, x, layers).z == x);
}

TEST_CASE("gin two drugs by hand") {
  const DdiGraph g = make_graph(2, {{0, 1, 1}});
  std::vector<GinLayer> layers(1);
  layers[0].mlp = identity_mlp(2);
  layers[0].epsilon = Tensor::scalar(0.5);
  const Tensor x = Tensor::from_rows({{1.0, 2.0}, {-3.0, 4.0}});
  const Tensor z = gin_forward(g, x, layers).z;
  // z0 = 1.5 * x0 + x1, z1 = 1.5 * x1 + x0
  CHECK(z(0, 0) == doctest::Approx(-1.5).epsilon(1e-14));
  CHECK(z(0, 1) == doctest::Approx(7.0).epsilon(1e-14));
  CHECK(z(1, 0) == doctest::Approx(-3.5).epsilon(1e-14));
  CHECK(z(1, 1) == doctest::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("gin aggregates over sampled zero edges too") {
  const DdiGraph g = make_graph(2, {{0, 1, 0}});
  std::vector<GinLayer> layers(1);
  layers[0].mlp = identity_mlp(1);
  const Tensor z = gin_forward(g, Tensor::from_rows({{1.0}, {10.0}}), layers).z;
  CHECK(z(0, 0) == doctest::Approx(11.0));
}

TEST_CASE("sgcn two drugs by hand") {
  SUBCASE("synergy edge feeds the balanced path") {
    const DdiGraph g = make_graph(2, {{0, 1, 1}});
    std::vector<SgcnLayer> layers(1);
    // in width 1, blocks [synergy mean, antagonism mean, self]
    layers[0].w_balanced = Tensor::from_rows({{2.0}, {3.0}, {5.0}});
    layers[0].w_unbalanced = Tensor::from_rows({{7.0}, {11.0}, {13.0}});
    const Tensor z = sgcn_forward(g, Tensor::from_rows({{1.0}, {2.0}}), layers).z;
    REQUIRE(z.cols() == 2);
    CHECK(z(0, 0) == doctest::Approx(2 * 2.0 + 5 * 1.0));
    CHECK(z(0, 1) == doctest::Approx(7 * 2.0 + 13 * 1.0));
    CHECK(z(1, 0) == doctest::Approx(2 * 1.0 + 5 * 2.0));
  }
  SUBCASE("antagonism edge crosses paths") {
    const DdiGraph g = make_graph(2, {{0, 1, -1}});
    std::vector<SgcnLayer> layers(2);
    layers[0].w_balanced = Tensor::from_rows({{0.0}, {0.0}, {1.0}});
    layers[0].w_unbalanced = Tensor::from_rows({{0.0}, {0.0}, {-1.0}});
    layers[1].w_balanced = Tensor::from_rows({{0.0}, {1.0}, {0.0}});
    layers[1].w_unbalanced = Tensor::from_rows({{0.0}, {1.0}, {0.0}});
    // after layer 1: hb = x, hu = -x; layer 2 balanced = antagonism mean of hu
    const Tensor z = sgcn_forward(g, Tensor::from_rows({{1.0}, {2.0}}), layers).z;
    CHECK(z(0, 0) == doctest::Approx(-2.0));
    CHECK(z(0, 1) == doctest::Approx(2.0));
    CHECK(z(1, 0) == doctest::Approx(-1.0));
    CHECK(z(1, 1) == doctest::Approx(1.0));
  }
}

TEST_CASE("forward passes match a dense loop oracle") {
  const DdiGraph g = six_drug_graph();
  Rng rng(3);
  const Tensor x = random_tensor(6, 6, rng);
  for (Backbone b : {Backbone::kGin, Backbone::kSgcn}) {
    CAPTURE(to_string(b));
    Config cfg = small_config(b);
    cfg.layers = 3;
    Model m = Model::create(6, cfg);
    for (auto& p : m.parameters())
      for (double& v : p.tensor->data()) v += uniform(rng, -0.3, 0.3);
    const Mat expected = b == Backbone::kGin ? oracle_gin(g, x, m) : oracle_sgcn(g, x, m);
    numkit::Tape tape;
    const auto agg = Aggregators::build(g);
    const Tensor z = m.forward(tape, agg, tape.constant(x), true).value();
    CHECK(max_diff(z, expected) < 1e-12);
  }
}

TEST_CASE("edge regression gradients match finite differences") {
  const DdiGraph g = six_drug_graph();
  for (Backbone b : {Backbone::kGin, Backbone::kSgcn}) {
    CAPTURE(to_string(b));
    Model m = Model::create(6, small_config(b));
    const auto agg = Aggregators::build(g);
    const Tensor x = one_hot_inputs(6);
    std::vector<Tensor*> params;
    for (auto& p : m.parameters()) params.push_back(p.tensor);
    numkit::LossFn loss = [&](std::vector<Tensor>* grads) {
      numkit::Tape tape;
      numkit::Var l = edge_regression_loss(tape, m, agg, x, g.edges());
      if (grads) {
        tape.backward(l);
        grads->clear();
        for (Tensor* p : params) grads->push_back(tape.parameter_grad(*p));
      }
      return l.value()[0];
    };
    CHECK(numkit::grad_check(loss, params, 1e-6) < 1e-4);
  }
}

TEST_CASE("relabeling drugs permutes the embeddings") {
  const std::vector<DdiEdge> edges{{0, 1, 1}, {1, 2, -1}, {2, 3, 0}, {3, 4, 1}, {0, 4, -1}, {1, 3, 1}};
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};  // old id -> new id
  std::vector<DdiEdge> permuted;
  for (const auto& e : edges) {
    const DrugId a = perm[e.u], c = perm[e.v];
    permuted.push_back({std::min(a, c), std::max(a, c), e.sign});
  }
  const DdiGraph g = make_graph(5, edges);
  const DdiGraph gp = make_graph(5, permuted);
  Rng rng(8);
  const Tensor x = random_tensor(5, 5, rng);
  Tensor xp(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 5; ++c) xp(perm[i], c) = x(i, c);
  for (Backbone b : {Backbone::kGin, Backbone::kSgcn}) {
    CAPTURE(to_string(b));
    Model m1 = Model::create(5, small_config(b));
    Model m2 = Model::create(5, small_config(b));
    numkit::Tape t1, t2;
    const auto a1 = Aggregators::build(g), a2 = Aggregators::build(gp);
    const Tensor z = m1.forward(t1, a1, t1.constant(x), true).value();
    const Tensor zp = m2.forward(t2, a2, t2.constant(xp), true).value();
    double diff = 0;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t c = 0; c < z.cols(); ++c)
        diff = std::max(diff, std::abs(z(i, c) - zp(perm[i], c)));
    CHECK(diff < 1e-10);
  }
}

TEST_CASE("edge score is symmetric") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = random_tensor(1, 8, rng), b = random_tensor(1, 8, rng);
    CHECK(edge_score(a.row(0), b.row(0)) == edge_score(b.row(0), a.row(0)));
  }
  const Tensor a = Tensor::from_rows({{1, 2}}), b = Tensor::from_rows({{3, -1}});
  CHECK(edge_score(a.row(0), b.row(0)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(edge_score(a.row(0), Tensor(1, 3).row(0)), ShapeError);
}

TEST_CASE("zero initialized output layer") {
  for (Backbone b : {Backbone::kGin, Backbone::kSgcn}) {
    Config cfg = small_config(b);
    cfg.zero_init_output = true;
    cfg.epochs = 1;
    SUBCASE("all zero targets give zero initial loss") {
      const DdiGraph g = make_graph(4, {{0, 1, 0}, {1, 2, 0}, {0, 3, 0}});
      CHECK(train_ddigcn(g, cfg).loss_curve[0] == 0.0);
    }
    SUBCASE("signed targets give the mean squared sign") {
      const DdiGraph g = six_drug_graph();
      double expected = 0;
      for (const auto& e : g.edges()) expected += e.sign * e.sign;
      expected /= g.edges().size();
      CHECK(train_ddigcn(g, cfg).loss_curve[0] == doctest::Approx(expected).epsilon(1e-15));
    }
  }
}

TEST_CASE("two drugs with a synergy edge learn a score near one") {
  const DdiGraph g = make_graph(2, {{0, 1, 1}});
  for (Backbone b : {Backbone::kGin, Backbone::kSgcn}) {
    CAPTURE(to_string(b));
    Config cfg;
    cfg.backbone = b;
    cfg.seed = 5;
    const TrainResult r = train_ddigcn(g, cfg);
    REQUIRE(r.loss_curve.size() == 400);
    // SGCN reaches the target within a few Adam steps here and then rings,
    // so the monotone check applies to GIN only.
    if (b == Backbone::kGin)
      for (std::size_t e = 1; e < 50; ++e) CHECK(r.loss_curve[e] <= r.loss_curve[e - 1]);
    CHECK(std::abs(edge_score(r.embeddings.z.row(0), r.embeddings.z.row(1)) - 1.0) < 0.1);
  }
}

TEST_CASE("two synergy cliques joined by antagonism are separated") {
  std::vector<DdiEdge> edges;
  for (DrugId a = 0; a < 8; ++a)
    for (DrugId c = a + 1; c < 8; ++c) edges.push_back({a, c, (a < 4) == (c < 4) ? 1 : -1});
  const DdiGraph g = make_graph(8, edges);
  for (Backbone b : {Backbone::kGin, Backbone::kSgcn}) {
    CAPTURE(to_string(b));
    Config cfg;
    cfg.backbone = b;
    cfg.seed = 1;
    const TrainResult r = train_ddigcn(g, cfg);
    CHECK(r.loss_curve.back() < 0.1 * r.loss_curve.front());
    double pos = 0, neg = 0;
    std::size_t np = 0, nn = 0;
    for (const auto& e : g.edges()) {
      const double s = edge_score(r.embeddings.z.row(e.u), r.embeddings.z.row(e.v));
      CHECK(s * e.sign > 0);
      (e.sign > 0 ? pos : neg) += s;
      ++(e.sign > 0 ? np : nn);
    }
    CHECK(pos / np > neg / nn);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const DdiGraph g = six_drug_graph();
  Config cfg = small_config(Backbone::kSgcn);
  cfg.epochs = 30;
  const TrainResult a = train_ddigcn(g, cfg), b = train_ddigcn(g, cfg);
  CHECK(a.embeddings.z == b.embeddings.z);
  CHECK(a.loss_curve == b.loss_curve);
  cfg.seed = 12;
  CHECK_FALSE(train_ddigcn(g, cfg).embeddings.z == a.embeddings.z);
}

TEST_CASE("configuration errors") {
  Config cfg;
  cfg.layers = 0;
  CHECK_THROWS_AS(Model::create(3, cfg), ConfigError);
  cfg.layers = 2;
  cfg.embedding_dim = 5;
  CHECK_THROWS_AS(Model::create(3, cfg), ConfigError);
  CHECK_THROWS_AS(backbone_from_string("gat"), ArgumentError);
  CHECK(backbone_from_string("gin") == Backbone::kGin);
}
