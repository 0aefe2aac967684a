// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
//   acceptance [--quick] [--work DIR]
// --quick trains with 200/100 epochs instead of 1000/400.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "dssddi/causal.hpp"
#include "dssddi/ddigcn.hpp"
#include "dssddi/evalmetrics.hpp"
#include "dssddi/mdgcn.hpp"
#include "dssddi/medsupport.hpp"
#include "dssddi/numkit/gradcheck.hpp"
#include "dssddi/pipeline.hpp"
#include "dssddi/rng.hpp"
#include "dssddi/synth.hpp"

using namespace dssddi;
using numkit::Tensor;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Outcome {
  bool pass;
  std::string detail;
};

void report(const char* name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++g_failures;
  std::printf("%s %-28s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

DdiGraph make_graph(std::size_t n, std::vector<DdiEdge> edges) {
  std::vector<Drug> drugs;
  for (std::size_t i = 0; i < n; ++i) drugs.push_back({i, "d" + std::to_string(i), {}});
  return DdiGraph(std::move(drugs), std::move(edges));
}

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -1, double hi = 1) {
  Tensor t(r, c);
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

// ---- gradients ----

double ddigcn_grad_error(ddigcn::Backbone b) {
  const DdiGraph g = make_graph(6, {{0, 1, 1}, {0, 2, -1}, {1, 3, 1}, {2, 3, 0}, {3, 4, -1}, {4, 5, 1},
                                    {1, 5, 0}, {2, 5, 1}});
  ddigcn::Config c;
  c.backbone = b;
  c.layers = 2;
  c.embedding_dim = 4;
  c.hidden_dim = 4;
  c.seed = 11;
  auto m = ddigcn::Model::create(6, c);
  const auto agg = ddigcn::Aggregators::build(g);
  const Tensor x = Tensor::identity(6);
  std::vector<Tensor*> params;
  for (auto& p : m.parameters()) params.push_back(p.tensor);
  numkit::LossFn loss = [&](std::vector<Tensor>* grads) {
    numkit::Tape tape;
    numkit::Var l = ddigcn::edge_regression_loss(tape, m, agg, x, g.edges());
    if (grads) {
      tape.backward(l);
      grads->clear();
      for (Tensor* p : params) grads->push_back(tape.parameter_grad(*p));
    }
    return l.value()[0];
  };
  return numkit::grad_check(loss, params, 1e-6);
}

double mdgcn_grad_error() {
  Rng rng(11);
  mdgcn::TrainingData d;
  d.patient_features = Tensor::from_rows({{1.2, 0.3}, {0.9, -0.4}, {1.5, 0.1}, {-1.1, 0.2}, {-0.8, -0.5}});
  d.drug_features = random_tensor(4, 3, rng);
  d.ddi = random_tensor(4, 4, rng, -0.2, 0.2);
  d.y = Tensor::from_rows({{1, 1, 0, 0}, {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 0}});
  d.truth = d.y;
  d.t = Tensor(5, 4, 1.0);
  d.t(4, 0) = 0.0;
  d.t_cf = d.t;
  d.y_cf = d.y;
  d.t_cf(0, 2) = 0.0;
  d.y_cf(0, 2) = 1.0;
  d.t_cf(3, 1) = 0.0;
  d.graph = mdgcn::BipartiteGraph::from_links(d.y);
  d.train_patients = {0, 1, 2, 3, 4};
  mdgcn::TrainConfig c;
  c.width = 4;
  c.decoder_hidden = 3;
  c.seed = 3;
  auto m = mdgcn::Model::create(2, 3, c);
  Rng nr(1);
  const auto batch = mdgcn::sample_pairs(d, 1, nr);
  std::vector<Tensor*> params;
  for (auto& nt : m.parameters()) params.push_back(nt.tensor);
  numkit::LossFn loss = [&](std::vector<Tensor>* grads) {
    numkit::Tape tape;
    const auto l = mdgcn::mdgcn_loss(tape, m, d, batch, 1.0);
    if (grads) {
      tape.backward(l.total);
      grads->clear();
      for (Tensor* p : params) grads->push_back(tape.parameter_grad(*p));
    }
    return l.total.value()[0];
  };
  return numkit::grad_check(loss, params, 1e-4);
}

// ---- truss / CTC oracles ----

using Adj = std::vector<std::vector<bool>>;

Adj adjacency(const DdiGraph& g) {
  Adj a(g.num_drugs(), std::vector<bool>(g.num_drugs(), false));
  for (const auto& e : g.edges()) a[e.u][e.v] = a[e.v][e.u] = true;
  return a;
}

Adj brute_p_truss(Adj a, int p) {
  const std::size_t n = a.size();
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v) {
        if (!a[u][v]) continue;
        int s = 0;
        for (std::size_t w = 0; w < n; ++w) s += a[u][w] && a[v][w];
        if (s < p - 2) {
          a[u][v] = a[v][u] = false;
          changed = true;
        }
      }
  }
  return a;
}

bool adj_connects(const Adj& a, const std::vector<DrugId>& q) {
  std::vector<bool> seen(a.size(), false);
  std::vector<std::size_t> stack{q.front()};
  seen[q.front()] = true;
  while (!stack.empty()) {
    auto x = stack.back();
    stack.pop_back();
    for (std::size_t y = 0; y < a.size(); ++y)
      if (a[x][y] && !seen[y]) {
        seen[y] = true;
        stack.push_back(y);
      }
  }
  return std::all_of(q.begin(), q.end(), [&](DrugId v) { return seen[v]; });
}

int exhaustive_ctc_p(const DdiGraph& g, const std::vector<DrugId>& q) {
  const std::size_t n = g.num_drugs();
  const Adj full = adjacency(g);
  int best = q.size() == 1 ? 2 : 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (!std::all_of(q.begin(), q.end(), [&](DrugId v) { return (mask >> v) & 1u; })) continue;
    Adj a = full;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v)
        if (!((mask >> u) & 1u) || !((mask >> v) & 1u)) a[u][v] = false;
    for (int p = std::max(best + 1, 2); p <= static_cast<int>(n); ++p) {
      Adj t = brute_p_truss(a, p);
      bool ok;
      if (q.size() > 1) {
        ok = adj_connects(t, q);
      } else {
        ok = std::any_of(t[q[0]].begin(), t[q[0]].end(), [](bool b) { return b; });
      }
      if (!ok) break;
      best = p;
    }
  }
  return best;
}

DdiGraph random_graph(std::size_t n, double density, Rng& rng) {
  std::vector<DdiEdge> edges;
  for (DrugId u = 0; u < n; ++u)
    for (DrugId v = u + 1; v < n; ++v)
      if (uniform01(rng) < density) edges.push_back({u, v, uniform01(rng) < 0.5 ? kAntagonism : kSynergy});
  return make_graph(n, std::move(edges));
}

Outcome truss_oracle() {
  Rng rng(101);
  int bad_truss = 0, edges = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + uniform_index(rng, 16);
    const DdiGraph g = random_graph(n, uniform(rng, 0.15, 0.7), rng);
    const auto idx = medsupport::truss_decomposition(g);
    const Adj a = adjacency(g);
    std::vector<Adj> levels;
    for (int p = 3; p <= static_cast<int>(n); ++p) levels.push_back(brute_p_truss(a, p));
    for (const auto& e : g.edges()) {
      int expect = 2;
      for (int p = 3; p <= static_cast<int>(n); ++p)
        if (levels[p - 3][e.u][e.v]) expect = p;
      bad_truss += idx.at(e.u, e.v) != expect;
      ++edges;
    }
  }
  int bad_ctc = 0, checked = 0;
  Rng crng(2024);
  while (checked < 150) {
    const std::size_t n = 5 + uniform_index(crng, 5);
    const DdiGraph g = random_graph(n, uniform(crng, 0.3, 0.8), crng);
    std::vector<DrugId> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    shuffle(all.begin(), all.end(), crng);
    std::vector<DrugId> q(all.begin(), all.begin() + 1 + uniform_index(crng, 3));
    if (!medsupport::Graph(g).connects(q)) continue;
    ++checked;
    const auto sub = medsupport::closest_truss_community(g, medsupport::truss_decomposition(g), q);
    bad_ctc += sub.p != exhaustive_ctc_p(g, q);
  }
  std::ostringstream s;
  s << "truss mismatches " << bad_truss << "/" << edges << " edges on 100 graphs, CTC p mismatches " << bad_ctc
    << "/" << checked;
  return {bad_truss == 0 && bad_ctc == 0, s.str()};
}

// ---- counterfactual oracle ----

std::optional<causal::Link> oracle_link(std::size_t i, std::size_t v, const Tensor& t, const Tensor& x,
                                        const Tensor& z, double gp, double gd) {
  auto dist = [](const Tensor& m, std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t c = 0; c < m.cols(); ++c) s += (m(a, c) - m(b, c)) * (m(a, c) - m(b, c));
    return std::sqrt(s);
  };
  std::optional<causal::Link> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < t.rows(); ++j)
    for (std::size_t u = 0; u < t.cols(); ++u) {
      const double dp = dist(x, i, j), dd = dist(z, v, u);
      if (t(j, u) == 1 - t(i, v) && dp < gp && dd < gd && dp + dd < best_d) {
        best_d = dp + dd;  // scan order is (j, u) ascending, so the first minimum wins ties
        best = causal::Link{j, u};
      }
    }
  return best;
}

Outcome counterfactual_oracle() {
  int queries = 0, bad = 0, matched = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng r(mix_seed(seed));
    const std::size_t n = 2 + uniform_index(r, 13), v = 2 + uniform_index(r, 12);
    if (n * v > 200) continue;
    Tensor t(n, v), x(n, 2), z(v, 2);
    for (double& c : t.data()) c = uniform01(r) < 0.4 ? 1.0 : 0.0;
    for (double& c : x.data()) c = static_cast<double>(uniform_index(r, 3));
    for (double& c : z.data()) c = static_cast<double>(uniform_index(r, 3));
    const double gp = uniform(r, 0.5, 3.0), gd = uniform(r, 0.5, 3.0);
    const causal::CfConfig cfg{gp, gd, 1, seed};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < v; ++d) {
        const auto got = causal::find_counterfactual_link(i, d, t, x, z, cfg);
        ++queries;
        matched += got.has_value();
        bad += got != oracle_link(i, d, t, x, z, gp, gd);
      }
  }
  std::ostringstream s;
  s << bad << " mismatches over " << queries << " queries (" << matched << " matched) across 50 seeds";
  return {bad == 0 && matched > 0, s.str()};
}

// ---- SS ----

Outcome ss_checks() {
  medsupport::ExplanationSubgraph sub;
  sub.nodes = {0, 1, 2};
  sub.edges = {{0, 1, kSynergy}, {1, 2, kAntagonism}};
  const std::vector<DrugId> q{0, 1};
  const double a = medsupport::suggestion_satisfaction(sub, q, 0.5);
  sub.edges.clear();
  const double b = medsupport::suggestion_satisfaction(sub, q, 0.5);
  Rng rng(9);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + uniform_index(rng, 6), n = k + uniform_index(rng, 12);
    const std::size_t pos = uniform_index(rng, 10), neg = uniform_index(rng, 10), out = uniform_index(rng, 20);
    const double alpha = uniform(rng, 0.01, 0.99);
    const double base = medsupport::suggestion_satisfaction(k, n, pos, neg, out, alpha);
    violations += medsupport::suggestion_satisfaction(k, n, pos + 1, neg, out, alpha) < base;
    violations += medsupport::suggestion_satisfaction(k, n, pos, neg + 1, out, alpha) > base;
  }
  return {a == 0.75 && b == 0.25 && violations == 0,
          fmt("examples %.4f and %.4f, %.0f monotonicity violations in 1000 perturbations", a, b, violations)};
}

// ---- metrics ----

Outcome metric_checks() {
  const std::vector<eval::RankedSuggestion> second{{1, {4, 5}, {5}}};
  const double ndcg = eval::ndcg_at_k(second);
  const std::vector<eval::RankedSuggestion> b{
      {1, {0, 1, 2}, {0, 2}}, {2, {3, 4, 5}, {6}}, {3, {7, 8, 9}, {9, 10, 11, 12}}};
  const double p = eval::precision_at_k(b), r = eval::recall_at_k(b);
  const bool ok = std::abs(ndcg - 0.6309) <= 1e-4 && p == 3.0 / 9.0 && r == 3.0 / 7.0;
  return {ok, fmt("ndcg %.6f, precision %.6f (3/9), recall %.6f (3/7)", ndcg, p, r)};
}

// ---- pipeline ----

struct Pipelines {
  fs::path data;
  fs::path work;
  pipeline::PipelineConfig base;
  pipeline::RunResult full;
  double full_seconds = 0;
};

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  fs::path work = fs::temp_directory_path() / "dssddi_acceptance";
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--quick")) {
      quick = true;
    } else if (!std::strcmp(argv[i], "--work") && i + 1 < argc) {
      work = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--quick] [--work DIR]\n", argv[0]);
      return 2;
    }
  }

  report("gradient-correctness", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const double gin = ddigcn_grad_error(ddigcn::Backbone::kGin);
    const double sgcn = ddigcn_grad_error(ddigcn::Backbone::kSgcn);
    const double md = mdgcn_grad_error();
    const double secs = seconds_since(t0);
    return Outcome{std::max({gin, sgcn, md}) < 1e-4 && secs < 10.0,
                   fmt("max rel err gin %.2e sgcn %.2e mdgcn %.2e (< 1e-4), %.2fs (< 10s)", gin, sgcn, md, secs)};
  });

  report("truss-ctc-oracle", [] {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = truss_oracle();
    const double secs = seconds_since(t0);
    o.pass = o.pass && secs < 60.0;
    o.detail += fmt(", %.1fs (< 60s)", secs);
    return o;
  });

  report("counterfactual-oracle", counterfactual_oracle);
  report("ss-hand-checks", ss_checks);
  report("metric-hand-checks", metric_checks);

  Pipelines p;
  p.work = work;
  p.data = work / "data";
  fs::remove_all(work);
  synth::write_synthetic(synth::generate_synthetic_cohort(synth::SynthConfig{}), p.data);
  if (quick) {
    p.base.mdgcn_epochs = 200;
    p.base.ddigcn_epochs = 100;
  }
  const auto paths = pipeline::DataPaths::from_dir(p.data);

  report("end-to-end-recovery", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    p.full = pipeline::run_training_pipeline(paths, p.base, work / "full");
    p.full_seconds = seconds_since(t0);
    const double r4 = eval::find_metric(p.full.metrics, "recall", 4);
    const double us = eval::find_metric(p.full.metrics, "usersim_recall", 4);
    return Outcome{r4 >= 0.8 && r4 >= us + 0.1 && p.full_seconds < 300.0,
                   fmt("Recall@4 %.4f (>= 0.8), UserSim %.4f (margin %.4f >= 0.1), %.1fs (< 300s)", r4, us, r4 - us,
                       p.full_seconds)};
  });

  report("ablation-no-ddi", [&] {
    auto c = p.base;
    c.use_ddi = false;
    const auto r = pipeline::run_training_pipeline(paths, c, work / "no_ddi");
    const double full = eval::find_metric(p.full.metrics, "ss", 4);
    const double ablated = eval::find_metric(r.metrics, "ss", 4);
    return Outcome{full > ablated, fmt("SS@4 full %.4f > no-ddi %.4f", full, ablated)};
  });

  report("ablation-counterfactual", [&] {
    auto c = p.base;
    c.delta = 0.0;
    const auto r = pipeline::run_training_pipeline(paths, c, work / "delta0");
    return Outcome{p.full.best_validation_ndcg >= r.best_validation_ndcg,
                   fmt("val NDCG@6 delta=1 %.4f >= delta=0 %.4f", p.full.best_validation_ndcg, r.best_validation_ndcg)};
  });

  report("reproducibility", [&] {
    pipeline::rerun_from_manifest(work / "full" / "run_manifest.json", work / "rerun");
    const auto a = pipeline::file_hash(work / "full" / "metrics.csv");
    const auto b = pipeline::file_hash(work / "rerun" / "metrics.csv");
    return Outcome{a == b, "metrics.csv fnv1a " + a + (a == b ? " == " : " != ") + b};
  });

  std::printf("%s: %d failing\n", g_failures ? "FAIL" : "PASS", g_failures);
  return g_failures ? 1 : 0;
}
