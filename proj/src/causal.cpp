#include "dssddi/causal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "dssddi/csv.hpp"
#include "dssddi/errors.hpp"
#include "dssddi/rng.hpp"

namespace dssddi::causal {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = a[c] - b[c];
    s += d * d;
  }
  return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

std::size_t nearest_centroid(const Tensor& centroids, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(centroids.row(c), x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Tensor plus_plus_seeds(const Tensor& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows(), d = x.cols();
  Tensor centroids(k, d);
  auto copy_row = [&](std::size_t c, std::size_t i) {
    std::copy(x.row(i).begin(), x.row(i).end(), centroids.row(c).begin());
  };
  copy_row(0, uniform_index(rng, n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n - 1;
    if (total <= 0.0) {
      pick = uniform_index(rng, n);
    } else {
      const double r = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > r) {
          pick = i;
          break;
        }
      }
    }
    copy_row(c, pick);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(x.row(i), centroids.row(c)));
  }
  return centroids;
}

void recompute_centroids(const Tensor& x, std::vector<std::size_t>& assign, Tensor& centroids) {
  const std::size_t k = centroids.rows(), d = x.cols();
  auto mean_of = [&](std::size_t c) {
    std::size_t count = 0;
    std::vector<double> sum(d, 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (assign[i] != c) continue;
      ++count;
      for (std::size_t f = 0; f < d; ++f) sum[f] += x(i, f);
    }
    if (count > 0)
      for (std::size_t f = 0; f < d; ++f) centroids(c, f) = sum[f] / static_cast<double>(count);
    return count;
  };
  std::vector<std::size_t> counts(k);
  for (std::size_t c = 0; c < k; ++c) counts[c] = mean_of(c);
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    std::size_t far = x.rows();
    double far_d = -1.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (counts[assign[i]] < 2) continue;
      const double dd = squared_distance(x.row(i), centroids.row(assign[i]));
      if (dd > far_d) {
        far_d = dd;
        far = i;
      }
    }
    if (far == x.rows()) break;  // fewer distinct donors than clusters
    const std::size_t donor = assign[far];
    assign[far] = c;
    counts[c] = 1;
    for (std::size_t f = 0; f < d; ++f) centroids(c, f) = x(far, f);
    counts[donor] = mean_of(donor);
  }
}

ClusterAssignment lloyd(const Tensor& x, std::size_t k, Rng& rng, std::size_t max_iterations) {
  ClusterAssignment a;
  a.centroids = plus_plus_seeds(x, k, rng);
  a.cluster.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) a.cluster[i] = nearest_centroid(a.centroids, x.row(i));
  while (a.iterations < max_iterations) {
    ++a.iterations;
    recompute_centroids(x, a.cluster, a.centroids);
    a.objective_history.push_back(within_cluster_ss(x, a));
    bool changed = false;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const std::size_t c = nearest_centroid(a.centroids, x.row(i));
      if (c != a.cluster[i] &&
          squared_distance(x.row(i), a.centroids.row(c)) <
              squared_distance(x.row(i), a.centroids.row(a.cluster[i]))) {
        a.cluster[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return a;
}

void require_binary_shape(const Tensor& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + " must be " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " + m.shape_string());
  }
}

void expand_synergy(Tensor& t, const DdiGraph& graph) {
  const Tensor step2 = t;
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (DrugId v = 0; v < t.cols(); ++v)
      if (step2(r, v) == 1.0)
        for (DrugId u : graph.neighbors(v, kSynergy)) t(r, u) = 1.0;
}

}  // namespace

std::size_t ClusterAssignment::nearest(std::span<const double> x) const {
  if (x.size() != centroids.cols()) throw ShapeError("feature width does not match centroids");
  return nearest_centroid(centroids, x);
}

double within_cluster_ss(const Tensor& x, const ClusterAssignment& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += squared_distance(x.row(i), a.centroids.row(a.cluster[i]));
  return s;
}

ClusterAssignment kmeans_cluster(const Tensor& x, std::size_t k, std::uint64_t seed,
                                 std::size_t restarts, std::size_t max_iterations) {
  if (k == 0) throw ArgumentError("k-means needs at least one cluster");
  if (k > x.rows()) {
    throw ArgumentError("k-means with " + std::to_string(k) + " clusters needs at least that many points, got " +
                        std::to_string(x.rows()));
  }
  ClusterAssignment best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Rng rng(mix_seed(seed + r));
    ClusterAssignment a = lloyd(x, k, rng, max_iterations);
    const double obj = within_cluster_ss(x, a);
    if (obj < best_obj) {
      best_obj = obj;
      best = std::move(a);
    }
  }
  return best;
}

Tensor observed_links(const Cohort& cohort) {
  Tensor y(cohort.num_patients(), cohort.num_drugs());
  for (std::size_t i : cohort.indices(Split::kTrain))
    for (DrugId v = 0; v < cohort.num_drugs(); ++v) y(i, v) = cohort.medications(i, v);
  return y;
}

Tensor cluster_treatments(const Tensor& observed, std::span<const std::size_t> cluster,
                          std::size_t k, const DdiGraph& graph) {
  if (cluster.size() != observed.rows()) throw ShapeError("one cluster id per patient expected");
  require_binary_shape(observed, observed.rows(), graph.num_drugs(), "observed links");
  Tensor c(k, graph.num_drugs());
  for (std::size_t i = 0; i < observed.rows(); ++i) {
    if (cluster[i] >= k) throw ArgumentError("cluster id out of range");
    for (DrugId v = 0; v < observed.cols(); ++v)
      if (observed(i, v) == 1.0) c(cluster[i], v) = 1.0;
  }
  expand_synergy(c, graph);
  return c;
}

Tensor build_treatment_matrix(const Tensor& observed, std::span<const std::size_t> cluster,
                              const DdiGraph& graph) {
  if (cluster.size() != observed.rows()) throw ShapeError("one cluster id per patient expected");
  require_binary_shape(observed, observed.rows(), graph.num_drugs(), "observed links");
  const std::size_t n = observed.rows();
  Tensor t = observed;
  for (std::size_t i = 0; i < n; ++i)
    for (DrugId v = 0; v < t.cols(); ++v)
      if (observed(i, v) == 1.0)
        for (std::size_t j = 0; j < n; ++j)
          if (cluster[j] == cluster[i]) t(j, v) = 1.0;
  expand_synergy(t, graph);
  return t;
}

double distance_percentile(const Tensor& x, double percentile) {
  if (percentile < 0.0 || percentile > 100.0) throw ArgumentError("percentile must be in [0, 100]");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i + 1; j < x.rows(); ++j) d.push_back(distance(x.row(i), x.row(j)));
  if (d.empty()) return 1.0;
  std::sort(d.begin(), d.end());
  const double pos = percentile / 100.0 * static_cast<double>(d.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, d.size() - 1);
  const double value = d[lo] + (pos - static_cast<double>(lo)) * (d[hi] - d[lo]);
  if (value > 0.0) return value;
  auto positive = std::upper_bound(d.begin(), d.end(), 0.0);
  return positive == d.end() ? 1.0 : *positive;
}

CounterfactualSearch::CounterfactualSearch(const Tensor& t, const Tensor& x, const Tensor& z,
                                           const CfConfig& config,
                                           std::span<const std::size_t> candidate_patients)
    : t_(t) {
  if (config.gamma_patient < 0.0 || config.gamma_drug < 0.0)
    throw ConfigError("counterfactual distance thresholds must be non-negative");
  if (x.rows() != t.rows()) throw ShapeError("one feature row per patient expected");
  if (z.rows() != t.cols()) throw ShapeError("one embedding row per drug expected");
  std::vector<std::size_t> candidates(candidate_patients.begin(), candidate_patients.end());
  if (candidates.empty()) {
    candidates.resize(x.rows());
    for (std::size_t j = 0; j < x.rows(); ++j) candidates[j] = j;
  }
  std::sort(candidates.begin(), candidates.end());
  for (std::size_t j : candidates)
    if (j >= x.rows()) throw ArgumentError("candidate patient out of range");

  patient_nbrs_.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j : candidates) {
      const double d = distance(x.row(i), x.row(j));
      if (d < config.gamma_patient) patient_nbrs_[i].push_back({j, d});
    }
  drug_nbrs_.resize(z.rows());
  for (std::size_t v = 0; v < z.rows(); ++v)
    for (std::size_t u = 0; u < z.rows(); ++u) {
      const double d = distance(z.row(v), z.row(u));
      if (d < config.gamma_drug) drug_nbrs_[v].push_back({u, d});
    }
}

std::optional<Link> CounterfactualSearch::find(std::size_t i, DrugId v) const {
  if (i >= t_.rows() || v >= t_.cols()) throw ArgumentError("query pair out of range");
  const double target = 1.0 - t_(i, v);
  std::optional<Link> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const Neighbor& pj : patient_nbrs_[i]) {
    if (pj.distance >= best_d) continue;
    for (const Neighbor& du : drug_nbrs_[v]) {
      if (t_(pj.id, du.id) != target) continue;
      const double d = pj.distance + du.distance;
      if (d < best_d) {
        best_d = d;
        best = Link{pj.id, du.id};
      }
    }
  }
  return best;
}

std::vector<std::optional<Link>> CounterfactualSearch::find_all(std::span<const Link> queries,
                                                                std::size_t threads) const {
  std::vector<std::optional<Link>> out(queries.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) out[q] = find(queries[q].patient, queries[q].drug);
  };
  threads = std::max<std::size_t>(1, std::min(threads, queries.size()));
  if (threads == 1) {
    run(0, queries.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (queries.size() + threads - 1) / threads;
  for (std::size_t b = 0; b < queries.size(); b += chunk)
    pool.emplace_back(run, b, std::min(b + chunk, queries.size()));
  for (auto& th : pool) th.join();
  return out;
}

std::optional<Link> find_counterfactual_link(std::size_t i, DrugId v, const Tensor& t,
                                             const Tensor& x, const Tensor& z,
                                             const CfConfig& config,
                                             std::span<const std::size_t> candidate_patients) {
  return CounterfactualSearch(t, x, z, config, candidate_patients).find(i, v);
}

CounterfactualOutcomes build_counterfactual_outcomes(const Tensor& t, const Tensor& y,
                                                     std::span<const Match> matches) {
  require_binary_shape(y, t.rows(), t.cols(), "outcome matrix");
  CounterfactualOutcomes out{t, y};
  for (const Match& m : matches) {
    if (!m.counterfactual) continue;
    const auto [i, v] = m.query;
    const auto [j, u] = *m.counterfactual;
    if (i >= t.rows() || j >= t.rows() || v >= t.cols() || u >= t.cols())
      throw ArgumentError("match refers to a pair outside the matrices");
    out.t_cf(i, v) = 1.0 - t(i, v);
    out.y_cf(i, v) = y(j, u);
  }
  return out;
}

TreatmentState prepare_treatments(const Cohort& cohort, const Tensor& z, const DdiGraph& graph,
                                  CfConfig config, std::size_t threads) {
  if (config.clusters == 0) throw ConfigError("cluster count must be at least 1");
  if (z.rows() != graph.num_drugs()) throw ShapeError("one DDI embedding row per drug expected");
  TreatmentState s;
  s.clusters = kmeans_cluster(cohort.features, config.clusters, stage_seed(config.seed, "kmeans"));
  s.y = observed_links(cohort);
  s.t = build_treatment_matrix(s.y, s.clusters.cluster, graph);
  s.cluster_treatment = cluster_treatments(s.y, s.clusters.cluster, config.clusters, graph);

  const std::vector<std::size_t> train = cohort.indices(Split::kTrain);
  if (config.gamma_patient <= 0.0) {
    Tensor xt(train.size(), cohort.feature_dim());
    for (std::size_t r = 0; r < train.size(); ++r)
      std::copy(cohort.features.row(train[r]).begin(), cohort.features.row(train[r]).end(),
                xt.row(r).begin());
    config.gamma_patient = distance_percentile(xt, kDefaultGammaPercentile);
  }
  if (config.gamma_drug <= 0.0) config.gamma_drug = distance_percentile(z, kDefaultGammaPercentile);
  s.config = config;

  std::vector<Link> queries;
  for (std::size_t i : train)
    for (DrugId v = 0; v < graph.num_drugs(); ++v) queries.push_back({i, v});
  const CounterfactualSearch search(s.t, cohort.features, z, config, train);
  const auto found = search.find_all(queries, threads);
  s.matches.reserve(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) s.matches.push_back({queries[q], found[q]});
  s.cf = build_counterfactual_outcomes(s.t, s.y, s.matches);
  return s;
}

void save_triplets(const std::filesystem::path& path, const Tensor& m) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "row,col,value\n";
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (m(r, c) != 0.0) out << r << ',' << c << ',' << format_double(m(r, c)) << '\n';
}

Tensor load_triplets(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
  const CsvTable table = read_csv(path);
  if (table.header != std::vector<std::string>{"row", "col", "value"})
    throw FormatError(path.string() + ": expected header row,col,value");
  Tensor m(rows, cols);
  for (const CsvRow& row : table.rows) {
    long long r = 0, c = 0;
    double v = 0;
    if (row.cells.size() != 3 || !parse_long(row.cells[0], r) || !parse_long(row.cells[1], c) ||
        !parse_double(row.cells[2], v) || r < 0 || c < 0 || static_cast<std::size_t>(r) >= rows ||
        static_cast<std::size_t>(c) >= cols) {
      throw FormatError(path.string() + " line " + std::to_string(row.line) + ": bad triplet");
    }
    m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = v;
  }
  return m;
}

}  // namespace dssddi::causal
