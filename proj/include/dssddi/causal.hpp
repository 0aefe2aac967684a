#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dssddi/ddigraph.hpp"
#include "dssddi/numkit/tensor.hpp"

namespace dssddi::causal {

using numkit::Tensor;

struct ClusterAssignment {
  std::vector<std::size_t> cluster;       // one id per row of X
  Tensor centroids;                       // K x d
  std::vector<double> objective_history;  // within-cluster SS after each Lloyd update
  std::size_t iterations = 0;

  std::size_t k() const { return centroids.rows(); }
  /// Index of the closest centroid (lowest index on ties).
  std::size_t nearest(std::span<const double> x) const;
};

/// Sum of squared distances of each row to its assigned centroid.
double within_cluster_ss(const Tensor& x, const ClusterAssignment& a);

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or `max_iterations` is reached. Runs `restarts` seeded attempts
/// and keeps the lowest objective. An emptied cluster is re-seeded at the
/// point farthest from its centroid.
ClusterAssignment kmeans_cluster(const Tensor& x, std::size_t k, std::uint64_t seed,
                                 std::size_t restarts = 10, std::size_t max_iterations = 300);

/// Observed links: medication rows of training patients, zero elsewhere.
Tensor observed_links(const Cohort& cohort);

/// Three-step treatment construction for every cluster: union of observed
/// links of the cluster's members, then synergy expansion. K x |V|.
Tensor cluster_treatments(const Tensor& observed, std::span<const std::size_t> cluster,
                          std::size_t k, const DdiGraph& graph);

/// T (n x |V|). Step 1 copies observed links, step 2 shares them within a
/// cluster, step 3 adds every synergy partner of a treated drug. One pass each.
Tensor build_treatment_matrix(const Tensor& observed, std::span<const std::size_t> cluster,
                              const DdiGraph& graph);

struct CfConfig {
  double gamma_patient = 0.0;
  double gamma_drug = 0.0;
  std::size_t clusters = 1;
  std::uint64_t seed = 0;
};

/// Linear-interpolated percentile (0..100) of distances over distinct row
/// pairs. Falls back to the smallest positive distance when the percentile
/// is zero.
double distance_percentile(const Tensor& x, double percentile);

struct Link {
  std::size_t patient;
  DrugId drug;
  bool operator==(const Link&) const = default;
};

/// Nearest pair (j, u) with T_ju = 1 - T_iv, |x_i - x_j| < gamma_patient and
/// |z_v - z_u| < gamma_drug, minimizing the summed distance; ties go to the
/// smallest (j, u). Candidates j are restricted to `candidate_patients` when
/// given, otherwise all rows of X.
std::optional<Link> find_counterfactual_link(std::size_t i, DrugId v, const Tensor& t,
                                             const Tensor& x, const Tensor& z,
                                             const CfConfig& config,
                                             std::span<const std::size_t> candidate_patients = {});

/// Batch form of find_counterfactual_link with precomputed distances.
/// Results are indexed like `queries` regardless of `threads`.
class CounterfactualSearch {
 public:
  CounterfactualSearch(const Tensor& t, const Tensor& x, const Tensor& z, const CfConfig& config,
                       std::span<const std::size_t> candidate_patients = {});

  std::optional<Link> find(std::size_t i, DrugId v) const;
  std::vector<std::optional<Link>> find_all(std::span<const Link> queries,
                                            std::size_t threads = 1) const;

 private:
  struct Neighbor {
    std::size_t id;
    double distance;
  };
  const Tensor& t_;
  std::vector<std::vector<Neighbor>> patient_nbrs_;  // candidates within gamma, ascending id
  std::vector<std::vector<Neighbor>> drug_nbrs_;
};

struct Match {
  Link query;
  std::optional<Link> counterfactual;
};

struct CounterfactualOutcomes {
  Tensor t_cf;
  Tensor y_cf;
};

/// Matched entries get T_CF = 1 - T_iv and Y_CF = y_ju; others copy T and Y.
CounterfactualOutcomes build_counterfactual_outcomes(const Tensor& t, const Tensor& y,
                                                     std::span<const Match> matches);

/// Everything MDGCN training needs from this module.
struct TreatmentState {
  ClusterAssignment clusters;
  Tensor cluster_treatment;  // K x |V|
  Tensor t;
  Tensor y;                  // observed links
  CfConfig config;           // with resolved gammas
  std::vector<Match> matches;
  CounterfactualOutcomes cf;
};

/// Clusters all patients, builds T, and matches every (training patient,
/// drug) pair. Gammas <= 0 in `config` are replaced by the 10th percentile
/// of training-patient (resp. drug) distances.
TreatmentState prepare_treatments(const Cohort& cohort, const Tensor& z, const DdiGraph& graph,
                                  CfConfig config, std::size_t threads = 1);

inline constexpr double kDefaultGammaPercentile = 10.0;

/// Nonzero entries as `row,col,value` lines.
void save_triplets(const std::filesystem::path& path, const Tensor& m);
Tensor load_triplets(const std::filesystem::path& path, std::size_t rows, std::size_t cols);

}  // namespace dssddi::causal
