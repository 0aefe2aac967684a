#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dssddi/numkit/tensor.hpp"

namespace dssddi {

using DrugId = std::size_t;

inline constexpr int kSynergy = 1;
inline constexpr int kNoInteraction = 0;
inline constexpr int kAntagonism = -1;

struct Drug {
  DrugId id = 0;
  std::string name;
  std::vector<double> feature;
};

/// Undirected signed edge, stored with u < v.
struct DdiEdge {
  DrugId u = 0;
  DrugId v = 0;
  int sign = 0;

  friend bool operator==(const DdiEdge&, const DdiEdge&) = default;
};

/// Drugs and their signed interactions. Immutable once built; every
/// constructor path validates ids, self-loops and duplicate pairs.
class DdiGraph {
 public:
  DdiGraph() = default;
  /// Throws IngestionError on an invalid drug list or edge.
  DdiGraph(std::vector<Drug> drugs, std::vector<DdiEdge> edges);

  std::size_t num_drugs() const { return drugs_.size(); }
  std::size_t feature_dim() const { return drugs_.empty() ? 0 : drugs_.front().feature.size(); }
  const std::vector<Drug>& drugs() const { return drugs_; }
  const Drug& drug(DrugId id) const { return drugs_.at(id); }
  const std::vector<DdiEdge>& edges() const { return edges_; }

  std::optional<int> sign(DrugId u, DrugId v) const;
  bool adjacent(DrugId u, DrugId v) const { return sign(u, v).has_value(); }

  /// Neighbors through an edge of any sign, ascending.
  const std::vector<DrugId>& neighbors(DrugId v) const { return adj_all_.at(v); }
  /// Neighbors through edges with exactly `sign`, ascending.
  const std::vector<DrugId>& neighbors(DrugId v, int sign) const;
  std::size_t count(int sign) const;

  /// Copy with `extra` edges added.
  DdiGraph with_edges(std::span<const DdiEdge> extra) const;
  /// Copy keeping only the +1/-1 edges.
  DdiGraph signed_only() const;

  numkit::Tensor feature_matrix() const;

 private:
  static std::uint64_t key(DrugId u, DrugId v);

  std::vector<Drug> drugs_;
  std::vector<DdiEdge> edges_;
  std::vector<std::vector<DrugId>> adj_all_;
  std::vector<std::vector<DrugId>> adj_by_sign_[3];
  std::unordered_map<std::uint64_t, int> pair_sign_;
};

/// Reads `drugs.csv` (id,name,f0..) and `ddi_edges.csv` (u,v,sign).
/// Errors name the offending file and line.
DdiGraph load_ddi_graph(const std::filesystem::path& drug_file,
                        const std::filesystem::path& edge_file);
void save_ddi_graph(const DdiGraph& graph, const std::filesystem::path& drug_file,
                    const std::filesystem::path& edge_file);

/// Uniformly samples `count` unordered pairs with no edge and returns them
/// as sign-0 edges sorted by (u, v). Throws SamplingError if fewer than
/// `count` free pairs exist.
std::vector<DdiEdge> sample_zero_edges(const DdiGraph& graph, std::size_t count,
                                       std::uint64_t seed);

enum class Split { kTrain, kValidation, kTest, kExcluded };
std::string to_string(Split s);

struct SplitRatio {
  double train = 5;
  double validation = 3;
  double test = 2;
};

struct CohortOptions {
  SplitRatio ratio;
  std::uint64_t seed = 0;
  /// Fill missing feature cells with the training-split column mean. When
  /// false a missing cell is an ingestion error.
  bool impute_missing = true;
};

/// Per-feature standardization fitted on the training split.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 1/std, or 0 for a constant column
  std::vector<double> fill;   // imputation value for missing cells

  numkit::Tensor apply(const numkit::Tensor& raw) const;
  std::vector<double> apply_row(std::span<const double> raw) const;
};

struct Cohort {
  std::vector<long long> patient_ids;
  std::vector<std::string> feature_names;
  numkit::Tensor raw_features;  // n x d1, NaN marks a missing cell
  numkit::Tensor features;      // standardized and imputed
  numkit::Tensor medications;   // n x |V|, entries 0/1
  std::vector<Split> split;
  Standardizer standardizer;
  std::vector<bool> imputed_columns;
  std::vector<std::string> warnings;

  std::size_t num_patients() const { return patient_ids.size(); }
  std::size_t num_drugs() const { return medications.cols(); }
  std::size_t feature_dim() const { return features.cols(); }
  std::vector<std::size_t> indices(Split s) const;
  std::vector<DrugId> drugs_of(std::size_t patient) const;
};

/// Splits, standardizes and validates an in-memory cohort. Training patients
/// without prescriptions are marked kExcluded with a warning.
Cohort build_cohort(std::vector<long long> patient_ids, std::vector<std::string> feature_names,
                    numkit::Tensor raw_features, numkit::Tensor medications,
                    const CohortOptions& options);

/// Reads `patients.csv` (id,x0..) and `prescriptions.csv`
/// (patient_id,drug_id); drug ids are checked against `catalog`.
Cohort load_cohort(const std::filesystem::path& patient_file,
                   const std::filesystem::path& prescription_file, const DdiGraph& catalog,
                   const CohortOptions& options);
void save_cohort(const Cohort& cohort, const std::filesystem::path& patient_file,
                 const std::filesystem::path& prescription_file);

}  // namespace dssddi
