#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dssddi/ddigraph.hpp"
#include "dssddi/numkit/tensor.hpp"

namespace dssddi::synth {

/// Planted-structure cohort. Patients fall in `groups` feature clusters, each
/// group owns a contiguous block of `drugs_per_group` drugs. Inside a group
/// the drug block splits into `subtypes` parts chosen by a personal signal on
/// feature 0, so a good model has to look past the group centroid.
struct SynthConfig {
  std::size_t groups = 5;
  std::size_t patients_per_group = 40;
  std::size_t drugs_per_group = 8;
  std::size_t num_drugs = 40;
  std::size_t patient_dim = 16;
  std::size_t drug_dim = 16;
  double noise = 0.1;
  double synergy_density = 0.8;        // within one subtype's drug block
  double cross_synergy_density = 0.0;    // between subtype blocks of a group
  double cross_antagonism_density = 0.5; // alternatives that should not be mixed
  double antagonism_density = 0.1;  // across blocks
  std::size_t subtypes = 2;         // 1 turns the personal signal off
  double subtype_scale = 1.0;
  // A subtype block is `core_drugs` routinely adopted drugs plus rare
  // satellites that synergize with them. Satellites are exactly as rare as the
  // other blocks' drugs, so only the DDI graph tells the two apart.
  std::size_t core_drugs = 3;
  double adoption_prob = 0.9;     // core drugs of the own block
  double satellite_prob = 0.05;   // remaining drugs of the own block
  double off_subtype_prob = 0.05; // other blocks of the group
  double drug_noise = 0.5;
  std::uint64_t seed = 7;

  /// Throws ConfigError on non-positive counts, densities outside [0,1] or
  /// groups * drugs_per_group > num_drugs.
  void validate() const;
};

struct SynthData {
  DdiGraph graph;
  std::vector<long long> patient_ids;
  std::vector<std::string> feature_names;
  numkit::Tensor raw_features;  // n x patient_dim
  numkit::Tensor medications;   // n x num_drugs
  std::vector<std::size_t> group;    // planted label per patient
  std::vector<std::size_t> subtype;  // planted subtype per patient
  std::vector<std::size_t> drug_group;  // groups for unassigned drugs
};

SynthData generate_synthetic_cohort(const SynthConfig& config);

/// drugs.csv, ddi_edges.csv, patients.csv, prescriptions.csv and groups.csv
/// (patient_id,group,subtype) under `dir`.
void write_synthetic(const SynthData& data, const std::filesystem::path& dir);

/// Adjusted Rand index between two labelings of the same items.
double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

}  // namespace dssddi::synth
