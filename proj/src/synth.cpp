#include "dssddi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "dssddi/csv.hpp"
#include "dssddi/errors.hpp"
#include "dssddi/rng.hpp"

namespace dssddi::synth {

void SynthConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(groups, "groups");
  positive(patients_per_group, "patients_per_group");
  positive(drugs_per_group, "drugs_per_group");
  positive(num_drugs, "num_drugs");
  positive(patient_dim, "patient_dim");
  positive(drug_dim, "drug_dim");
  positive(subtypes, "subtypes");
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  unit(synergy_density, "synergy_density");
  unit(cross_synergy_density, "cross_synergy_density");
  unit(cross_antagonism_density, "cross_antagonism_density");
  if (cross_synergy_density + cross_antagonism_density > 1.0)
    throw ConfigError("cross_synergy_density + cross_antagonism_density exceeds 1");
  unit(antagonism_density, "antagonism_density");
  unit(adoption_prob, "adoption_prob");
  unit(satellite_prob, "satellite_prob");
  unit(off_subtype_prob, "off_subtype_prob");
  if (!(noise >= 0.0) || !(drug_noise >= 0.0)) throw ConfigError("noise must be >= 0");
  if (groups * drugs_per_group > num_drugs)
    throw ConfigError("groups x drugs_per_group = " + std::to_string(groups * drugs_per_group) +
                      " exceeds the drug budget " + std::to_string(num_drugs));
  if (subtypes > drugs_per_group) throw ConfigError("more subtypes than drugs per group");
  positive(core_drugs, "core_drugs");
}

SynthData generate_synthetic_cohort(const SynthConfig& config) {
  config.validate();
  Rng rng(stage_seed(config.seed, "synth"));
  const std::size_t g_count = config.groups;
  const std::size_t d1 = config.patient_dim;
  const std::size_t d2 = config.drug_dim;
  const std::size_t n_drugs = config.num_drugs;
  const std::size_t per = config.drugs_per_group;
  const std::size_t unassigned = g_count;

  SynthData out;
  out.drug_group.assign(n_drugs, unassigned);
  for (std::size_t v = 0; v < g_count * per; ++v) out.drug_group[v] = v / per;

  // drug catalog: features around a per-group centre
  numkit::Tensor drug_centres(g_count + 1, d2);
  for (double& c : drug_centres.data()) c = normal(rng);
  std::vector<Drug> drugs;
  for (DrugId v = 0; v < n_drugs; ++v) {
    Drug d;
    d.id = v;
    std::size_t g = out.drug_group[v];
    d.name = g == unassigned ? "x" + std::to_string(v) : "g" + std::to_string(g) + "d" + std::to_string(v % per);
    d.feature.resize(d2);
    for (std::size_t f = 0; f < d2; ++f) d.feature[f] = drug_centres(g, f) + config.drug_noise * normal(rng);
    drugs.push_back(std::move(d));
  }
  const std::size_t block = per / config.subtypes;
  // last block absorbs the remainder
  auto block_of = [&](DrugId v) { return std::min((v % per) / block, config.subtypes - 1); };
  std::vector<DdiEdge> edges;
  for (DrugId u = 0; u < n_drugs; ++u)
    for (DrugId v = u + 1; v < n_drugs; ++v) {
      const bool same = out.drug_group[u] == out.drug_group[v] && out.drug_group[u] != unassigned;
      const double r = uniform01(rng);
      if (same) {
        if (block_of(u) == block_of(v)) {
          if (r < config.synergy_density) edges.push_back({u, v, kSynergy});
        } else if (r < config.cross_synergy_density) {
          edges.push_back({u, v, kSynergy});
        } else if (r < config.cross_synergy_density + config.cross_antagonism_density) {
          edges.push_back({u, v, kAntagonism});
        }
      } else if (r < config.antagonism_density) {
        edges.push_back({u, v, kAntagonism});
      }
    }
  out.graph = DdiGraph(std::move(drugs), std::move(edges));

  numkit::Tensor centres(g_count, d1);
  for (double& c : centres.data()) c = normal(rng);

  const std::size_t n = g_count * config.patients_per_group;
  out.raw_features = numkit::Tensor(n, d1);
  out.medications = numkit::Tensor(n, n_drugs);
  for (std::size_t g = 0, i = 0; g < g_count; ++g) {
    for (std::size_t p = 0; p < config.patients_per_group; ++p, ++i) {
      out.patient_ids.push_back(static_cast<long long>(i + 1));
      out.group.push_back(g);
      const double s = uniform(rng, -1.0, 1.0);
      std::size_t sub = 0;
      if (config.subtypes > 1)
        sub = std::min(config.subtypes - 1, static_cast<std::size_t>((s + 1.0) / 2.0 * config.subtypes));
      out.subtype.push_back(sub);
      for (std::size_t f = 0; f < d1; ++f) out.raw_features(i, f) = centres(g, f) + config.noise * normal(rng);
      if (config.subtypes > 1) out.raw_features(i, 0) += config.subtype_scale * s;

      bool any = false;
      for (std::size_t k = 0; k < per; ++k) {
        const std::size_t rank = k - std::min(k / block, config.subtypes - 1) * block;
        double prob = config.off_subtype_prob;
        if (block_of(g * per + k) == sub) prob = rank < config.core_drugs ? config.adoption_prob : config.satellite_prob;
        if (uniform01(rng) < prob) {
          out.medications(i, g * per + k) = 1.0;
          any = true;
        }
      }
      if (!any) out.medications(i, g * per + sub * block) = 1.0;
    }
  }
  for (std::size_t f = 0; f < d1; ++f) out.feature_names.push_back("x" + std::to_string(f));
  return out;
}

void write_synthetic(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_ddi_graph(data.graph, dir / "drugs.csv", dir / "ddi_edges.csv");
  std::ofstream p(dir / "patients.csv");
  std::ofstream rx(dir / "prescriptions.csv");
  std::ofstream gr(dir / "groups.csv");
  if (!p || !rx || !gr) throw IngestionError("cannot write synthetic cohort under " + dir.string());
  p << "id";
  for (const auto& name : data.feature_names) p << ',' << csv_escape(name);
  p << '\n';
  rx << "patient_id,drug_id\n";
  gr << "patient_id,group,subtype\n";
  for (std::size_t i = 0; i < data.patient_ids.size(); ++i) {
    p << data.patient_ids[i];
    for (double v : data.raw_features.row(i)) p << ',' << format_double(v);
    p << '\n';
    for (std::size_t v = 0; v < data.medications.cols(); ++v)
      if (data.medications(i, v) != 0.0) rx << data.patient_ids[i] << ',' << v << '\n';
    gr << data.patient_ids[i] << ',' << data.group[i] << ',' << data.subtype[i] << '\n';
  }
}

double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) throw ArgumentError("label vectors differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, c] : joint) index += c2(c);
  for (const auto& [_, c] : ra) sa += c2(c);
  for (const auto& [_, c] : rb) sb += c2(c);
  const double expected = sa * sb / c2(n);
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace dssddi::synth
