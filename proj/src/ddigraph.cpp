#include "dssddi/ddigraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "dssddi/csv.hpp"
#include "dssddi/errors.hpp"
#include "dssddi/rng.hpp"

namespace dssddi {

using numkit::Tensor;

std::uint64_t DdiGraph::key(DrugId u, DrugId v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v);
}

DdiGraph::DdiGraph(std::vector<Drug> drugs, std::vector<DdiEdge> edges)
    : drugs_(std::move(drugs)) {
  const std::size_t n = drugs_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (drugs_[i].id != i) {
      throw IngestionError("drug ids must be dense 0.." + std::to_string(n - 1) +
                           "; found id " + std::to_string(drugs_[i].id) + " at position " +
                           std::to_string(i));
    }
    if (drugs_[i].feature.size() != drugs_.front().feature.size()) {
      throw IngestionError("drug " + std::to_string(i) + " has feature dimension " +
                           std::to_string(drugs_[i].feature.size()) + ", expected " +
                           std::to_string(drugs_.front().feature.size()));
    }
  }
  adj_all_.assign(n, {});
  for (auto& a : adj_by_sign_) a.assign(n, {});
  edges_.reserve(edges.size());
  for (DdiEdge e : edges) {
    if (e.u >= n || e.v >= n) {
      throw IngestionError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                           ") references an unknown drug");
    }
    if (e.u == e.v) throw IngestionError("self-loop on drug " + std::to_string(e.u));
    if (e.sign < -1 || e.sign > 1) {
      throw IngestionError("edge sign " + std::to_string(e.sign) + " is not in {-1,0,1}");
    }
    if (e.u > e.v) std::swap(e.u, e.v);
    if (!pair_sign_.emplace(key(e.u, e.v), e.sign).second) {
      throw IngestionError("duplicate edge (" + std::to_string(e.u) + "," +
                           std::to_string(e.v) + ")");
    }
    edges_.push_back(e);
    adj_all_[e.u].push_back(e.v);
    adj_all_[e.v].push_back(e.u);
    adj_by_sign_[e.sign + 1][e.u].push_back(e.v);
    adj_by_sign_[e.sign + 1][e.v].push_back(e.u);
  }
  for (auto& a : adj_all_) std::sort(a.begin(), a.end());
  for (auto& by : adj_by_sign_)
    for (auto& a : by) std::sort(a.begin(), a.end());
}

std::optional<int> DdiGraph::sign(DrugId u, DrugId v) const {
  auto it = pair_sign_.find(key(u, v));
  if (it == pair_sign_.end()) return std::nullopt;
  return it->second;
}

const std::vector<DrugId>& DdiGraph::neighbors(DrugId v, int sign) const {
  if (sign < -1 || sign > 1) throw ArgumentError("sign must be -1, 0 or 1");
  return adj_by_sign_[sign + 1].at(v);
}

std::size_t DdiGraph::count(int sign) const {
  return static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [sign](const DdiEdge& e) { return e.sign == sign; }));
}

DdiGraph DdiGraph::with_edges(std::span<const DdiEdge> extra) const {
  std::vector<DdiEdge> all = edges_;
  all.insert(all.end(), extra.begin(), extra.end());
  return DdiGraph(drugs_, std::move(all));
}

DdiGraph DdiGraph::signed_only() const {
  std::vector<DdiEdge> kept;
  std::copy_if(edges_.begin(), edges_.end(), std::back_inserter(kept),
               [](const DdiEdge& e) { return e.sign != 0; });
  return DdiGraph(drugs_, std::move(kept));
}

Tensor DdiGraph::feature_matrix() const {
  Tensor z(num_drugs(), feature_dim());
  for (const Drug& d : drugs_) std::copy(d.feature.begin(), d.feature.end(), z.row(d.id).begin());
  return z;
}

namespace {

[[noreturn]] void row_error(const std::filesystem::path& file, std::size_t line,
                            const std::string& what) {
  throw IngestionError(file.filename().string() + " line " + std::to_string(line) + ": " + what);
}

long long need_int(const std::filesystem::path& file, const CsvRow& row, std::size_t col,
                   const char* field) {
  long long v = 0;
  if (col >= row.cells.size() || !parse_long(row.cells[col], v)) {
    row_error(file, row.line, std::string("invalid ") + field);
  }
  return v;
}

void expect_header(const std::filesystem::path& file, const std::vector<std::string>& got,
                   const std::vector<std::string>& prefix) {
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (i >= got.size() || got[i] != prefix[i]) {
      throw IngestionError(file.filename().string() + ": header must start with '" +
                           prefix[i] + "' in column " + std::to_string(i + 1));
    }
  }
}

}  // namespace

DdiGraph load_ddi_graph(const std::filesystem::path& drug_file,
                        const std::filesystem::path& edge_file) {
  const CsvTable dt = read_csv(drug_file);
  expect_header(drug_file, dt.header, {"id", "name"});
  const std::size_t dim = dt.header.size() - 2;
  std::map<long long, Drug> by_id;
  for (const auto& row : dt.rows) {
    if (row.cells.size() != dt.header.size()) {
      row_error(drug_file, row.line, "expected " + std::to_string(dt.header.size()) + " cells");
    }
    const long long id = need_int(drug_file, row, 0, "drug id");
    if (id < 0) row_error(drug_file, row.line, "negative drug id");
    Drug d;
    d.id = static_cast<DrugId>(id);
    d.name = row.cells[1];
    d.feature.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      if (!parse_double(row.cells[k + 2], d.feature[k]) || !std::isfinite(d.feature[k])) {
        row_error(drug_file, row.line, "invalid feature " + dt.header[k + 2]);
      }
    }
    if (!by_id.emplace(id, std::move(d)).second) {
      row_error(drug_file, row.line, "duplicate drug id " + std::to_string(id));
    }
  }
  std::vector<Drug> drugs;
  for (auto& [id, d] : by_id) {
    if (static_cast<std::size_t>(id) != drugs.size()) {
      throw IngestionError(drug_file.filename().string() + ": drug ids must be dense; missing id " +
                           std::to_string(drugs.size()));
    }
    drugs.push_back(std::move(d));
  }

  const CsvTable et = read_csv(edge_file);
  expect_header(edge_file, et.header, {"u", "v", "sign"});
  std::vector<DdiEdge> edges;
  std::map<std::pair<DrugId, DrugId>, int> seen;
  for (const auto& row : et.rows) {
    const long long u = need_int(edge_file, row, 0, "u");
    const long long v = need_int(edge_file, row, 1, "v");
    const long long s = need_int(edge_file, row, 2, "sign");
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= drugs.size() ||
        static_cast<std::size_t>(v) >= drugs.size()) {
      row_error(edge_file, row.line, "unknown drug id in (" + std::to_string(u) + "," +
                                         std::to_string(v) + ")");
    }
    if (u == v) row_error(edge_file, row.line, "self-loop on drug " + std::to_string(u));
    if (s != 1 && s != -1) row_error(edge_file, row.line, "sign must be 1 or -1");
    const std::pair<DrugId, DrugId> pair{static_cast<DrugId>(std::min(u, v)),
                                         static_cast<DrugId>(std::max(u, v))};
    auto [it, fresh] = seen.emplace(pair, static_cast<int>(s));
    if (!fresh) {
      if (it->second != s) {
        row_error(edge_file, row.line, "conflicting duplicate sign for pair (" +
                                           std::to_string(pair.first) + "," +
                                           std::to_string(pair.second) + ")");
      }
      row_error(edge_file, row.line, "duplicate pair (" + std::to_string(pair.first) + "," +
                                         std::to_string(pair.second) + ")");
    }
    edges.push_back({pair.first, pair.second, static_cast<int>(s)});
  }
  return DdiGraph(std::move(drugs), std::move(edges));
}

void save_ddi_graph(const DdiGraph& graph, const std::filesystem::path& drug_file,
                    const std::filesystem::path& edge_file) {
  std::ofstream d(drug_file);
  if (!d) throw IngestionError("cannot write " + drug_file.string());
  d << "id,name";
  for (std::size_t k = 0; k < graph.feature_dim(); ++k) d << ",f" << k;
  d << '\n';
  for (const Drug& drug : graph.drugs()) {
    d << drug.id << ',' << csv_escape(drug.name);
    for (double f : drug.feature) d << ',' << format_double(f);
    d << '\n';
  }
  std::ofstream e(edge_file);
  if (!e) throw IngestionError("cannot write " + edge_file.string());
  e << "u,v,sign\n";
  for (const DdiEdge& edge : graph.edges()) {
    if (edge.sign == 0) continue;
    e << edge.u << ',' << edge.v << ',' << edge.sign << '\n';
  }
}

std::vector<DdiEdge> sample_zero_edges(const DdiGraph& graph, std::size_t count,
                                       std::uint64_t seed) {
  std::vector<DdiEdge> free;
  const std::size_t n = graph.num_drugs();
  for (DrugId u = 0; u < n; ++u)
    for (DrugId v = u + 1; v < n; ++v)
      if (!graph.adjacent(u, v)) free.push_back({u, v, 0});
  if (count > free.size()) {
    throw SamplingError("requested " + std::to_string(count) + " zero edges but only " +
                        std::to_string(free.size()) + " non-adjacent pairs exist");
  }
  Rng rng(seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + uniform_index(rng, free.size() - i);
    std::swap(free[i], free[j]);
  }
  free.resize(count);
  std::sort(free.begin(), free.end(),
            [](const DdiEdge& a, const DdiEdge& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
  return free;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
    case Split::kExcluded:
      return "excluded";
  }
  return "unknown";
}

Tensor Standardizer::apply(const Tensor& raw) const {
  Tensor out(raw.rows(), raw.cols());
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    auto row = apply_row(raw.row(r));
    std::copy(row.begin(), row.end(), out.row(r).begin());
  }
  return out;
}

std::vector<double> Standardizer::apply_row(std::span<const double> raw) const {
  if (raw.size() != mean.size()) {
    throw ShapeError("expected " + std::to_string(mean.size()) + " patient features, got " +
                     std::to_string(raw.size()));
  }
  std::vector<double> out(raw.size());
  for (std::size_t c = 0; c < raw.size(); ++c) {
    const double v = std::isnan(raw[c]) ? fill[c] : raw[c];
    out[c] = (v - mean[c]) * scale[c];
  }
  return out;
}

std::vector<std::size_t> Cohort::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

std::vector<DrugId> Cohort::drugs_of(std::size_t patient) const {
  std::vector<DrugId> out;
  for (std::size_t v = 0; v < medications.cols(); ++v)
    if (medications(patient, v) != 0.0) out.push_back(v);
  return out;
}

Cohort build_cohort(std::vector<long long> patient_ids, std::vector<std::string> feature_names,
                    Tensor raw_features, Tensor medications, const CohortOptions& options) {
  const std::size_t n = patient_ids.size();
  if (raw_features.rows() != n || medications.rows() != n) {
    throw ShapeError("cohort tables disagree on the number of patients");
  }
  const auto& r = options.ratio;
  if (!(r.train > 0) || r.validation < 0 || r.test < 0) {
    throw ArgumentError("split ratio needs a positive training share");
  }
  Cohort c;
  c.patient_ids = std::move(patient_ids);
  c.feature_names = std::move(feature_names);
  c.raw_features = std::move(raw_features);
  c.medications = std::move(medications);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(options.seed);
  shuffle(order.begin(), order.end(), rng);
  const double total = r.train + r.validation + r.test;
  std::size_t n_train = static_cast<std::size_t>(std::llround(n * r.train / total));
  std::size_t n_val = static_cast<std::size_t>(std::llround(n * r.validation / total));
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);
  c.split.assign(n, Split::kTest);
  for (std::size_t k = 0; k < n; ++k) {
    c.split[order[k]] = k < n_train ? Split::kTrain
                        : k < n_train + n_val ? Split::kValidation
                                              : Split::kTest;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (c.split[i] != Split::kTrain) continue;
    double taken = 0;
    for (std::size_t v = 0; v < c.medications.cols(); ++v) taken += c.medications(i, v);
    if (taken == 0) {
      c.split[i] = Split::kExcluded;
      c.warnings.push_back("training patient " + std::to_string(c.patient_ids[i]) +
                           " has no prescriptions; excluded");
    }
  }
  const auto train = c.indices(Split::kTrain);
  if (train.empty()) throw IngestionError("no usable training patients");

  const std::size_t d = c.raw_features.cols();
  Standardizer& st = c.standardizer;
  st.mean.assign(d, 0.0);
  st.scale.assign(d, 0.0);
  st.fill.assign(d, 0.0);
  c.imputed_columns.assign(d, false);
  for (std::size_t col = 0; col < d; ++col) {
    double sum = 0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = c.raw_features(i, col);
      if (std::isnan(v)) {
        if (!options.impute_missing) {
          throw IngestionError("patient " + std::to_string(c.patient_ids[i]) +
                               " is missing feature " + c.feature_names[col] +
                               " and imputation is disabled");
        }
        c.imputed_columns[col] = true;
        continue;
      }
      if (c.split[i] == Split::kTrain) {
        sum += v;
        ++cnt;
      }
    }
    const double mu = cnt ? sum / static_cast<double>(cnt) : 0.0;
    double ss = 0;
    for (std::size_t i : train) {
      const double v = c.raw_features(i, col);
      const double x = std::isnan(v) ? mu : v;
      ss += (x - mu) * (x - mu);
    }
    const double var = ss / static_cast<double>(train.size());
    st.fill[col] = mu;
    st.mean[col] = mu;
    // Variance floor: constant columns standardize to zero.
    st.scale[col] = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
  }
  for (std::size_t col = 0; col < d; ++col) {
    if (c.imputed_columns[col]) {
      c.warnings.push_back("feature " + c.feature_names[col] +
                           " has missing cells; imputed with the training mean");
    }
  }
  c.features = st.apply(c.raw_features);
  return c;
}

Cohort load_cohort(const std::filesystem::path& patient_file,
                   const std::filesystem::path& prescription_file, const DdiGraph& catalog,
                   const CohortOptions& options) {
  const CsvTable pt = read_csv(patient_file);
  expect_header(patient_file, pt.header, {"id"});
  const std::size_t d = pt.header.size() - 1;
  std::vector<std::string> names(pt.header.begin() + 1, pt.header.end());
  std::vector<long long> ids;
  std::map<long long, std::size_t> row_of;
  std::vector<double> raw;
  raw.reserve(pt.rows.size() * d);
  for (const auto& row : pt.rows) {
    if (row.cells.size() != pt.header.size()) {
      row_error(patient_file, row.line, "expected " + std::to_string(pt.header.size()) + " cells");
    }
    const long long id = need_int(patient_file, row, 0, "patient id");
    if (!row_of.emplace(id, ids.size()).second) {
      row_error(patient_file, row.line, "duplicate patient id " + std::to_string(id));
    }
    ids.push_back(id);
    for (std::size_t k = 0; k < d; ++k) {
      const std::string& cell = row.cells[k + 1];
      double v = std::numeric_limits<double>::quiet_NaN();
      if (!cell.empty() && cell != "NA" && cell != "NaN") {
        if (!parse_double(cell, v) || !std::isfinite(v)) {
          row_error(patient_file, row.line, "non-numeric feature " + names[k]);
        }
      } else if (!options.impute_missing) {
        row_error(patient_file, row.line,
                  "missing feature " + names[k] + " and imputation is disabled");
      }
      raw.push_back(v);
    }
  }
  Tensor y(ids.size(), catalog.num_drugs());
  const CsvTable rx = read_csv(prescription_file);
  expect_header(prescription_file, rx.header, {"patient_id", "drug_id"});
  for (const auto& row : rx.rows) {
    const long long pid = need_int(prescription_file, row, 0, "patient_id");
    const long long did = need_int(prescription_file, row, 1, "drug_id");
    auto it = row_of.find(pid);
    if (it == row_of.end()) {
      row_error(prescription_file, row.line, "unknown patient id " + std::to_string(pid));
    }
    if (did < 0 || static_cast<std::size_t>(did) >= catalog.num_drugs()) {
      row_error(prescription_file, row.line, "unknown drug id " + std::to_string(did));
    }
    y(it->second, static_cast<std::size_t>(did)) = 1.0;
  }
  return build_cohort(std::move(ids), std::move(names), Tensor(row_of.size(), d, std::move(raw)),
                      std::move(y), options);
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& patient_file,
                 const std::filesystem::path& prescription_file) {
  std::ofstream p(patient_file);
  if (!p) throw IngestionError("cannot write " + patient_file.string());
  p << "id";
  for (const auto& name : cohort.feature_names) p << ',' << csv_escape(name);
  p << '\n';
  for (std::size_t i = 0; i < cohort.num_patients(); ++i) {
    p << cohort.patient_ids[i];
    for (double v : cohort.raw_features.row(i)) p << ',' << (std::isnan(v) ? "" : format_double(v));
    p << '\n';
  }
  std::ofstream rx(prescription_file);
  if (!rx) throw IngestionError("cannot write " + prescription_file.string());
  rx << "patient_id,drug_id\n";
  for (std::size_t i = 0; i < cohort.num_patients(); ++i)
    for (DrugId v : cohort.drugs_of(i)) rx << cohort.patient_ids[i] << ',' << v << '\n';
}

}  // namespace dssddi
