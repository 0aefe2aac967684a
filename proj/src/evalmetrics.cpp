#include "dssddi/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "dssddi/csv.hpp"
#include "dssddi/errors.hpp"

namespace dssddi::eval {

namespace {

void validate(std::span<const RankedSuggestion> batch) {
  if (batch.empty()) throw ArgumentError("metric over an empty batch");
  const std::size_t k = batch.front().suggested.size();
  for (const auto& r : batch) {
    if (r.suggested.empty()) throw ArgumentError("suggestion list for patient " + std::to_string(r.patient_id) + " is empty");
    if (r.suggested.size() != k) throw ArgumentError("suggestion lists differ in length");
    std::unordered_set<DrugId> seen(r.suggested.begin(), r.suggested.end());
    if (seen.size() != r.suggested.size())
      throw ArgumentError("suggestion list for patient " + std::to_string(r.patient_id) + " repeats a drug");
  }
}

bool contains(const std::vector<DrugId>& set, DrugId d) {
  return std::find(set.begin(), set.end(), d) != set.end();
}

std::size_t hits(const RankedSuggestion& r) {
  std::size_t h = 0;
  for (DrugId d : r.suggested) h += contains(r.truth, d);
  return h;
}

std::vector<const RankedSuggestion*> with_truth(std::span<const RankedSuggestion> batch,
                                                std::vector<std::string>* warnings) {
  std::vector<const RankedSuggestion*> out;
  for (const auto& r : batch) {
    if (r.truth.empty()) {
      if (warnings) warnings->push_back("patient " + std::to_string(r.patient_id) + " has no ground-truth drugs; excluded");
      continue;
    }
    out.push_back(&r);
  }
  if (out.empty()) throw ArgumentError("no patient in the batch has ground-truth drugs");
  return out;
}

}  // namespace

double precision_at_k(std::span<const RankedSuggestion> batch) {
  validate(batch);
  std::size_t h = 0, total = 0;
  for (const auto& r : batch) {
    h += hits(r);
    total += r.suggested.size();
  }
  return static_cast<double>(h) / static_cast<double>(total);
}

double recall_at_k(std::span<const RankedSuggestion> batch, std::vector<std::string>* warnings) {
  validate(batch);
  std::size_t h = 0, total = 0;
  for (const RankedSuggestion* r : with_truth(batch, warnings)) {
    h += hits(*r);
    total += r->truth.size();
  }
  return static_cast<double>(h) / static_cast<double>(total);
}

double ndcg_at_k(std::span<const RankedSuggestion> batch, std::vector<std::string>* warnings) {
  validate(batch);
  const auto included = with_truth(batch, warnings);
  double sum = 0.0;
  for (const RankedSuggestion* r : included) {
    double dcg = 0.0, idcg = 0.0;
    const std::size_t k = r->suggested.size();
    for (std::size_t s = 0; s < k; ++s)
      if (contains(r->truth, r->suggested[s])) dcg += 1.0 / std::log2(static_cast<double>(s) + 2.0);
    for (std::size_t s = 0; s < std::min(k, r->truth.size()); ++s)
      idcg += 1.0 / std::log2(static_cast<double>(s) + 2.0);
    sum += dcg / idcg;
  }
  return sum / static_cast<double>(included.size());
}

std::vector<RankedSuggestion> truncate(std::span<const RankedSuggestion> batch, std::size_t k) {
  std::vector<RankedSuggestion> out(batch.begin(), batch.end());
  for (auto& r : out) {
    if (r.suggested.size() < k) throw ArgumentError("ranking shorter than k=" + std::to_string(k));
    r.suggested.resize(k);
  }
  return out;
}

std::vector<MetricRow> ranking_metrics(std::span<const RankedSuggestion> full_rankings,
                                       std::span<const std::size_t> ks) {
  std::vector<MetricRow> rows;
  for (std::size_t k : ks) {
    const auto b = truncate(full_rankings, k);
    rows.push_back({"precision", k, precision_at_k(b)});
    rows.push_back({"recall", k, recall_at_k(b)});
    rows.push_back({"ndcg", k, ndcg_at_k(b)});
  }
  return rows;
}

double find_metric(std::span<const MetricRow> rows, const std::string& metric, std::size_t k) {
  for (const auto& r : rows)
    if (r.metric == metric && r.k == k) return r.value;
  throw ArgumentError("no " + metric + "@" + std::to_string(k) + " in the report");
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRow> rows) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "metric,k,value\n";
  for (const auto& r : rows) out << csv_escape(r.metric) << ',' << r.k << ',' << format_double(r.value) << '\n';
}

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"metric", "k", "value"})
    throw FormatError(path.string() + ": expected header metric,k,value");
  std::vector<MetricRow> rows;
  for (const auto& row : t.rows) {
    long long k = 0;
    double v = 0;
    if (row.cells.size() != 3 || !parse_long(row.cells[1], k) || k < 0 || !parse_double(row.cells[2], v))
      throw FormatError(path.string() + " line " + std::to_string(row.line) + ": bad metric row");
    rows.push_back({row.cells[0], static_cast<std::size_t>(k), v});
  }
  return rows;
}

}  // namespace dssddi::eval
