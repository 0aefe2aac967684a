#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dssddi/ddigraph.hpp"

namespace dssddi::eval {

struct RankedSuggestion {
  long long patient_id = 0;
  std::vector<DrugId> suggested;  // P(j), best first, no duplicates
  std::vector<DrugId> truth;      // Q(j)
};

/// Total hits over total suggested (micro average).
double precision_at_k(std::span<const RankedSuggestion> batch);

/// Total hits over total ground-truth size. Patients with an empty truth set
/// are skipped and reported in `warnings`.
double recall_at_k(std::span<const RankedSuggestion> batch,
                   std::vector<std::string>* warnings = nullptr);

/// Mean over patients of DCG@k / IDCG@k with binary relevance; the ideal
/// list holds min(|Q|, k) hits. Empty truth sets are skipped as in recall.
double ndcg_at_k(std::span<const RankedSuggestion> batch,
                 std::vector<std::string>* warnings = nullptr);

/// Copies of `batch` with every suggestion list cut to its first k entries.
std::vector<RankedSuggestion> truncate(std::span<const RankedSuggestion> batch, std::size_t k);

struct MetricRow {
  std::string metric;
  std::size_t k = 0;
  double value = 0.0;
};

/// precision, recall and ndcg rows for each k, from full-length rankings.
std::vector<MetricRow> ranking_metrics(std::span<const RankedSuggestion> full_rankings,
                                       std::span<const std::size_t> ks);

/// Value of (metric, k) in `rows`; throws ArgumentError when absent.
double find_metric(std::span<const MetricRow> rows, const std::string& metric, std::size_t k);

/// `metric,k,value` CSV.
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRow> rows);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);

}  // namespace dssddi::eval
