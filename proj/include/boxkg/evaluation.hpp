#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "boxkg/data.hpp"
#include "boxkg/model.hpp"

namespace boxkg::evaluation {

struct ConfidenceMetrics {
    double mse = 0.0;
    double mae = 0.0;
    std::size_t faults = 0;  // degenerate boxes, scored as 0
};

// Mean squared / absolute error of phi against ground-truth confidences;
// predictions are clamped to [0, 1] at this boundary.
ConfidenceMetrics confidence_metrics(const data::TripleList& triples,
                                     const model::ParameterStore& store);

enum class GainMode { Linear, Exponential };

// gains[i] is the relevance of the item ranked at position i + 1 (0 when the
// item is not a relevant tail). Linear gain g(s) = s, exponential g(s) =
// 2^s - 1; discount log2(position + 1). Throws config_error when no positive
// gain exists.
double ndcg(const std::vector<double>& ranked_gains, GainMode mode);

struct RankingQuery {
    std::uint32_t h = 0;
    std::uint32_t r = 0;
    std::map<std::uint32_t, double> relevance;  // tail id -> ground-truth confidence
};

struct PerQueryResult {
    RankingQuery query;
    double ndcg_linear = 0.0;
    double ndcg_exponential = 0.0;
};

struct RankingMetrics {
    double mean_linear = 0.0;
    double mean_exponential = 0.0;
    std::size_t queries = 0;
    std::size_t skipped = 0;  // all-zero-gain queries
    std::vector<PerQueryResult> per_query;
};

// Which splits provide the relevance gains for a query's (h, r).
inline constexpr unsigned kRelevanceVal = 2;
inline constexpr unsigned kRelevanceTest = 4;
inline constexpr unsigned kRelevanceAll = 7;

// Groups the query split's triples by (h, r), scores every entity in the
// vocabulary as a tail candidate, and averages both nDCG variants over the
// queries. Ties are broken by entity id ascending. `threads` caps the worker
// count; queries default to the test split.
RankingMetrics rank_queries(const data::Dataset& dataset, const model::ParameterStore& store,
                            unsigned relevance_splits = kRelevanceTest, std::size_t threads = 1,
                            const data::TripleList* query_split = nullptr);

struct VolumeReportRow {
    std::uint32_t entity = 0;
    double volume = 0.0;       // expected volume of the g_r-transformed box
    std::size_t coverage = 0;  // boxes from the coverage set contained at >= 0.9
};

// For each candidate entity, the expected volume of its g_r-transformed box
// and how many coverage-set boxes it contains (conditional probability >=
// 0.9). Returns the top_k and bottom_k rows by coverage.
std::vector<VolumeReportRow> volume_report(const model::ParameterStore& store, std::uint32_t r,
                                           const std::vector<std::uint32_t>& candidates,
                                           const std::vector<std::uint32_t>& coverage_set,
                                           std::size_t top_k);

}  // namespace boxkg::evaluation
