#include "boxkg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "boxkg/errors.hpp"

namespace boxkg::evaluation {

ConfidenceMetrics confidence_metrics(const data::TripleList& triples,
                                     const model::ParameterStore& store) {
    if (triples.empty()) throw config_error("confidence_metrics: empty triple list");
    ConfidenceMetrics out;
    double sq = 0.0, ab = 0.0;
    for (const data::WeightedTriple& triple : triples) {
        double phi = 0.0;
        try {
            phi = model::score_triple(store, triple.h, triple.r, triple.t);
        } catch (const degenerate_box_error&) {
            ++out.faults;
        }
        phi = std::clamp(phi, 0.0, 1.0);
        const double resid = phi - triple.s;
        sq += resid * resid;
        ab += std::abs(resid);
    }
    out.mse = sq / static_cast<double>(triples.size());
    out.mae = ab / static_cast<double>(triples.size());
    return out;
}

namespace {

double gain_of(double s, GainMode mode) {
    return mode == GainMode::Linear ? s : std::exp2(s) - 1.0;
}

}  // namespace

double ndcg(const std::vector<double>& ranked_gains, GainMode mode) {
    double dcg = 0.0;
    std::vector<double> relevant;
    for (std::size_t i = 0; i < ranked_gains.size(); ++i) {
        if (ranked_gains[i] > 0.0) {
            dcg += gain_of(ranked_gains[i], mode) / std::log2(static_cast<double>(i) + 2.0);
            relevant.push_back(ranked_gains[i]);
        }
    }
    std::sort(relevant.begin(), relevant.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < relevant.size(); ++i) {
        idcg += gain_of(relevant[i], mode) / std::log2(static_cast<double>(i) + 2.0);
    }
    // idcg can vanish with positive gains: exp2(s) - 1 underflows to 0 for
    // confidences around 1e-17 and below
    if (idcg <= 0.0) {
        throw config_error("ndcg: no positive gain; metric undefined");
    }
    return dcg / idcg;
}

RankingMetrics rank_queries(const data::Dataset& dataset, const model::ParameterStore& store,
                            unsigned relevance_splits, std::size_t threads,
                            const data::TripleList* query_split) {
    if (query_split == nullptr) query_split = &dataset.test();
    // collect distinct (h, r) queries in first-appearance order
    std::vector<RankingQuery> queries;
    {
        std::unordered_set<std::uint64_t> seen;
        for (const data::WeightedTriple& triple : *query_split) {
            const std::uint64_t key = data::triple_key(triple.h, triple.r, 0);
            if (!seen.insert(key).second) continue;
            RankingQuery q;
            q.h = triple.h;
            q.r = triple.r;
            for (const auto& [tail, s] : dataset.tails_for(triple.h, triple.r, relevance_splits)) {
                q.relevance.emplace(tail, s);
            }
            queries.push_back(std::move(q));
        }
    }

    const std::size_t n_entities = dataset.n_entities();
    struct Slot {
        double linear = 0.0;
        double exponential = 0.0;
        bool skipped = false;
    };
    std::vector<Slot> slots(queries.size());

    auto run_range = [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<double, std::uint32_t>> scored(n_entities);
        std::vector<double> gains(n_entities);
        for (std::size_t qi = begin; qi < end; ++qi) {
            const RankingQuery& q = queries[qi];
            for (std::uint32_t t = 0; t < n_entities; ++t) {
                double phi = 0.0;
                try {
                    phi = model::score_triple(store, q.h, q.r, t);
                } catch (const degenerate_box_error&) {
                    phi = 0.0;
                }
                if (!std::isfinite(phi)) phi = 0.0;  // keep the sort a strict weak order
                // descending score, ties by entity id ascending
                scored[t] = {-phi, t};
            }
            std::sort(scored.begin(), scored.end());
            for (std::size_t pos = 0; pos < n_entities; ++pos) {
                const auto it = q.relevance.find(scored[pos].second);
                gains[pos] = it == q.relevance.end() ? 0.0 : it->second;
            }
            try {
                // a query undefined in either gain mode is skipped in both so
                // the two means cover the same query set
                slots[qi].linear = ndcg(gains, GainMode::Linear);
                slots[qi].exponential = ndcg(gains, GainMode::Exponential);
            } catch (const config_error&) {
                slots[qi].skipped = true;
            }
        }
    };

    const std::size_t n_workers =
        std::max<std::size_t>(1, std::min(threads, queries.size() == 0 ? 1 : queries.size()));
    if (n_workers == 1) {
        run_range(0, queries.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (queries.size() + n_workers - 1) / n_workers;
        for (std::size_t w = 0; w < n_workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(queries.size(), begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_range, begin, end);
        }
        for (std::thread& th : pool) th.join();
    }

    RankingMetrics out;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        if (slots[qi].skipped) {
            ++out.skipped;
            continue;
        }
        out.mean_linear += slots[qi].linear;
        out.mean_exponential += slots[qi].exponential;
        ++out.queries;
        out.per_query.push_back({queries[qi], slots[qi].linear, slots[qi].exponential});
    }
    if (out.queries > 0) {
        out.mean_linear /= static_cast<double>(out.queries);
        out.mean_exponential /= static_cast<double>(out.queries);
    }
    return out;
}

std::vector<VolumeReportRow> volume_report(const model::ParameterStore& store, std::uint32_t r,
                                           const std::vector<std::uint32_t>& candidates,
                                           const std::vector<std::uint32_t>& coverage_set,
                                           std::size_t top_k) {
    if (r >= store.n_relations()) throw lookup_error("volume_report: relation id out of range");
    const model::BoxTransform g = store.tail_transform(r);

    std::vector<geometry::GumbelBox> coverage_boxes;
    coverage_boxes.reserve(coverage_set.size());
    for (std::uint32_t id : coverage_set) {
        coverage_boxes.push_back(model::apply_transform(g, store.entity_box(id)));
    }

    std::vector<VolumeReportRow> rows;
    rows.reserve(candidates.size());
    for (std::uint32_t id : candidates) {
        const geometry::GumbelBox box = model::apply_transform(g, store.entity_box(id));
        VolumeReportRow row;
        row.entity = id;
        row.volume = geometry::expected_volume(box, store.beta());
        for (const geometry::GumbelBox& other : coverage_boxes) {
            try {
                if (geometry::conditional_prob(box, other, store.beta()) >= 0.9) ++row.coverage;
            } catch (const degenerate_box_error&) {
            }
        }
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(), [](const VolumeReportRow& a, const VolumeReportRow& b) {
        if (a.coverage != b.coverage) return a.coverage > b.coverage;
        if (a.volume != b.volume) return a.volume > b.volume;
        return a.entity < b.entity;
    });
    if (rows.size() > 2 * top_k) {
        std::vector<VolumeReportRow> trimmed(rows.begin(),
                                             rows.begin() + static_cast<std::ptrdiff_t>(top_k));
        trimmed.insert(trimmed.end(), rows.end() - static_cast<std::ptrdiff_t>(top_k),
                       rows.end());
        rows = std::move(trimmed);
    }
    return rows;
}

}  // namespace boxkg::evaluation
