#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "boxkg/rng.hpp"

namespace boxkg::data {

// One weighted fact: (head, relation, tail) with confidence s in [0, 1].
struct WeightedTriple {
    std::uint32_t h = 0;
    std::uint32_t r = 0;
    std::uint32_t t = 0;
    double s = 0.0;

    bool operator==(const WeightedTriple&) const = default;
};

using TripleList = std::vector<WeightedTriple>;

// Parses a 4-column TSV (head relation tail score); malformed lines report
// their line number, scores outside [0, 1] are rejected.
TripleList load_split(const std::string& path);

// Inverse of load_split up to float formatting (round-trips exactly).
void save_split(const TripleList& triples, const std::string& path);

// id -> name table from a 2-column TSV (id, name).
std::vector<std::string> load_vocab(const std::string& path);
void save_vocab(const std::vector<std::string>& names, const std::string& path);

// Packs (h, r, t) into one key; sized for vocabularies below 2^21 entities
// and 2^21 relations.
std::uint64_t triple_key(std::uint32_t h, std::uint32_t r, std::uint32_t t);

struct DatasetPaths {
    std::string train;
    std::string val;
    std::string test;
    std::string entity_vocab;
    std::string relation_vocab;
};

// Immutable after load; any number of concurrent readers.
class Dataset {
public:
    static Dataset load(const DatasetPaths& paths);

    // Builds vocabulary-driven indices from already-parsed pieces (used by
    // synthetic fixtures and tests).
    static Dataset from_parts(TripleList train, TripleList val, TripleList test,
                              std::vector<std::string> entity_names,
                              std::vector<std::string> relation_names);

    const TripleList& train() const { return train_; }
    const TripleList& val() const { return val_; }
    const TripleList& test() const { return test_; }
    std::size_t n_entities() const { return entity_names_.size(); }
    std::size_t n_relations() const { return relation_names_.size(); }
    const std::vector<std::string>& entity_names() const { return entity_names_; }
    const std::vector<std::string>& relation_names() const { return relation_names_; }

    std::uint32_t entity_id(const std::string& name) const;    // throws lookup_error
    std::uint32_t relation_id(const std::string& name) const;  // throws lookup_error
    // Up to k vocabulary names closest to `name` by edit distance.
    std::vector<std::string> nearest_entity_names(const std::string& name, std::size_t k) const;
    std::vector<std::string> nearest_relation_names(const std::string& name,
                                                    std::size_t k) const;

    // True if (h, r, t) appears in the train split (negative-sample filter).
    bool observed_in_train(std::uint32_t h, std::uint32_t r, std::uint32_t t) const;

    // Tails with confidences for a (h, r) key; splits is a bitmask of
    // {1 = train, 2 = val, 4 = test}. Later splits win on duplicate tails.
    std::vector<std::pair<std::uint32_t, double>> tails_for(std::uint32_t h, std::uint32_t r,
                                                            unsigned splits) const;

private:
    struct TailEntry {
        std::uint32_t tail;
        double s;
        unsigned split;  // 1, 2, or 4
    };

    void build_indices();

    TripleList train_, val_, test_;
    std::vector<std::string> entity_names_, relation_names_;
    std::unordered_map<std::string, std::uint32_t> entity_ids_, relation_ids_;
    std::unordered_set<std::uint64_t> train_observed_;
    std::unordered_map<std::uint64_t, std::vector<TailEntry>> tail_index_;  // key (h, r, 0)
};

// Head-or-tail corruptions of `seed_triple`; keeps the relation, filters
// against the train split, and after 100 rejected draws accepts the last
// candidate and bumps *exhausted_warnings.
std::vector<WeightedTriple> negative_sample(const WeightedTriple& seed_triple, std::size_t n,
                                            const Dataset& dataset, Rng& rng,
                                            std::size_t* exhausted_warnings = nullptr);

// Epoch-shuffled batches of train indices; the final partial batch is emitted.
// Order is a deterministic function of (seed, epoch).
std::vector<std::vector<std::uint32_t>> batch_iter(std::size_t n_triples,
                                                   std::size_t batch_size,
                                                   std::uint64_t seed, std::uint64_t epoch);

}  // namespace boxkg::data
