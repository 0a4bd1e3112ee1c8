#pragma once

#include <cstdint>
#include <vector>

#include "boxkg/constraints.hpp"
#include "boxkg/data.hpp"
#include "boxkg/model.hpp"

namespace boxkg::synthetic {

// Synthetic uncertain graphs with known structure; used by the bundled toy
// fixture, sanity runs, and the constraint-effect experiments.

struct PlantedDataset {
    data::Dataset dataset;
    model::ParameterStore ground_truth;
};

// Confidences come from a hidden box model: triples are sampled uniformly
// (deduplicated) and scored with the ground-truth store. 90/10 train/val
// split, no test split unless n_test > 0. One entity's box is widened into a
// general concept that contains most others under relation 0.
PlantedDataset make_planted_dataset(std::size_t n_entities, std::size_t n_relations,
                                    std::size_t n_triples, std::size_t d, double beta,
                                    std::uint64_t seed, std::size_t n_test = 0);

struct ChainDataset {
    data::Dataset dataset;
    constraints::ConstraintSet ruleset;            // relation 0 transitive
    std::vector<data::WeightedTriple> held_out;    // (A_i, r, A_{i+2}) pairs
};

// n_chains disjoint 3-entity chains: (A_i, r, A_{i+1}) observed with s = 1,
// the two-hop pair (A_i, r, A_{i+2}) held out.
ChainDataset make_chain_dataset(std::size_t n_chains);

struct CompositionDataset {
    data::Dataset dataset;
    constraints::ConstraintSet ruleset;            // (r1, r2) -> r3
    std::vector<data::WeightedTriple> held_out;    // unobserved (A_i, r3, C_i)
};

// Three entity tiers: (A_i, r1, B_i) and (B_i, r2, C_i) observed with s = 1;
// (A_i, r3, C_i) observed for even i, held out for odd i.
CompositionDataset make_composition_dataset(std::size_t n_groups);

// Writes train/val/test TSVs, vocabulary sidecars, and a constraint file
// under dir (created if missing).
void write_dataset_files(const data::Dataset& dataset, const std::string& dir);

}  // namespace boxkg::synthetic
