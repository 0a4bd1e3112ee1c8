#include "boxkg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <unordered_set>

#include "boxkg/errors.hpp"
#include "boxkg/rng.hpp"

namespace boxkg::synthetic {

namespace {

std::vector<std::string> numbered_names(const std::string& prefix, std::size_t n) {
    std::vector<std::string> names;
    names.reserve(n);
    for (std::size_t i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i));
    return names;
}

}  // namespace

PlantedDataset make_planted_dataset(std::size_t n_entities, std::size_t n_relations,
                                    std::size_t n_triples, std::size_t d, double beta,
                                    std::uint64_t seed, std::size_t n_test) {
    model::ParameterStore truth =
        model::init_parameters(n_entities, n_relations, d, beta, mix_seed(seed));
    // widen entity 0 into a general concept box covering the unit cube
    {
        auto cen = truth.entity_cen(0);
        auto off = truth.entity_log_off(0);
        for (std::size_t i = 0; i < d; ++i) {
            cen[i] = 0.5;
            off[i] = std::log(0.8);
        }
    }

    Rng rng(seed);
    std::unordered_set<std::uint64_t> seen;
    data::TripleList all;
    while (all.size() < n_triples) {
        data::WeightedTriple triple;
        triple.h = static_cast<std::uint32_t>(rng.below(n_entities));
        triple.r = static_cast<std::uint32_t>(rng.below(n_relations));
        triple.t = static_cast<std::uint32_t>(rng.below(n_entities));
        if (!seen.insert(data::triple_key(triple.h, triple.r, triple.t)).second) continue;
        triple.s = std::clamp(model::score_triple(truth, triple.h, triple.r, triple.t), 0.0, 1.0);
        all.push_back(triple);
    }

    const std::size_t n_val = std::max<std::size_t>(1, (n_triples - n_test) / 10);
    data::TripleList test(all.end() - static_cast<std::ptrdiff_t>(n_test), all.end());
    all.resize(all.size() - n_test);
    data::TripleList val(all.end() - static_cast<std::ptrdiff_t>(n_val), all.end());
    all.resize(all.size() - n_val);

    PlantedDataset out{data::Dataset::from_parts(std::move(all), std::move(val), std::move(test),
                                                 numbered_names("e", n_entities),
                                                 numbered_names("r", n_relations)),
                       std::move(truth)};
    return out;
}

ChainDataset make_chain_dataset(std::size_t n_chains) {
    if (n_chains < 1) throw config_error("chain dataset needs at least 1 chain");
    data::TripleList train;
    std::vector<data::WeightedTriple> held_out;
    for (std::size_t k = 0; k < n_chains; ++k) {
        const auto a = static_cast<std::uint32_t>(3 * k);
        train.push_back({a, 0, a + 1, 1.0});
        train.push_back({a + 1, 0, a + 2, 1.0});
        held_out.push_back({a, 0, a + 2, 1.0});
    }
    ChainDataset out{data::Dataset::from_parts(std::move(train), {}, {},
                                               numbered_names("A", 3 * n_chains), {"r"}),
                     {}, std::move(held_out)};
    out.ruleset.transitive.push_back(0);
    return out;
}

CompositionDataset make_composition_dataset(std::size_t n_groups) {
    if (n_groups < 2) throw config_error("composition dataset needs at least 2 groups");
    // entity layout: A_i = i, B_i = n + i, C_i = 2n + i
    const auto a = [](std::size_t i) { return static_cast<std::uint32_t>(i); };
    const auto b = [n_groups](std::size_t i) { return static_cast<std::uint32_t>(n_groups + i); };
    const auto c = [n_groups](std::size_t i) {
        return static_cast<std::uint32_t>(2 * n_groups + i);
    };
    data::TripleList train;
    std::vector<data::WeightedTriple> held_out;
    for (std::size_t i = 0; i < n_groups; ++i) {
        train.push_back({a(i), 0, b(i), 1.0});
        train.push_back({b(i), 1, c(i), 1.0});
        if (i % 2 == 0) {
            train.push_back({a(i), 2, c(i), 1.0});
        } else {
            held_out.push_back({a(i), 2, c(i), 1.0});
        }
    }
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n_groups; ++i) names.push_back("A" + std::to_string(i));
    for (std::size_t i = 0; i < n_groups; ++i) names.push_back("B" + std::to_string(i));
    for (std::size_t i = 0; i < n_groups; ++i) names.push_back("C" + std::to_string(i));
    CompositionDataset out{data::Dataset::from_parts(std::move(train), {}, {}, std::move(names),
                                                     {"r1", "r2", "r3"}),
                           {}, std::move(held_out)};
    out.ruleset.compositions.emplace_back(0, 1, 2);
    return out;
}

void write_dataset_files(const data::Dataset& dataset, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    data::save_split(dataset.train(), (base / "train.tsv").string());
    data::save_split(dataset.val(), (base / "val.tsv").string());
    data::save_split(dataset.test(), (base / "test.tsv").string());
    data::save_vocab(dataset.entity_names(), (base / "entity_id.tsv").string());
    data::save_vocab(dataset.relation_names(), (base / "relation_id.tsv").string());
}

}  // namespace boxkg::synthetic
