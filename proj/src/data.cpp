#include "boxkg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "boxkg/errors.hpp"

namespace boxkg::data {

namespace {

constexpr unsigned kIdBits = 21;  // per-field width inside triple_key

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::uint32_t parse_id(const std::string& field, const std::string& path, std::size_t line_no,
                       const char* what) {
    std::uint32_t value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || field.empty()) {
        throw parse_error(path + ":" + std::to_string(line_no) + ": bad " + what + " id '" +
                          field + "'");
    }
    if (value >= (1u << kIdBits)) {
        throw parse_error(path + ":" + std::to_string(line_no) + ": " + what + " id " + field +
                          " exceeds supported range");
    }
    return value;
}

double parse_score(const std::string& field, const std::string& path, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double s = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        return s;
    } catch (const std::exception&) {
        throw parse_error(path + ":" + std::to_string(line_no) + ": bad score '" + field + "'");
    }
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                               diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

std::vector<std::string> nearest_names(const std::vector<std::string>& vocab,
                                       const std::string& name, std::size_t k) {
    std::vector<std::pair<std::size_t, std::size_t>> scored;  // (distance, index)
    scored.reserve(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        scored.emplace_back(edit_distance(name, vocab[i]), i);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) {
        out.push_back(vocab[scored[i].second]);
    }
    return out;
}

}  // namespace

std::uint64_t triple_key(std::uint32_t h, std::uint32_t r, std::uint32_t t) {
    return (static_cast<std::uint64_t>(h) << (2 * kIdBits)) |
           (static_cast<std::uint64_t>(r) << kIdBits) | static_cast<std::uint64_t>(t);
}

TripleList load_split(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("split not found: " + path);
    TripleList out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 4) {
            throw parse_error(path + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields, found " +
                              std::to_string(fields.size()));
        }
        WeightedTriple triple;
        triple.h = parse_id(fields[0], path, line_no, "head");
        triple.r = parse_id(fields[1], path, line_no, "relation");
        triple.t = parse_id(fields[2], path, line_no, "tail");
        triple.s = parse_score(fields[3], path, line_no);
        if (!(triple.s >= 0.0 && triple.s <= 1.0)) {
            throw parse_error(path + ":" + std::to_string(line_no) + ": score " + fields[3] +
                              " outside [0, 1]");
        }
        out.push_back(triple);
    }
    return out;
}

void save_split(const TripleList& triples, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw config_error("cannot open split for writing: " + path);
    char buf[64];
    for (const WeightedTriple& triple : triples) {
        std::snprintf(buf, sizeof(buf), "%.17g", triple.s);
        f << triple.h << '\t' << triple.r << '\t' << triple.t << '\t' << buf << '\n';
    }
    if (!f) throw config_error("short write on split: " + path);
}

std::vector<std::string> load_vocab(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("vocabulary file not found: " + path);
    std::vector<std::string> names;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 2) {
            throw parse_error(path + ":" + std::to_string(line_no) +
                              ": expected 2 tab-separated fields (id, name)");
        }
        const std::uint32_t id = parse_id(fields[0], path, line_no, "vocab");
        if (id != names.size()) {
            throw parse_error(path + ":" + std::to_string(line_no) + ": ids must be dense and ordered, expected " +
                              std::to_string(names.size()) + " got " + fields[0]);
        }
        names.push_back(fields[1]);
    }
    return names;
}

void save_vocab(const std::vector<std::string>& names, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw config_error("cannot open vocabulary for writing: " + path);
    for (std::size_t i = 0; i < names.size(); ++i) {
        f << i << '\t' << names[i] << '\n';
    }
}

Dataset Dataset::load(const DatasetPaths& paths) {
    TripleList train = load_split(paths.train);
    TripleList val = load_split(paths.val);
    TripleList test = load_split(paths.test);
    std::vector<std::string> entities = load_vocab(paths.entity_vocab);
    std::vector<std::string> relations = load_vocab(paths.relation_vocab);
    return from_parts(std::move(train), std::move(val), std::move(test), std::move(entities),
                      std::move(relations));
}

Dataset Dataset::from_parts(TripleList train, TripleList val, TripleList test,
                            std::vector<std::string> entity_names,
                            std::vector<std::string> relation_names) {
    Dataset ds;
    ds.train_ = std::move(train);
    ds.val_ = std::move(val);
    ds.test_ = std::move(test);
    ds.entity_names_ = std::move(entity_names);
    ds.relation_names_ = std::move(relation_names);
    ds.build_indices();
    return ds;
}

void Dataset::build_indices() {
    if (train_.empty()) throw config_error("train split is empty");
    for (const TripleList* split : {&train_, &val_, &test_}) {
        for (const WeightedTriple& triple : *split) {
            if (triple.h >= entity_names_.size() || triple.t >= entity_names_.size()) {
                throw config_error("entity id " +
                                   std::to_string(std::max(triple.h, triple.t)) +
                                   " not covered by vocabulary of size " +
                                   std::to_string(entity_names_.size()));
            }
            if (triple.r >= relation_names_.size()) {
                throw config_error("relation id " + std::to_string(triple.r) +
                                   " not covered by vocabulary of size " +
                                   std::to_string(relation_names_.size()));
            }
        }
    }
    entity_ids_.reserve(entity_names_.size());
    for (std::size_t i = 0; i < entity_names_.size(); ++i) {
        entity_ids_.emplace(entity_names_[i], static_cast<std::uint32_t>(i));
    }
    relation_ids_.reserve(relation_names_.size());
    for (std::size_t i = 0; i < relation_names_.size(); ++i) {
        relation_ids_.emplace(relation_names_[i], static_cast<std::uint32_t>(i));
    }
    train_observed_.reserve(train_.size() * 2);
    for (const WeightedTriple& triple : train_) {
        train_observed_.insert(triple_key(triple.h, triple.r, triple.t));
    }
    const TripleList* lists[3] = {&train_, &val_, &test_};
    for (unsigned i = 0; i < 3; ++i) {
        for (const WeightedTriple& triple : *lists[i]) {
            tail_index_[triple_key(triple.h, triple.r, 0)].push_back(
                {triple.t, triple.s, 1u << i});
        }
    }
}

std::uint32_t Dataset::entity_id(const std::string& name) const {
    const auto it = entity_ids_.find(name);
    if (it == entity_ids_.end()) {
        std::string msg = "unknown entity '" + name + "'; nearest:";
        for (const auto& candidate : nearest_entity_names(name, 5)) msg += " " + candidate;
        throw lookup_error(msg);
    }
    return it->second;
}

std::uint32_t Dataset::relation_id(const std::string& name) const {
    const auto it = relation_ids_.find(name);
    if (it == relation_ids_.end()) {
        std::string msg = "unknown relation '" + name + "'; nearest:";
        for (const auto& candidate : nearest_relation_names(name, 5)) msg += " " + candidate;
        throw lookup_error(msg);
    }
    return it->second;
}

std::vector<std::string> Dataset::nearest_entity_names(const std::string& name,
                                                       std::size_t k) const {
    return nearest_names(entity_names_, name, k);
}

std::vector<std::string> Dataset::nearest_relation_names(const std::string& name,
                                                         std::size_t k) const {
    return nearest_names(relation_names_, name, k);
}

bool Dataset::observed_in_train(std::uint32_t h, std::uint32_t r, std::uint32_t t) const {
    return train_observed_.contains(triple_key(h, r, t));
}

std::vector<std::pair<std::uint32_t, double>> Dataset::tails_for(std::uint32_t h,
                                                                 std::uint32_t r,
                                                                 unsigned splits) const {
    const auto it = tail_index_.find(triple_key(h, r, 0));
    if (it == tail_index_.end()) return {};
    std::unordered_map<std::uint32_t, double> gains;
    for (const TailEntry& entry : it->second) {
        if (splits & entry.split) gains[entry.tail] = entry.s;
    }
    std::vector<std::pair<std::uint32_t, double>> out(gains.begin(), gains.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<WeightedTriple> negative_sample(const WeightedTriple& seed_triple, std::size_t n,
                                            const Dataset& dataset, Rng& rng,
                                            std::size_t* exhausted_warnings) {
    if (n < 1) throw config_error("negative_sample: n must be >= 1");
    const std::uint64_t n_entities = dataset.n_entities();
    std::vector<WeightedTriple> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        WeightedTriple corrupt = seed_triple;
        corrupt.s = 0.0;
        bool accepted = false;
        for (int attempt = 0; attempt < 100; ++attempt) {
            WeightedTriple candidate = corrupt;
            candidate.h = seed_triple.h;
            candidate.t = seed_triple.t;
            const bool corrupt_head = rng.uniform() < 0.5;
            const auto entity = static_cast<std::uint32_t>(rng.below(n_entities));
            if (corrupt_head) {
                candidate.h = entity;
            } else {
                candidate.t = entity;
            }
            if (candidate.h == seed_triple.h && candidate.t == seed_triple.t) {
                continue;  // drew the source triple itself
            }
            corrupt = candidate;  // last candidate differing from the source
            if (!dataset.observed_in_train(candidate.h, candidate.r, candidate.t)) {
                accepted = true;
                break;
            }
        }
        // On exhaustion the last observed-but-distinct candidate stands.
        if (!accepted && exhausted_warnings != nullptr) ++*exhausted_warnings;
        out.push_back(corrupt);
    }
    return out;
}

std::vector<std::vector<std::uint32_t>> batch_iter(std::size_t n_triples,
                                                   std::size_t batch_size, std::uint64_t seed,
                                                   std::uint64_t epoch) {
    if (batch_size < 1) throw config_error("batch_iter: batch_size must be >= 1");
    std::vector<std::uint32_t> order(n_triples);
    for (std::size_t i = 0; i < n_triples; ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng rng(derive_seed(seed, epoch, 0x9a7c));
    for (std::size_t i = n_triples; i > 1; --i) {  // Fisher-Yates
        const std::size_t j = rng.below(i);
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::vector<std::uint32_t>> batches;
    for (std::size_t start = 0; start < n_triples; start += batch_size) {
        const std::size_t stop = std::min(n_triples, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return batches;
}

}  // namespace boxkg::data
