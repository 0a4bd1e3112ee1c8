#include "boxkg/constraints.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "boxkg/errors.hpp"

namespace boxkg::constraints {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

}  // namespace

ConstraintSet load_constraints(const std::string& path, const data::Dataset& dataset) {
    std::ifstream f(path);
    if (!f) throw config_error("constraint file not found: " + path);
    ConstraintSet out;
    std::set<std::uint32_t> seen_tr;
    std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> seen_c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        if (tokens[0] == "transitive") {
            if (tokens.size() != 2) {
                throw parse_error(where + ": expected 'transitive <relation>'");
            }
            const std::uint32_t r = dataset.relation_id(tokens[1]);
            if (!seen_tr.insert(r).second) {
                throw parse_error(where + ": duplicate transitive declaration for " + tokens[1]);
            }
            out.transitive.push_back(r);
        } else if (tokens[0] == "compose") {
            if (tokens.size() != 5 || tokens[3] != "->") {
                throw parse_error(where + ": expected 'compose <r1> <r2> -> <r3>'");
            }
            const auto rule = std::make_tuple(dataset.relation_id(tokens[1]),
                                              dataset.relation_id(tokens[2]),
                                              dataset.relation_id(tokens[4]));
            if (!seen_c.insert(rule).second) {
                throw parse_error(where + ": duplicate composition declaration");
            }
            out.compositions.push_back(rule);
        } else {
            throw parse_error(where + ": unknown declaration '" + tokens[0] + "'");
        }
    }
    return out;
}

std::vector<geometry::GumbelBox> sample_boxes(std::size_t n, std::size_t d, Rng& rng,
                                              const model::ParameterStore& store) {
    if (n < 1) throw config_error("sample_boxes: n must be >= 1");
    std::vector<geometry::GumbelBox> boxes;
    boxes.reserve(n);
    const std::size_t n_synthetic = n - n / 2;
    const double log_lo = std::log(0.01);
    const double log_hi = std::log(0.5);
    for (std::size_t i = 0; i < n_synthetic; ++i) {
        std::vector<double> cen(d), off(d);
        for (std::size_t k = 0; k < d; ++k) cen[k] = rng.uniform();
        for (std::size_t k = 0; k < d; ++k) off[k] = std::exp(rng.uniform(log_lo, log_hi));
        boxes.emplace_back(std::move(cen), std::move(off));
    }
    for (std::size_t i = n_synthetic; i < n; ++i) {
        const auto id = static_cast<std::size_t>(rng.below(store.n_entities()));
        boxes.push_back(store.entity_box(id));  // copied values, not references
    }
    return boxes;
}

namespace {

using autodiff::NodeId;

// (1 - P(a|b))^2 as a scalar node.
NodeId one_minus_prob_sq(model::GraphBuilder& graph, const geometry::BoxNodes& a,
                         const geometry::BoxNodes& b) {
    autodiff::Tape& tape = graph.tape();
    const NodeId p = geometry::conditional_prob_node(tape, a, b, graph.beta());
    const NodeId resid = tape.add_const(tape.neg(p), 1.0);
    return tape.mul(resid, resid);
}

// Mean of per-sample terms with degenerate samples dropped; 0 if none survive.
NodeId mean_or_zero(autodiff::Tape& tape, const std::vector<NodeId>& terms) {
    if (terms.empty()) return tape.constant(0.0);
    NodeId acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
    return tape.scale(acc, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

autodiff::NodeId transitivity_loss(model::GraphBuilder& graph, std::uint32_t r,
                                   const std::vector<geometry::GumbelBox>& boxes,
                                   FaultCounter* faults) {
    if (boxes.empty()) throw config_error("transitivity_loss: empty box sample");
    autodiff::Tape& tape = graph.tape();
    std::vector<NodeId> terms;
    terms.reserve(boxes.size());
    for (const geometry::GumbelBox& u : boxes) {
        const geometry::BoxNodes u_node = graph.constant_box(u);
        const geometry::BoxNodes fu = graph.apply(graph.head_transform(r), u_node);
        const geometry::BoxNodes gu = graph.apply(graph.tail_transform(r), u_node);
        try {
            terms.push_back(one_minus_prob_sq(graph, gu, fu));
        } catch (const degenerate_box_error&) {
            if (faults != nullptr) ++faults->faulted;
        }
    }
    return mean_or_zero(tape, terms);
}

autodiff::NodeId composition_loss(model::GraphBuilder& graph, std::uint32_t r1,
                                  std::uint32_t r2, std::uint32_t r3,
                                  const std::vector<geometry::GumbelBox>& boxes,
                                  FaultCounter* faults) {
    if (boxes.empty()) throw config_error("composition_loss: empty box sample");
    autodiff::Tape& tape = graph.tape();
    std::vector<NodeId> terms;
    terms.reserve(boxes.size());
    for (const geometry::GumbelBox& u : boxes) {
        const geometry::BoxNodes u_node = graph.constant_box(u);
        const geometry::BoxNodes f3 = graph.apply(graph.head_transform(r3), u_node);
        const geometry::BoxNodes f21 =
            graph.apply(graph.head_transform(r2), graph.apply(graph.head_transform(r1), u_node));
        const geometry::BoxNodes g3 = graph.apply(graph.tail_transform(r3), u_node);
        const geometry::BoxNodes g21 =
            graph.apply(graph.tail_transform(r2), graph.apply(graph.tail_transform(r1), u_node));
        try {
            NodeId term = tape.add(one_minus_prob_sq(graph, f3, f21),
                                   one_minus_prob_sq(graph, f21, f3));
            term = tape.add(term, one_minus_prob_sq(graph, g3, g21));
            term = tape.add(term, one_minus_prob_sq(graph, g21, g3));
            terms.push_back(term);
        } catch (const degenerate_box_error&) {
            if (faults != nullptr) ++faults->faulted;
        }
    }
    return mean_or_zero(tape, terms);
}

autodiff::NodeId constraint_loss(model::GraphBuilder& graph, const ConstraintSet& constraints,
                                 const std::vector<geometry::GumbelBox>& boxes, double w_tr,
                                 double w_c, FaultCounter* faults) {
    if (w_tr < 0.0 || w_c < 0.0) throw config_error("constraint_loss: weights must be >= 0");
    autodiff::Tape& tape = graph.tape();
    NodeId total = tape.constant(0.0);
    if (constraints.empty()) return total;
    if (w_tr > 0.0) {
        for (std::uint32_t r : constraints.transitive) {
            total = tape.add(total, tape.scale(transitivity_loss(graph, r, boxes, faults), w_tr));
        }
    }
    if (w_c > 0.0) {
        for (const auto& [r1, r2, r3] : constraints.compositions) {
            total = tape.add(total,
                             tape.scale(composition_loss(graph, r1, r2, r3, boxes, faults), w_c));
        }
    }
    return total;
}

}  // namespace boxkg::constraints
