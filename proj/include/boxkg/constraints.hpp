#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "boxkg/data.hpp"
#include "boxkg/geometry.hpp"
#include "boxkg/model.hpp"
#include "boxkg/rng.hpp"

namespace boxkg::constraints {

// Declared relation properties: transitive relations and composition triples
// (r1, r2 -> r3).
struct ConstraintSet {
    std::vector<std::uint32_t> transitive;
    std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> compositions;

    bool empty() const { return transitive.empty() && compositions.empty(); }
};

// Text format, one declaration per line:
//   transitive <relation-name>
//   compose <r1> <r2> -> <r3>
// Names resolve against the relation vocabulary; unresolvable names and
// duplicate declarations are load-time errors. '#' starts a comment.
ConstraintSet load_constraints(const std::string& path, const data::Dataset& dataset);

// Boxes the regularizers are averaged over. Half synthetic (cen ~ U(0,1)^d,
// off ~ exp(U(log 0.01, log 0.5))), half copies of current entity boxes.
// Detached: constraints regularize transforms, not entities.
std::vector<geometry::GumbelBox> sample_boxes(std::size_t n, std::size_t d, Rng& rng,
                                              const model::ParameterStore& store);

// Bookkeeping for samples dropped because a denominator box degenerated.
struct FaultCounter {
    std::size_t faulted = 0;
};

// mean over u of (P(g_r(u) | f_r(u)) - 1)^2; drives g_r(u) to contain f_r(u).
autodiff::NodeId transitivity_loss(model::GraphBuilder& graph, std::uint32_t r,
                                   const std::vector<geometry::GumbelBox>& boxes,
                                   FaultCounter* faults = nullptr);

// mean over u of sym(f_r3(u), f_r2(f_r1(u))) + sym(g_r3(u), g_r2(g_r1(u)))
// with sym(a, b) = (1 - P(a|b))^2 + (1 - P(b|a))^2.
autodiff::NodeId composition_loss(model::GraphBuilder& graph, std::uint32_t r1,
                                  std::uint32_t r2, std::uint32_t r3,
                                  const std::vector<geometry::GumbelBox>& boxes,
                                  FaultCounter* faults = nullptr);

// w_tr * sum of transitivity losses + w_c * sum of composition losses over one
// shared box sample.
autodiff::NodeId constraint_loss(model::GraphBuilder& graph, const ConstraintSet& constraints,
                                 const std::vector<geometry::GumbelBox>& boxes, double w_tr,
                                 double w_c, FaultCounter* faults = nullptr);

}  // namespace boxkg::constraints
