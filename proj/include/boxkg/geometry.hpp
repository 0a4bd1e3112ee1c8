#pragma once

#include <cstdint>
#include <vector>

#include "boxkg/autodiff.hpp"

namespace boxkg::geometry {

// Axis-aligned box with Gumbel-distributed endpoints, stored as center/offset
// location parameters. Per-dimension endpoints are min_at(i) = cen - off and
// max_at(i) = cen + off. Offsets are positive for entity boxes; intersection
// outputs may carry non-positive offsets (near-zero volume), which is legal.
struct GumbelBox {
    std::vector<double> cen;
    std::vector<double> off;

    GumbelBox() = default;
    GumbelBox(std::vector<double> cen_, std::vector<double> off_);

    static GumbelBox from_endpoints(const std::vector<double>& lo,
                                    const std::vector<double>& hi);

    std::size_t dim() const { return cen.size(); }
    double min_at(std::size_t i) const { return cen[i] - off[i]; }
    double max_at(std::size_t i) const { return cen[i] + off[i]; }
};

// Per-dimension Gumbel min/max stability: the intersection's min endpoint is
// logsumexp of the operand mins, the max endpoint the negated logsumexp of the
// negated maxes. Symmetric in (a, b) bit-for-bit.
GumbelBox intersect(const GumbelBox& a, const GumbelBox& b, double beta);

// prod_i beta * log(1 + exp((max_i - min_i)/beta - 2*gamma)).
double expected_volume(const GumbelBox& b, double beta);

// Same quantity in log space; never underflows to -inf unless a factor is 0.
double log_expected_volume(const GumbelBox& b, double beta);

// expected_volume(intersect(a, b)) / expected_volume(b), evaluated as
// exp(sum of per-dimension log-softplus differences) so deeply disjoint boxes
// keep gradient signal and the [0, 1] bound survives rounding.
// Throws degenerate_box_error if expected_volume(b) is below the volume floor.
double conditional_prob(const GumbelBox& a, const GumbelBox& b, double beta);

// Monte-Carlo estimate of the expected volume; the independent oracle for the
// closed-form approximation. Deterministic given seed.
double mc_volume_oracle(const GumbelBox& b, double beta, std::size_t n_samples,
                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tape-backed counterparts used by the model and the training losses.

// A box whose cen/off live on a tape (vector nodes of equal length).
struct BoxNodes {
    autodiff::NodeId cen;
    autodiff::NodeId off;
};

BoxNodes intersect_nodes(autodiff::Tape& tape, const BoxNodes& a, const BoxNodes& b,
                         double beta);

// Scalar node holding log expected volume.
autodiff::NodeId log_volume_node(autodiff::Tape& tape, const BoxNodes& b, double beta);

autodiff::NodeId volume_node(autodiff::Tape& tape, const BoxNodes& b, double beta);

// Scalar node holding the conditional probability P(a | b). Checks the
// denominator against the volume floor at build time.
autodiff::NodeId conditional_prob_node(autodiff::Tape& tape, const BoxNodes& a,
                                       const BoxNodes& b, double beta);

}  // namespace boxkg::geometry
