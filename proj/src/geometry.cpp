#include "boxkg/geometry.hpp"

#include <cmath>
#include <string>

#include "boxkg/errors.hpp"
#include "boxkg/numeric.hpp"
#include "boxkg/rng.hpp"

namespace boxkg::geometry {

using numeric::kEulerGamma;
using numeric::kVolumeFloor;

GumbelBox::GumbelBox(std::vector<double> cen_, std::vector<double> off_)
    : cen(std::move(cen_)), off(std::move(off_)) {
    if (cen.size() != off.size()) {
        throw config_error("GumbelBox: cen/off length mismatch");
    }
}

GumbelBox GumbelBox::from_endpoints(const std::vector<double>& lo,
                                    const std::vector<double>& hi) {
    if (lo.size() != hi.size()) {
        throw config_error("GumbelBox: endpoint length mismatch");
    }
    std::vector<double> cen(lo.size()), off(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
        cen[i] = (lo[i] + hi[i]) / 2.0;
        off[i] = (hi[i] - lo[i]) / 2.0;
    }
    return GumbelBox(std::move(cen), std::move(off));
}

GumbelBox intersect(const GumbelBox& a, const GumbelBox& b, double beta) {
    if (a.dim() != b.dim()) {
        throw config_error("intersect: dimension mismatch (" + std::to_string(a.dim()) +
                           " vs " + std::to_string(b.dim()) + ")");
    }
    std::vector<double> lo(a.dim()), hi(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) {
        lo[i] = numeric::logsumexp2(a.min_at(i), b.min_at(i), beta);
        hi[i] = -numeric::logsumexp2(-a.max_at(i), -b.max_at(i), beta);
    }
    return GumbelBox::from_endpoints(lo, hi);
}

double expected_volume(const GumbelBox& b, double beta) {
    double vol = 1.0;
    for (std::size_t i = 0; i < b.dim(); ++i) {
        vol *= numeric::softplus(b.max_at(i) - b.min_at(i) - 2.0 * kEulerGamma * beta, beta);
    }
    return vol;
}

double log_expected_volume(const GumbelBox& b, double beta) {
    double acc = 0.0;
    for (std::size_t i = 0; i < b.dim(); ++i) {
        acc += numeric::log_softplus(b.max_at(i) - b.min_at(i) - 2.0 * kEulerGamma * beta,
                                     beta);
    }
    return acc;
}

double conditional_prob(const GumbelBox& a, const GumbelBox& b, double beta) {
    const GumbelBox inter = intersect(a, b, beta);
    const double log_den = log_expected_volume(b, beta);
    if (log_den < std::log(kVolumeFloor)) {
        throw degenerate_box_error("conditional_prob: denominator volume below floor");
    }
    // Each per-dimension side argument of the intersection is <= the
    // denominator's, so the per-dimension log difference is <= 0 and the ratio
    // stays in [0, 1] up to one final rounding.
    double acc = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double num_side = inter.max_at(i) - inter.min_at(i) - 2.0 * kEulerGamma * beta;
        const double den_side = b.max_at(i) - b.min_at(i) - 2.0 * kEulerGamma * beta;
        acc += numeric::log_softplus(num_side, beta) - numeric::log_softplus(den_side, beta);
    }
    return std::exp(acc);
}

double mc_volume_oracle(const GumbelBox& b, double beta, std::size_t n_samples,
                        std::uint64_t seed) {
    if (n_samples < 1) throw config_error("mc_volume_oracle: n_samples must be >= 1");
    Rng rng(seed);
    const std::size_t d = b.dim();
    double mean = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        double vol = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double lo = b.min_at(i) - beta * std::log(-std::log(rng.uniform_open()));
            const double hi = b.max_at(i) + beta * std::log(-std::log(rng.uniform_open()));
            vol *= std::max(0.0, hi - lo);
            if (vol == 0.0) break;
        }
        mean += (vol - mean) / static_cast<double>(s + 1);
    }
    return mean;
}

BoxNodes intersect_nodes(autodiff::Tape& tape, const BoxNodes& a, const BoxNodes& b,
                         double beta) {
    using autodiff::NodeId;
    const NodeId a_min = tape.sub(a.cen, a.off);
    const NodeId a_max = tape.add(a.cen, a.off);
    const NodeId b_min = tape.sub(b.cen, b.off);
    const NodeId b_max = tape.add(b.cen, b.off);
    const NodeId lo = tape.logsumexp_pair(a_min, b_min, beta);
    const NodeId hi = tape.neg(tape.logsumexp_pair(tape.neg(a_max), tape.neg(b_max), beta));
    const NodeId cen = tape.scale(tape.add(lo, hi), 0.5);
    const NodeId off = tape.scale(tape.sub(hi, lo), 0.5);
    return {cen, off};
}

namespace {

// (max - min) - 2*gamma*beta = 2*off - 2*gamma*beta, as a vector node.
autodiff::NodeId side_args(autodiff::Tape& tape, const BoxNodes& b, double beta) {
    return tape.add_const(tape.scale(b.off, 2.0), -2.0 * kEulerGamma * beta);
}

}  // namespace

autodiff::NodeId log_volume_node(autodiff::Tape& tape, const BoxNodes& b, double beta) {
    return tape.sum(tape.log_softplus(side_args(tape, b, beta), beta));
}

autodiff::NodeId volume_node(autodiff::Tape& tape, const BoxNodes& b, double beta) {
    return tape.product(tape.softplus(side_args(tape, b, beta), beta));
}

autodiff::NodeId conditional_prob_node(autodiff::Tape& tape, const BoxNodes& a,
                                       const BoxNodes& b, double beta) {
    const BoxNodes inter = intersect_nodes(tape, a, b, beta);
    const autodiff::NodeId log_num = log_volume_node(tape, inter, beta);
    const autodiff::NodeId log_den = log_volume_node(tape, b, beta);
    if (tape.value(log_den) < std::log(kVolumeFloor)) {
        throw degenerate_box_error("conditional_prob: denominator volume below floor");
    }
    return tape.exp(tape.sub(log_num, log_den));
}

}  // namespace boxkg::geometry
