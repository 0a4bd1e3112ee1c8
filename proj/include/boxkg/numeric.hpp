#pragma once

#include <algorithm>
#include <cmath>

namespace boxkg::numeric {

// Euler-Mascheroni constant; enters the Gumbel expected-volume formula as -2*gamma.
inline constexpr double kEulerGamma = 0.5772156649015329;

// Volume denominators below this are treated as degenerate boxes.
inline constexpr double kVolumeFloor = 1e-30;

// Saturation cutoff for softplus/log1p(exp(z)) branches; exp(+-30) covers
// doubles comfortably and temperatures down to 1e-4 stay finite.
inline constexpr double kSoftplusCutoff = 30.0;

inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) in stable branch form.
inline double softplus1(double z) {
    if (z > kSoftplusCutoff) return z;
    if (z < -kSoftplusCutoff) return std::exp(z);
    return std::log1p(std::exp(z));
}

// beta * log(1 + exp(x/beta)); for x/beta > 30 returns x, for x/beta < -30
// returns beta * exp(x/beta).
inline double softplus(double x, double beta) {
    const double z = x / beta;
    if (z > kSoftplusCutoff) return x;
    return beta * softplus1(z);
}

// log(softplus(x, beta)) without forming the (possibly underflowing) value.
inline double log_softplus(double x, double beta) {
    const double z = x / beta;
    if (z < -kSoftplusCutoff) return std::log(beta) + z;
    return std::log(beta * softplus1(z));
}

// d/dx log(softplus(x, beta)) = sigmoid(x/beta) / softplus(x, beta).
inline double log_softplus_grad(double x, double beta) {
    const double z = x / beta;
    if (z < -kSoftplusCutoff) return 1.0 / beta;
    return sigmoid(z) / (beta * softplus1(z));
}

// beta * log(exp(a/beta) + exp(b/beta)), max-subtracted. Symmetric in (a, b)
// bit-for-bit: built from max and |a - b| only.
inline double logsumexp2(double a, double b, double beta) {
    const double hi = std::max(a, b);
    const double gap = std::abs(a - b) / beta;
    return hi + beta * std::log1p(std::exp(-gap));
}

}  // namespace boxkg::numeric
