#include <doctest.h>

#include <cmath>
#include <vector>

#include "boxkg/errors.hpp"
#include "boxkg/geometry.hpp"
#include "boxkg/numeric.hpp"
#include "boxkg/rng.hpp"

using boxkg::Rng;
using boxkg::config_error;
using boxkg::degenerate_box_error;
using namespace boxkg::geometry;

namespace {

constexpr double kGamma = boxkg::numeric::kEulerGamma;

GumbelBox box1d(double lo, double hi) {
    return GumbelBox::from_endpoints({lo}, {hi});
}

GumbelBox random_box(Rng& rng, std::size_t d, double side_lo = 0.05, double side_hi = 2.0) {
    std::vector<double> cen(d), off(d);
    for (std::size_t i = 0; i < d; ++i) {
        cen[i] = rng.uniform(-1.0, 1.0);
        off[i] = rng.uniform(side_lo, side_hi) / 2.0;
    }
    return GumbelBox(std::move(cen), std::move(off));
}

}  // namespace

TEST_CASE("center/offset and endpoint views agree") {
    const GumbelBox b({0.25, -1.5}, {0.5, 0.125});
    CHECK(b.min_at(0) == -0.25);
    CHECK(b.max_at(0) == 0.75);
    // dyadic values round-trip exactly
    const GumbelBox back = GumbelBox::from_endpoints({b.min_at(0), b.min_at(1)},
                                                     {b.max_at(0), b.max_at(1)});
    CHECK(back.cen[0] == b.cen[0]);
    CHECK(back.cen[1] == b.cen[1]);
    CHECK(back.off[0] == b.off[0]);
    CHECK(back.off[1] == b.off[1]);
}

TEST_CASE("intersect") {
    SUBCASE("self-intersection shrinks each side by beta*log2") {
        const double beta = 0.05;
        const GumbelBox b({0.3, 0.4}, {0.2, 0.3});
        const GumbelBox self = intersect(b, b, beta);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(self.min_at(i) ==
                  doctest::Approx(b.min_at(i) + beta * std::log(2.0)).epsilon(1e-12));
            CHECK(self.max_at(i) ==
                  doctest::Approx(b.max_at(i) - beta * std::log(2.0)).epsilon(1e-12));
        }
    }
    SUBCASE("contained box dominates when margins >> beta") {
        const double beta = 1e-3;
        const GumbelBox inner = box1d(0.4, 0.6);
        const GumbelBox outer = box1d(0.0, 1.0);
        const GumbelBox inter = intersect(inner, outer, beta);
        CHECK(inter.min_at(0) == doctest::Approx(0.4).epsilon(1e-9));
        CHECK(inter.max_at(0) == doctest::Approx(0.6).epsilon(1e-9));
    }
    SUBCASE("overlapping intervals") {
        const GumbelBox a = box1d(0.0, 1.0);
        const GumbelBox b = box1d(0.5, 1.5);
        const GumbelBox inter = intersect(a, b, 0.01);
        CHECK(inter.min_at(0) == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(inter.max_at(0) == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("commutative bit-for-bit") {
        Rng rng(7);
        for (int trial = 0; trial < 200; ++trial) {
            const GumbelBox a = random_box(rng, 3);
            const GumbelBox b = random_box(rng, 3);
            const GumbelBox ab = intersect(a, b, 0.01);
            const GumbelBox ba = intersect(b, a, 0.01);
            for (std::size_t i = 0; i < 3; ++i) {
                CHECK(ab.cen[i] == ba.cen[i]);
                CHECK(ab.off[i] == ba.off[i]);
            }
        }
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(intersect(box1d(0, 1), GumbelBox({0, 0}, {1, 1}), 0.1), config_error);
    }
}

TEST_CASE("expected_volume") {
    SUBCASE("1-d unit interval, beta = 1") {
        // softplus(1 - 2*gamma; 1) via mpmath = 0.61890968743538139
        CHECK(expected_volume(box1d(0.0, 1.0), 1.0) ==
              doctest::Approx(0.61890968743538139).epsilon(1e-12));
    }
    SUBCASE("1-d unit interval, beta = 0.01: saturated-high branch") {
        CHECK(expected_volume(box1d(0.0, 1.0), 0.01) ==
              doctest::Approx(1.0 - 2.0 * kGamma * 0.01).epsilon(1e-12));
    }
    SUBCASE("inverted side collapses the volume") {
        CHECK(expected_volume(box1d(5.0, -5.0), 0.01) < 1e-300);
    }
    SUBCASE("log form agrees with the product form") {
        Rng rng(11);
        for (int trial = 0; trial < 100; ++trial) {
            const GumbelBox b = random_box(rng, 2);
            const double direct = expected_volume(b, 0.05);
            CHECK(std::log(direct) == doctest::Approx(log_expected_volume(b, 0.05)).epsilon(1e-10));
        }
    }
    SUBCASE("monotone in every endpoint") {
        Rng rng(13);
        for (int trial = 0; trial < 200; ++trial) {
            const GumbelBox b = random_box(rng, 3);
            const double base = expected_volume(b, 0.02);
            const std::size_t i = rng.below(3);
            std::vector<double> lo(3), hi(3);
            for (std::size_t k = 0; k < 3; ++k) {
                lo[k] = b.min_at(k);
                hi[k] = b.max_at(k);
            }
            if (rng.uniform() < 0.5) {
                hi[i] += rng.uniform(0.0, 0.5);  // raise one max
            } else {
                lo[i] -= rng.uniform(0.0, 0.5);  // lower one min
            }
            CHECK(expected_volume(GumbelBox::from_endpoints(lo, hi), 0.02) >= base);
        }
    }
    SUBCASE("tape product form matches the value path and its gradient") {
        const GumbelBox b({0.3, -0.2}, {0.45, 0.3});
        const double beta = 0.05;
        boxkg::autodiff::Tape tape;
        std::vector<double> cen_grad(2, 0.0), off_grad(2, 0.0);
        const auto cen = tape.param({b.cen.data(), 2}, cen_grad.data());
        const auto off = tape.param({b.off.data(), 2}, off_grad.data());
        const auto vol = volume_node(tape, {cen, off}, beta);
        CHECK(tape.value(vol) == doctest::Approx(expected_volume(b, beta)).epsilon(1e-14));
        tape.backward(vol);
        const double eps = 1e-6;
        for (std::size_t i = 0; i < 2; ++i) {
            GumbelBox up = b, down = b;
            up.off[i] += eps;
            down.off[i] -= eps;
            const double numeric =
                (expected_volume(up, beta) - expected_volume(down, beta)) / (2 * eps);
            CHECK(off_grad[i] == doctest::Approx(numeric).epsilon(1e-5));
            CHECK(cen_grad[i] == doctest::Approx(0.0));  // volume depends only on sides
        }
    }
}

TEST_CASE("conditional_prob") {
    SUBCASE("self-conditioning with sides >> beta stays near 1") {
        // frozen via mpmath at side 1, beta = 1e-3, d = 2: 0.99722613307209384
        const GumbelBox b({0.5, 0.5}, {0.5, 0.5});
        const double p = conditional_prob(b, b, 1e-3);
        CHECK(p == doctest::Approx(0.99722613307209384).epsilon(1e-9));
        CHECK(p >= 0.99);
    }
    SUBCASE("disjoint boxes give ~0") {
        CHECK(conditional_prob(box1d(0.0, 1.0), box1d(10.0, 11.0), 0.01) < 1e-12);
    }
    SUBCASE("containment gives ~1") {
        const GumbelBox inner = box1d(0.4, 0.6);
        const GumbelBox outer = box1d(-1.0, 2.0);
        CHECK(conditional_prob(outer, inner, 1e-4) == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("degenerate denominator raises") {
        CHECK_THROWS_AS(conditional_prob(box1d(0.0, 1.0), box1d(3.0, -3.0), 0.01),
                        degenerate_box_error);
    }
    SUBCASE("bounded in [0, 1 + 1e-9] over random pairs and temperatures") {
        for (const double beta : {1e-4, 1e-2, 1.0}) {
            Rng rng(17);
            for (int trial = 0; trial < 3400; ++trial) {
                const GumbelBox a = random_box(rng, 2);
                const GumbelBox b = random_box(rng, 2);
                double p = 0.0;
                try {
                    p = conditional_prob(a, b, beta);
                } catch (const degenerate_box_error&) {
                    continue;
                }
                CHECK(p >= 0.0);
                CHECK(p <= 1.0 + 1e-9);
            }
        }
    }
    SUBCASE("hard-box limit recovers the Lebesgue ratio") {
        const GumbelBox a = box1d(0.0, 1.0);
        const GumbelBox b = box1d(0.25, 1.75);
        // |a n b| / |b| = 0.75 / 1.5
        CHECK(conditional_prob(a, b, 1e-6) == doctest::Approx(0.5).epsilon(1e-3));
    }
    SUBCASE("intersection volume never exceeds either operand's") {
        Rng rng(19);
        for (int trial = 0; trial < 500; ++trial) {
            const GumbelBox a = random_box(rng, 2);
            const GumbelBox b = random_box(rng, 2);
            const double vi = expected_volume(intersect(a, b, 0.05), 0.05);
            CHECK(vi <= std::min(expected_volume(a, 0.05), expected_volume(b, 0.05)) + 1e-12);
        }
    }
}

TEST_CASE("mc_volume_oracle") {
    SUBCASE("near-hard box recovers the interval product") {
        const GumbelBox b({0.5, 0.5}, {0.5, 0.5});
        const double est = mc_volume_oracle(b, 1e-8, 100000, 4);
        CHECK(est == doctest::Approx(1.0).epsilon(1e-4));
    }
    SUBCASE("agrees with the closed form in the (side/beta = 20) regime") {
        const GumbelBox b = box1d(0.0, 1.0);
        const double closed = expected_volume(b, 0.05);
        const double mc = mc_volume_oracle(b, 0.05, 1000000, 99);
        CHECK(std::abs(mc - closed) / closed < 0.02);
    }
    SUBCASE("two seeds agree within sampling error") {
        const GumbelBox b = box1d(0.0, 1.0);
        const std::size_t n = 200000;
        const double e1 = mc_volume_oracle(b, 0.05, n, 1);
        const double e2 = mc_volume_oracle(b, 0.05, n, 2);
        CHECK(e1 != e2);
        // sample std of the per-draw volume is ~0.09 here; 3 standard errors
        const double se = 0.09 / std::sqrt(static_cast<double>(n));
        CHECK(std::abs(e1 - e2) < 3.0 * std::sqrt(2.0) * se);
    }
    SUBCASE("deterministic given seed") {
        const GumbelBox b = box1d(0.0, 1.0);
        CHECK(mc_volume_oracle(b, 0.05, 1000, 5) == mc_volume_oracle(b, 0.05, 1000, 5));
    }
}
