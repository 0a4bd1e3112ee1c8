#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "boxkg/autodiff.hpp"
#include "boxkg/errors.hpp"
#include "boxkg/numeric.hpp"
#include "boxkg/rng.hpp"

using boxkg::Rng;
using boxkg::config_error;
using boxkg::numeric_error;
using boxkg::autodiff::NodeId;
using boxkg::autodiff::Tape;

namespace {

// Central finite differences through an arbitrary scalar function of a
// parameter vector; the independent oracle for every gradient assertion.
double max_rel_grad_error(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> params, const std::vector<double>& analytic,
                          double eps = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + eps;
        const double up = f(params);
        params[i] = saved - eps;
        const double down = f(params);
        params[i] = saved;
        const double numeric = (up - down) / (2 * eps);
        worst = std::max(worst,
                         std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
    }
    return worst;
}

}  // namespace

TEST_CASE("arithmetic ops forward and backward") {
    Tape tape;
    double ga = 0.0, gb = 0.0;
    const double va = 2.0, vb = 3.0;
    const NodeId a = tape.param({&va, 1}, &ga);
    const NodeId b = tape.param({&vb, 1}, &gb);

    SUBCASE("mul: product rule") {
        const NodeId out = tape.mul(a, b);
        CHECK(tape.value(out) == 6.0);
        tape.backward(out);
        CHECK(ga == 3.0);
        CHECK(gb == 2.0);
    }
    SUBCASE("div: quotient rule") {
        const double v1 = 1.0, v2 = 2.0;
        double g1 = 0.0, g2 = 0.0;
        const NodeId num = tape.param({&v1, 1}, &g1);
        const NodeId den = tape.param({&v2, 1}, &g2);
        const NodeId out = tape.div(num, den);
        CHECK(tape.value(out) == 0.5);
        tape.backward(out);
        CHECK(g1 == 0.5);
        CHECK(g2 == -0.25);
    }
    SUBCASE("add/sub") {
        const NodeId out = tape.sub(tape.add(a, b), b);
        CHECK(tape.value(out) == 2.0);
        tape.backward(out);
        CHECK(ga == 1.0);
        CHECK(gb == 0.0);
    }
}

TEST_CASE("shape and domain errors") {
    Tape tape;
    const std::vector<double> v2{1.0, 2.0};
    const NodeId scalar = tape.constant(1.0);
    const NodeId vec = tape.constant({v2.data(), v2.size()});
    CHECK_THROWS_AS(tape.add(scalar, vec), config_error);
    CHECK_THROWS_AS(tape.div(scalar, tape.constant(0.0)), numeric_error);
    CHECK_THROWS_AS(tape.log(tape.constant(-1.0)), numeric_error);
    CHECK_THROWS_AS(tape.log(tape.constant(0.0)), numeric_error);
    CHECK_THROWS_AS(tape.backward(vec), config_error);
}

TEST_CASE("softplus values and derivative") {
    Tape tape;
    SUBCASE("softplus(0; 1) = log 2, derivative 1/2") {
        double g = 0.0;
        const double v = 0.0;
        const NodeId x = tape.param({&v, 1}, &g);
        const NodeId out = tape.softplus(x, 1.0);
        CHECK(tape.value(out) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
        tape.backward(out);
        CHECK(g == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("saturated-high branch returns x") {
        const NodeId out = tape.softplus(tape.constant(100.0), 0.01);
        CHECK(tape.value(out) == doctest::Approx(100.0).epsilon(1e-12));
    }
    SUBCASE("saturated-low branch") {
        const NodeId out = tape.softplus(tape.constant(-100.0), 0.01);
        CHECK(tape.value(out) == doctest::Approx(0.01 * std::exp(-10000.0)));
        CHECK(tape.value(out) == 0.0);  // underflows, but no NaN/inf
    }
    SUBCASE("softplus(1 - 2*gamma; 1)") {
        // log(1 + exp(-0.15443132980306583)) via mpmath = 0.61890968743538139
        const NodeId out =
            tape.softplus(tape.constant(1.0 - 2.0 * boxkg::numeric::kEulerGamma), 1.0);
        CHECK(tape.value(out) == doctest::Approx(0.61890968743538139).epsilon(1e-12));
    }
}

TEST_CASE("logsumexp reduction") {
    Tape tape;
    SUBCASE("equal terms: a + beta*log 2") {
        const std::vector<double> v{0.7, 0.7};
        const NodeId out = tape.logsumexp(tape.constant({v.data(), v.size()}), 0.5);
        CHECK(tape.value(out) == doctest::Approx(0.7 + 0.5 * std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("dominance limit") {
        const std::vector<double> v{0.0, -1000.0};
        const NodeId out = tape.logsumexp(tape.constant({v.data(), v.size()}), 1.0);
        CHECK(std::abs(tape.value(out)) < 1e-12);
    }
    SUBCASE("sharp temperature picks the max") {
        const std::vector<double> v{0.3, 0.7};
        const NodeId out = tape.logsumexp(tape.constant({v.data(), v.size()}), 0.01);
        CHECK(tape.value(out) == doctest::Approx(0.7).epsilon(1e-10));
    }
    SUBCASE("empty vector is a configuration error") {
        const NodeId empty = tape.constant(std::span<const double>{});
        CHECK_THROWS_AS(tape.logsumexp(empty, 1.0), config_error);
    }
    SUBCASE("gradient is the softmax") {
        std::vector<double> g(2, 0.0);
        const std::vector<double> v{0.2, 0.9};
        const NodeId x = tape.param({v.data(), v.size()}, g.data());
        tape.backward(tape.logsumexp(x, 0.5));
        const double w0 = std::exp(0.2 / 0.5), w1 = std::exp(0.9 / 0.5);
        CHECK(g[0] == doctest::Approx(w0 / (w0 + w1)).epsilon(1e-12));
        CHECK(g[1] == doctest::Approx(w1 / (w0 + w1)).epsilon(1e-12));
        CHECK(g[0] + g[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("backward basics") {
    Tape tape;
    SUBCASE("root is its own parameter: grad 1") {
        double g = 0.0;
        const double v = 3.7;
        const NodeId p = tape.param({&v, 1}, &g);
        tape.backward(p);
        CHECK(g == 1.0);
    }
    SUBCASE("constant root reaches no parameters") {
        double g = 123.0;
        const double v = 1.0;
        g = 0.0;
        tape.param({&v, 1}, &g);
        tape.backward(tape.constant(5.0));
        CHECK(g == 0.0);
    }
    SUBCASE("fan-out accumulates") {
        double g = 0.0;
        const double v = 3.0;
        const NodeId p = tape.param({&v, 1}, &g);
        tape.backward(tape.add(tape.mul(p, p), p));  // d(x^2 + x)/dx = 2x + 1
        CHECK(g == doctest::Approx(7.0).epsilon(1e-15));
    }
}

TEST_CASE("random DAG of mixed ops matches finite differences") {
    // 20 random graphs of ~50 ops over 6 parameters
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        std::vector<double> params(6);
        for (double& p : params) p = rng.uniform(0.25, 2.0);

        auto build = [&seed](Tape& tape, const std::vector<double>& values,
                             std::vector<double>* grads) -> NodeId {
            Rng op_rng(seed + 1000);
            std::vector<NodeId> pool;
            for (std::size_t i = 0; i < values.size(); ++i) {
                pool.push_back(tape.param({&values[i], 1},
                                          grads != nullptr ? &(*grads)[i] : nullptr));
            }
            // grads may be null for value-only evaluation
            NodeId acc = tape.constant(0.0);
            for (int step = 0; step < 50; ++step) {
                const NodeId a = pool[op_rng.below(pool.size())];
                const NodeId b = pool[op_rng.below(pool.size())];
                NodeId out;
                switch (op_rng.below(7)) {
                    case 0: out = tape.add(a, b); break;
                    case 1: out = tape.sub(a, b); break;
                    case 2: out = tape.mul(a, b); break;
                    // exp/softplus keep operands positive enough for div/log
                    case 3: out = tape.div(a, tape.add_const(tape.mul(b, b), 0.5)); break;
                    case 4: out = tape.softplus(a, 0.7); break;
                    case 5: out = tape.log(tape.add_const(tape.mul(a, a), 0.5)); break;
                    default: out = tape.logsumexp_pair(a, b, 0.3); break;
                }
                pool.push_back(out);
                acc = tape.add(acc, tape.scale(out, 0.1));
            }
            // squash so values stay O(1) regardless of graph shape
            return tape.softplus(tape.scale(acc, 0.05), 1.0);
        };

        Tape tape;
        std::vector<double> grads(params.size(), 0.0);
        tape.backward(build(tape, params, &grads));

        const double worst = max_rel_grad_error(
            [&](const std::vector<double>& p) {
                Tape t2;
                return t2.value(build(t2, p, nullptr));
            },
            params, grads);
        CAPTURE(seed);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("determinism: identical inputs give bit-identical values and gradients") {
    auto run = [](double* grad_out) {
        Tape tape;
        const std::vector<double> v{0.3, 1.7, -0.4};
        std::vector<double> g(3, 0.0);
        const NodeId x = tape.param({v.data(), v.size()}, g.data());
        const NodeId out = tape.sum(tape.log_softplus(tape.mul(x, x), 0.05));
        tape.backward(out);
        std::copy(g.begin(), g.end(), grad_out);
        return tape.value(out);
    };
    double g1[3], g2[3];
    const double v1 = run(g1), v2 = run(g2);
    CHECK(v1 == v2);
    for (int i = 0; i < 3; ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("linearity: grad of c*loss is c*grad for a power-of-two c") {
    auto grads_scaled = [](double c, double* out) {
        Tape tape;
        const std::vector<double> v{0.9, -0.2};
        std::vector<double> g(2, 0.0);
        const NodeId x = tape.param({v.data(), v.size()}, g.data());
        NodeId loss = tape.sum(tape.softplus(x, 0.5));
        if (c != 1.0) loss = tape.scale(loss, c);
        tape.backward(loss);
        out[0] = g[0];
        out[1] = g[1];
    };
    double base[2], scaled[2];
    grads_scaled(1.0, base);
    grads_scaled(2.0, scaled);
    CHECK(scaled[0] == 2.0 * base[0]);
    CHECK(scaled[1] == 2.0 * base[1]);
}

TEST_CASE("tape clear resets state but keeps usability") {
    Tape tape;
    tape.constant(1.0);
    tape.constant(2.0);
    CHECK(tape.node_count() == 2);
    tape.clear();
    CHECK(tape.node_count() == 0);
    const NodeId c = tape.constant(4.0);
    CHECK(tape.value(c) == 4.0);
}
