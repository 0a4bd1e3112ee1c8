#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "boxkg/autodiff.hpp"
#include "boxkg/constraints.hpp"
#include "boxkg/errors.hpp"
#include "boxkg/training.hpp"

using boxkg::Rng;
using boxkg::config_error;
using boxkg::parse_error;
using namespace boxkg::constraints;
using boxkg::autodiff::Tape;
using boxkg::data::Dataset;
using boxkg::data::TripleList;
using boxkg::geometry::GumbelBox;
using boxkg::model::GraphBuilder;
using boxkg::model::ParameterStore;

namespace {

Dataset three_relation_dataset() {
    TripleList train{{0, 0, 1, 1.0}, {1, 1, 2, 1.0}, {0, 2, 2, 1.0}};
    return Dataset::from_parts(train, {}, {}, {"x", "y", "z"}, {"r1", "r2", "r3"});
}

std::string write_rules(const std::string& name, const std::string& content) {
    const auto dir = std::filesystem::temp_directory_path() / "boxkg_rules_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::ofstream f(path, std::ios::trunc);
    f << content;
    return path.string();
}

// fixed boxes with sides well above 10*beta for beta = 1e-3
std::vector<GumbelBox> wide_boxes() {
    std::vector<GumbelBox> boxes;
    boxes.emplace_back(std::vector<double>{0.2, 0.8}, std::vector<double>{0.3, 0.25});
    boxes.emplace_back(std::vector<double>{-0.5, 0.1}, std::vector<double>{0.4, 0.2});
    boxes.emplace_back(std::vector<double>{0.0, 0.0}, std::vector<double>{0.25, 0.5});
    boxes.emplace_back(std::vector<double>{1.0, -0.3}, std::vector<double>{0.2, 0.35});
    return boxes;
}

}  // namespace

TEST_CASE("load_constraints") {
    const Dataset ds = three_relation_dataset();
    SUBCASE("parses both declaration kinds and comments") {
        const auto path = write_rules("ok.rules",
                                      "# header comment\n"
                                      "transitive r1\n"
                                      "compose r1 r2 -> r3  # trailing comment\n");
        const ConstraintSet rules = load_constraints(path, ds);
        REQUIRE(rules.transitive.size() == 1);
        CHECK(rules.transitive[0] == 0);
        REQUIRE(rules.compositions.size() == 1);
        CHECK(rules.compositions[0] == std::make_tuple(0u, 1u, 2u));
    }
    SUBCASE("unresolvable names are hard errors") {
        const auto path = write_rules("unknown.rules", "transitive nosuch\n");
        CHECK_THROWS_AS(load_constraints(path, ds), boxkg::lookup_error);
    }
    SUBCASE("duplicates are rejected") {
        const auto path = write_rules("dup.rules", "transitive r1\ntransitive r1\n");
        CHECK_THROWS_AS(load_constraints(path, ds), parse_error);
    }
    SUBCASE("malformed lines are rejected") {
        const auto path = write_rules("mal.rules", "compose r1 r2 r3\n");
        CHECK_THROWS_AS(load_constraints(path, ds), parse_error);
    }
}

TEST_CASE("sample_boxes") {
    const ParameterStore store = boxkg::model::init_parameters(8, 1, 3, 0.01, 5);
    SUBCASE("contract: n boxes, positive offsets") {
        Rng rng(1);
        const auto boxes = sample_boxes(10, 3, rng, store);
        REQUIRE(boxes.size() == 10);
        for (const GumbelBox& b : boxes) {
            REQUIRE(b.dim() == 3);
            for (double off : b.off) CHECK(off > 0.0);
        }
    }
    SUBCASE("deterministic given the seed state") {
        Rng rng1(9), rng2(9);
        const auto a = sample_boxes(12, 3, rng1, store);
        const auto b = sample_boxes(12, 3, rng2, store);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].cen == b[i].cen);
            CHECK(a[i].off == b[i].off);
        }
    }
    SUBCASE("entity half copies current store values exactly") {
        Rng rng(9);
        const auto boxes = sample_boxes(12, 3, rng, store);
        // second half must each match some entity box bit-for-bit
        for (std::size_t i = 6; i < 12; ++i) {
            bool found = false;
            for (std::size_t e = 0; e < store.n_entities() && !found; ++e) {
                const GumbelBox eb = store.entity_box(e);
                found = eb.cen == boxes[i].cen && eb.off == boxes[i].off;
            }
            CHECK(found);
        }
    }
}

TEST_CASE("transitivity_loss") {
    ParameterStore store(3, 1, 2, 1e-3);
    const auto boxes = wide_boxes();

    SUBCASE("expanding tail transform satisfies containment") {
        for (double& d : store.g_delta(0)) d = std::log(4.0);
        Tape tape;
        GraphBuilder graph(tape, store);
        const auto loss = transitivity_loss(graph, 0, boxes);
        CHECK(tape.value(loss) < 1e-3);
        CHECK(tape.value(loss) >= 0.0);
    }
    SUBCASE("disjoint tail transform costs ~1 per sample") {
        for (double& t : store.g_tau(0)) t = 50.0;
        Tape tape;
        GraphBuilder graph(tape, store);
        const auto loss = transitivity_loss(graph, 0, boxes);
        CHECK(tape.value(loss) == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("invariant to box order") {
        for (double& d : store.g_delta(0)) d = std::log(1.5);
        auto value_for = [&](const std::vector<GumbelBox>& sample) {
            Tape tape;
            GraphBuilder graph(tape, store);
            return tape.value(transitivity_loss(graph, 0, sample));
        };
        auto reversed = boxes;
        std::reverse(reversed.begin(), reversed.end());
        CHECK(value_for(boxes) == doctest::Approx(value_for(reversed)).epsilon(1e-12));
    }
    SUBCASE("empty sample is a configuration error") {
        Tape tape;
        GraphBuilder graph(tape, store);
        CHECK_THROWS_AS(transitivity_loss(graph, 0, {}), config_error);
    }
}

TEST_CASE("composition_loss") {
    ParameterStore store(3, 3, 2, 1e-3);
    const auto boxes = wide_boxes();
    auto set_transform = [&](std::size_t r, double tau0, double tau1, double delta) {
        store.f_tau(r)[0] = tau0;
        store.f_tau(r)[1] = tau1;
        for (double& d : store.f_delta(r)) d = delta;
        store.g_tau(r)[0] = -tau0;
        store.g_tau(r)[1] = tau1;
        for (double& d : store.g_delta(r)) d = -delta;
    };

    SUBCASE("exactly composed transforms give near-zero loss") {
        set_transform(0, 0.1, -0.2, 0.05);
        set_transform(1, 0.3, 0.15, -0.1);
        set_transform(2, 0.4, -0.05, -0.05);  // sums of the two above
        Tape tape;
        GraphBuilder graph(tape, store);
        const auto loss = composition_loss(graph, 0, 1, 2, boxes);
        CHECK(tape.value(loss) < 1e-2);
    }
    SUBCASE("disjoint composite costs ~2 per mapping pair") {
        set_transform(0, 0.0, 0.0, 0.0);
        set_transform(1, 0.0, 0.0, 0.0);
        store.f_tau(2)[0] = 70.0;  // f_r3 far away; g_r3 still matches
        Tape tape;
        GraphBuilder graph(tape, store);
        const auto loss = composition_loss(graph, 0, 1, 2, boxes);
        // 2 from the disjoint f pair plus the g pair's tiny self-shrinkage
        CHECK(tape.value(loss) == doctest::Approx(2.0).epsilon(1e-3));
    }
    SUBCASE("the symmetric distance is order-independent") {
        set_transform(0, 0.2, 0.0, 0.1);
        set_transform(1, 0.0, 0.2, 0.0);
        set_transform(2, 0.15, 0.25, 0.12);  // deliberately off
        auto loss_with = [&](std::uint32_t ra, std::uint32_t rb) {
            // compose(f_ra, f_rb) equals compose(f_rb, f_ra), so swapping the
            // first two rule slots must not change the loss
            Tape tape;
            GraphBuilder graph(tape, store);
            return tape.value(composition_loss(graph, ra, rb, 2, boxes));
        };
        CHECK(loss_with(0, 1) == doctest::Approx(loss_with(1, 0)).epsilon(1e-12));
    }
}

TEST_CASE("driving the composition loss to zero aligns the transform parameters") {
    ParameterStore store = boxkg::model::init_parameters(6, 3, 2, 0.05, 1);
    Rng init(78);
    for (std::size_t r = 0; r < 3; ++r) {
        for (double& v : store.f_tau(r)) v = init.uniform(-0.3, 0.3);
        for (double& v : store.f_delta(r)) v = init.uniform(-0.3, 0.3);
        for (double& v : store.g_tau(r)) v = init.uniform(-0.3, 0.3);
        for (double& v : store.g_delta(r)) v = init.uniform(-0.3, 0.3);
    }
    boxkg::training::AdamState adam(store.parameter_count());
    Rng rng(1);
    Tape tape;
    double value = 1.0;
    int steps = 0;
    while (value > 1e-4 && steps < 6000) {
        tape.clear();
        store.zero_gradients();
        GraphBuilder graph(tape, store);
        const auto boxes = sample_boxes(16, 2, rng, store);
        const auto loss = composition_loss(graph, 0, 1, 2, boxes);
        value = tape.value(loss);
        tape.backward(loss);
        adam.step(store.all_parameters(), store.all_gradients(), 0.01);
        ++steps;
    }
    REQUIRE(value <= 1e-4);
    const auto composed = boxkg::model::compose(store.head_transform(0), store.head_transform(1));
    const auto direct = store.head_transform(2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(std::abs(composed.tau[i] - direct.tau[i]) < 0.05);
        CHECK(std::abs(composed.delta[i] - direct.delta[i]) < 0.05);
    }
}

TEST_CASE("constraint_loss assembly") {
    ParameterStore store(3, 3, 2, 1e-3);
    for (double& d : store.g_delta(0)) d = std::log(2.0);
    const auto boxes = wide_boxes();

    SUBCASE("empty set contributes zero") {
        Tape tape;
        GraphBuilder graph(tape, store);
        CHECK(tape.value(constraint_loss(graph, {}, boxes, 0.1, 0.1)) == 0.0);
    }
    SUBCASE("zero weights contribute zero and no gradient") {
        ConstraintSet rules;
        rules.transitive.push_back(0);
        rules.compositions.emplace_back(0, 1, 2);
        Tape tape;
        store.zero_gradients();
        GraphBuilder graph(tape, store);
        const auto loss = constraint_loss(graph, rules, boxes, 0.0, 0.0);
        CHECK(tape.value(loss) == 0.0);
        tape.backward(loss);
        for (double g : store.all_gradients()) CHECK(g == 0.0);
    }
    SUBCASE("single transitive rule scales its loss by w_tr") {
        ConstraintSet rules;
        rules.transitive.push_back(0);
        Tape tape;
        GraphBuilder graph(tape, store);
        const double direct = tape.value(transitivity_loss(graph, 0, boxes));
        Tape tape2;
        GraphBuilder graph2(tape2, store);
        const double assembled =
            tape2.value(constraint_loss(graph2, rules, boxes, 0.25, 0.0));
        CHECK(assembled == doctest::Approx(0.25 * direct).epsilon(1e-15));
    }
    SUBCASE("losses are bounded by the term count") {
        ConstraintSet rules;
        rules.transitive.push_back(0);
        rules.compositions.emplace_back(0, 1, 2);
        Tape tape;
        GraphBuilder graph(tape, store);
        const double value = tape.value(constraint_loss(graph, rules, boxes, 1.0, 1.0));
        CHECK(value >= 0.0);
        CHECK(value <= 1.0 + 4.0);  // 1 per L_tr sample, 4 per composition sample
    }
}
