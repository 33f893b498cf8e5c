#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "support/fixtures.hpp"
#include "toad/error.hpp"
#include "toad/model.hpp"

using namespace toad;

TEST_CASE("feature interning") {
    GlobalTables t;
    auto a = t.intern_feature(3);
    CHECK(a.ref == 0);
    CHECK(a.novel);
    auto again = t.intern_feature(3);
    CHECK(again.ref == 0);
    CHECK_FALSE(again.novel);
    t.intern_feature(7);
    auto c = t.intern_feature(5);
    CHECK(c.ref == 2);
    CHECK(c.novel);
    CHECK(t.find_feature(7) == std::optional<std::size_t>(1));
    CHECK_FALSE(t.find_feature(9).has_value());
}

TEST_CASE("threshold interning") {
    GlobalTables t;
    const auto f = t.intern_feature(0).ref;
    CHECK(t.intern_threshold(f, 0.5).novel);
    auto reuse = t.intern_threshold(f, 0.5);
    CHECK(reuse.ref == 0);
    CHECK_FALSE(reuse.novel);
    auto fresh = t.intern_threshold(f, 1.5);
    CHECK(fresh.ref == 1);
    CHECK(fresh.novel);

    const auto zero = t.intern_threshold(f, 0.0);
    auto neg = t.intern_threshold(f, -0.0);
    CHECK(neg.ref == zero.ref);
    CHECK_FALSE(neg.novel);
    CHECK_FALSE(std::signbit(t.feature(f).thresholds[zero.ref]));

    CHECK_THROWS_AS(t.intern_threshold(f, std::numeric_limits<double>::quiet_NaN()), ConfigError);
    CHECK_THROWS_AS(t.intern_threshold(f, std::numeric_limits<double>::infinity()), ConfigError);
    CHECK_THROWS_AS(t.intern_threshold(5, 1.0), ConfigError);
    CHECK(t.threshold_count() == 3);
    CHECK(t.max_threshold_count() == 3);
}

TEST_CASE("leaf value interning at float precision") {
    GlobalTables t;
    CHECK(t.intern_leaf_value(0.25) == 0);
    CHECK(t.intern_leaf_value(0.25) == 0);
    // 0.25 + 2^-40 rounds to 0.25 in single precision (ulp there is 2^-25)
    const double nearby = 0.25 + std::ldexp(1.0, -40);
    REQUIRE(nearby != 0.25);
    REQUIRE(static_cast<float>(nearby) == 0.25f);
    CHECK(t.intern_leaf_value(nearby) == 0);
    CHECK(t.intern_leaf_value(0.3) == 1);
    CHECK(t.intern_leaf_value(-0.0) == t.intern_leaf_value(0.0));
    CHECK_THROWS_AS(t.intern_leaf_value(std::numeric_limits<double>::infinity()), ConfigError);
    CHECK_THROWS_AS(t.intern_leaf_value(1e300), ConfigError);  // overflows float
}

TEST_CASE("interning is idempotent and lengths are monotone") {
    std::mt19937_64 rng(5);
    GlobalTables t;
    std::size_t features = 0, thresholds = 0, leaves = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto input = std::uniform_int_distribution<std::size_t>(0, 9)(rng);
        const auto f = t.intern_feature(input);
        CHECK(f.novel == (t.features().size() > features));
        features = t.features().size();
        const double mu = std::uniform_int_distribution<int>(0, 20)(rng) * 0.25;
        const auto th = t.intern_threshold(f.ref, mu);
        CHECK(th.novel == (t.threshold_count() > thresholds));
        thresholds = t.threshold_count();
        const auto th2 = t.intern_threshold(f.ref, mu);
        CHECK(th2.ref == th.ref);
        CHECK_FALSE(th2.novel);
        t.intern_leaf_value(std::uniform_int_distribution<int>(-30, 30)(rng) / 8.0);
        CHECK(t.leaf_values().size() >= leaves);
        leaves = t.leaf_values().size();
    }
    CHECK(features == 10);
}

TEST_CASE("add_feature rejects inconsistencies without side effects") {
    GlobalTables t;
    t.add_feature({2, 5, NumericType::Float, {1.0, 2.0}});
    CHECK_THROWS_AS(t.add_feature({2, 5, NumericType::Float, {3.0}}), ConfigError);
    CHECK_THROWS_AS(t.add_feature({4, 5, NumericType::Float, {}}), ConfigError);
    CHECK_THROWS_AS(t.add_feature({4, 5, NumericType::Float, {1.0, 1.0}}), ConfigError);
    CHECK(t.features().size() == 1);
    CHECK_FALSE(t.find_feature(4).has_value());
    CHECK(t.add_feature({4, 5, NumericType::Float, {1.0}}) == 1);
    t.add_leaf_value(0.5f);
    CHECK_THROWS_AS(t.add_leaf_value(0.5f), ConfigError);
}

TEST_CASE("heap indexing") {
    CHECK(Tree::left_child(0) == 1);
    CHECK(Tree::right_child(0) == 2);
    CHECK(Tree::left_child(2) == 5);
    CHECK(Tree::depth_of(0) == 0);
    CHECK(Tree::depth_of(2) == 1);
    CHECK(Tree::depth_of(3) == 2);
    CHECK(Tree::depth_of(6) == 2);
    CHECK(Tree::depth_of(7) == 3);
}

TEST_CASE("empty and single-leaf ensembles") {
    Ensemble e;
    e.feature_count = 2;
    const std::vector<double> x{1.0, 2.0};
    CHECK(predict_raw(e, x) == std::vector<double>{0.0});

    e.tables.add_leaf_value(0.7f);
    Tree t;
    t.set_node(0, LeafNode{0});
    e.trees.push_back(t);
    CHECK(predict_raw(e, x)[0] == static_cast<double>(0.7f));
    CHECK_THROWS_AS(predict_raw(e, std::vector<double>{1.0}), ConfigError);
}

TEST_CASE("sample routing against a hand traced oracle") {
    const Ensemble e = testing::sample_ensemble();
    validate(e);
    CHECK(e.internal_count() == 5);
    CHECK(e.leaf_count() == 7);
    const float v[] = {0.5f, -0.25f, 1.0f, 0.125f, -2.0f};
    auto oracle = [&](const std::vector<double>& x) {
        // t1: x0 <= 2 ? (x1 <= 0 ? v0 : v1) : (x0 <= 3 ? v2 : v3)
        const float a = x[0] <= 2 ? (x[1] <= 0 ? v[0] : v[1]) : (x[0] <= 3 ? v[2] : v[3]);
        // t2: x3 <= 0.5 ? v3 : (x1 <= 1 ? v4 : v0)
        const float b = x[3] <= 0.5 ? v[3] : (x[1] <= 1 ? v[4] : v[0]);
        return static_cast<double>(a) + static_cast<double>(b);
    };
    for (double x0 : {1.0, 2.0, 2.5, 3.0, 4.0}) {
        for (double x1 : {-1.0, 0.0, 0.5, 1.0, 2.0}) {
            for (double x3 : {0.0, 0.5, 0.75}) {
                const std::vector<double> x{x0, x1, 99.0, x3};
                CHECK(predict_raw(e, x)[0] == oracle(x));
            }
        }
    }
}

TEST_CASE("predict_raw equals a naive per-tree traversal") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const Ensemble e = testing::random_ensemble(rng);
        const auto classes = static_cast<std::size_t>(e.class_count());
        for (const auto& x : testing::probe_inputs(e, rng, 8)) {
            std::vector<double> expected(classes, 0.0);
            for (std::size_t k = 0; k < e.trees.size(); ++k) {
                std::uint64_t i = 0;
                while (std::holds_alternative<InternalNode>(e.trees[k].node(i))) {
                    const auto& n = std::get<InternalNode>(e.trees[k].node(i));
                    const auto& f = e.tables.features()[n.feature_ref];
                    i = x[f.input_index] <= f.thresholds[n.threshold_ref] ? 2 * i + 1 : 2 * i + 2;
                }
                expected[k % classes] += e.tables.leaf_values()[std::get<LeafNode>(e.trees[k].node(i)).leaf_ref];
            }
            CHECK(predict_raw(e, x) == expected);
        }
    }
}

TEST_CASE("link functions") {
    Ensemble bin;
    bin.task = TaskKind::binary();
    bin.feature_count = 1;
    const std::vector<double> x{0.0};
    auto p = predict(bin, x);
    CHECK(p.probabilities[1] == 0.5);
    CHECK(p.value == 1.0);

    bin.tables.add_leaf_value(2.0f);
    Tree t;
    t.set_node(0, LeafNode{0});
    bin.trees.push_back(t);
    p = predict(bin, x);
    CHECK(p.probabilities[1] == doctest::Approx(0.8808).epsilon(1e-4));
    CHECK(p.probabilities[1] == 1.0 / (1.0 + std::exp(-2.0)));

    Ensemble multi;
    multi.task = TaskKind::multiclass(3);
    multi.feature_count = 1;
    const auto m = predict(multi, x);
    for (double q : m.probabilities) CHECK(q == doctest::Approx(1.0 / 3.0));
    CHECK(m.value == 0.0);
}

TEST_CASE("multiclass argmax is shift invariant") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> dist(0.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> z(4);
        for (double& v : z) v = dist(rng);
        const auto p = softmax(z);
        const double shift = dist(rng);
        std::vector<double> shifted(z);
        for (double& v : shifted) v += shift;
        const auto q = softmax(shifted);
        const auto argmax = [](const std::vector<double>& v) {
            return std::max_element(v.begin(), v.end()) - v.begin();
        };
        CHECK(argmax(p) == argmax(q));
    }
    // ties go to the first maximum
    CHECK(softmax(std::vector<double>{1.0, 3.0, 3.0})[1] == softmax(std::vector<double>{1.0, 3.0, 3.0})[2]);
}

TEST_CASE("validate catches structural errors") {
    Ensemble e = testing::sample_ensemble();
    SUBCASE("orphan node") { e.trees[1].set_node(11, LeafNode{0}); }
    SUBCASE("missing child") {
        Tree t;
        t.set_node(0, InternalNode{0, 0});
        t.set_node(1, LeafNode{0});
        e.trees[1] = t;
    }
    SUBCASE("bad leaf ref") { e.trees[0].set_node(3, LeafNode{9}); }
    SUBCASE("bad threshold ref") { e.trees[0].set_node(0, InternalNode{2, 1}); }
    SUBCASE("too deep") { e.max_depth = 1; }
    SUBCASE("input index beyond d") { e.feature_count = 3; }
    SUBCASE("multiclass tree count") {
        e.task = TaskKind::multiclass(3);
    }
    CHECK_THROWS_AS(validate(e), ConfigError);
}
