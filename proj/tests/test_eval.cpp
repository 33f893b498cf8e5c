#include <doctest.h>

#include <cmath>
#include <random>

#include "support/fixtures.hpp"
#include "toad/codec.hpp"
#include "toad/error.hpp"
#include "toad/eval.hpp"
#include "toad/trainer.hpp"

using namespace toad;

TEST_CASE("metrics") {
    const std::vector<double> y{1.0, 2.0, 3.0, 4.0};
    CHECK(r2_score(y, y) == 1.0);
    CHECK(r2_score(y, std::vector<double>(4, 2.5)) == 0.0);
    CHECK_THROWS_AS(r2_score(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 2.0}), UndefinedMetric);

    CHECK(accuracy(std::vector<double>{0, 1, 1, 0}, std::vector<double>{0, 1, 1, 0}) == 1.0);
    CHECK(accuracy(std::vector<double>{0, 1, 1, 0}, std::vector<double>{0, 1, 1, 1}) == 0.75);
}

TEST_CASE("score checks the task") {
    const Dataset reg({0.0, 1.0}, {0.0, 1.0}, 1, TaskKind::regression());
    Ensemble e;
    e.task = TaskKind::binary();
    e.feature_count = 1;
    CHECK_THROWS_AS(score(e, reg), ConfigError);
}

namespace {

Ensemble stump() {
    Ensemble e;
    e.feature_count = 1;
    e.tables.add_feature({0, 5, NumericType::Float, {0.5}});
    e.tables.add_leaf_value(-1.0f);
    e.tables.add_leaf_value(1.0f);
    Tree t;
    t.set_node(0, InternalNode{0, 0});
    t.set_node(1, LeafNode{0});
    t.set_node(2, LeafNode{1});
    e.trees.push_back(t);
    return e;
}

GridRow row(double metric, std::size_t bytes) {
    GridRow r;
    r.report.metric_value = metric;
    r.report.toad_bytes = bytes;
    return r;
}

bool dominates(const GridRow& a, const GridRow& b) {
    return a.report.metric_value >= b.report.metric_value && a.report.toad_bytes <= b.report.toad_bytes &&
           (a.report.metric_value > b.report.metric_value || a.report.toad_bytes < b.report.toad_bytes);
}

}  // namespace

TEST_CASE("baseline memory") {
    Ensemble e = stump();
    CHECK(baseline_memory(e, 128) == 48);
    CHECK(baseline_memory(e, 64) == 24);
    CHECK(baseline_memory(Ensemble{}, 128) == 0);
    CHECK_THROWS_AS(baseline_memory(e, 32), ConfigError);

    std::mt19937_64 rng(6);
    for (int i = 0; i < 100; ++i) {
        const Ensemble r = testing::random_ensemble(rng);
        CHECK(baseline_memory(r, 128) == 2 * baseline_memory(r, 64));
    }
}

TEST_CASE("reuse factor") {
    Ensemble e = stump();
    CHECK(reuse_factor(e) == 1.0);  // 3 usages, 3 distinct values
    CHECK_THROWS_AS(reuse_factor(Ensemble{}), ConfigError);

    // 21 usages over 14 values: seven stumps sharing one threshold
    Ensemble shared;
    shared.feature_count = 1;
    shared.tables.add_feature({0, 5, NumericType::Float, {0.5}});
    for (int k = 0; k < 13; ++k) shared.tables.add_leaf_value(static_cast<float>(k + 1));
    for (std::uint32_t k = 0; k < 7; ++k) {
        Tree t;
        t.set_node(0, InternalNode{0, 0});
        t.set_node(1, LeafNode{(2 * k) % 13});
        t.set_node(2, LeafNode{(2 * k + 1) % 13});
        shared.trees.push_back(t);
    }
    CHECK(reuse_factor(shared) == 1.5);

    // 20 usages over 10 values: six stumps and two single leaves
    Ensemble twice;
    twice.feature_count = 1;
    twice.tables.add_feature({0, 5, NumericType::Float, {0.5, 1.5}});
    for (int k = 0; k < 8; ++k) twice.tables.add_leaf_value(static_cast<float>(k + 1));
    for (std::uint32_t k = 0; k < 6; ++k) {
        Tree t;
        t.set_node(0, InternalNode{0, k % 2});
        t.set_node(1, LeafNode{(2 * k) % 8});
        t.set_node(2, LeafNode{(2 * k + 1) % 8});
        twice.trees.push_back(t);
    }
    Tree single;
    single.set_node(0, LeafNode{6});
    twice.trees.push_back(single);
    twice.trees.push_back(single);
    CHECK(twice.internal_count() + twice.leaf_count() == 20);
    CHECK(reuse_factor(twice) == 2.0);
}

TEST_CASE("evaluate fills the report") {
    Ensemble e = stump();
    const Dataset ds({0.0, 1.0, 0.2, 0.9}, {-1.0, 1.0, -1.0, 1.0}, 1, TaskKind::regression());
    TrainConfig config;
    config.penalty_threshold = 4.0;
    const EvalReport r = evaluate(e, ds, config);
    CHECK(r.metric == Metric::R2);
    CHECK(r.metric_value == 1.0);
    CHECK(r.toad_bytes == encode(e).bytes.size());
    CHECK(r.baseline32_bytes == 48);
    CHECK(r.baseline16_bytes == 24);
    CHECK(r.node_count == 1);
    CHECK(r.leaf_count == 2);
    CHECK(r.global_threshold_count == 1);
    CHECK(r.global_leaf_value_count == 2);
    CHECK(r.feature_count == 1);
    CHECK(r.reuse_factor == 1.0);
    CHECK(r.config.penalty_threshold == 4.0);
    CHECK(std::isnan(evaluate(Ensemble{.feature_count = 1}, ds, config).reuse_factor));
}

TEST_CASE("pareto filter") {
    SUBCASE("dominated row removed") {
        const auto f = pareto_filter({row(0.9, 10240), row(0.8, 12288)});
        REQUIRE(f.size() == 1);
        CHECK(f[0].report.metric_value == 0.9);
    }
    SUBCASE("trade-off kept") {
        const auto f = pareto_filter({row(0.95, 20), row(0.9, 10)});
        REQUIRE(f.size() == 2);
        CHECK(f[0].report.toad_bytes == 10);
        CHECK(f[1].report.toad_bytes == 20);
    }
    SUBCASE("identical rows collapse") {
        GridRow a = row(0.5, 7);
        a.penalty_feature = 1.0;
        GridRow b = row(0.5, 7);
        b.penalty_feature = 2.0;
        const auto f = pareto_filter({a, b, row(0.5, 7)});
        REQUIRE(f.size() == 1);
        CHECK(f[0].penalty_feature == 1.0);
    }
    SUBCASE("random antichain") {
        std::mt19937_64 rng(10);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<GridRow> rows;
            for (int i = 0; i < 60; ++i) {
                rows.push_back(row(std::uniform_int_distribution<int>(0, 20)(rng) / 20.0,
                                   std::uniform_int_distribution<std::size_t>(10, 40)(rng)));
            }
            const auto f = pareto_filter(rows);
            for (const auto& a : f) {
                for (const auto& b : f) CHECK_FALSE(dominates(a, b));
            }
            for (const auto& r : rows) {
                bool covered = false;
                for (const auto& a : f) {
                    covered = covered || dominates(a, r) ||
                              (a.report.metric_value == r.report.metric_value && a.report.toad_bytes == r.report.toad_bytes);
                }
                CHECK(covered);
            }
            for (std::size_t i = 1; i < f.size(); ++i) CHECK(f[i - 1].report.toad_bytes < f[i].report.toad_bytes);
        }
    }
}

TEST_CASE("best under budget") {
    const std::vector<GridRow> rows{row(0.7, 900), row(0.9, 1500), row(0.8, 1000), row(0.8, 950)};
    const auto best = best_under_budget(rows, 1024);
    REQUIRE(best);
    CHECK(best->report.metric_value == 0.8);
    CHECK(best->report.toad_bytes == 950);
    CHECK_FALSE(best_under_budget(rows, 100));
}

TEST_CASE("penalty grid") {
    const auto g = penalty_grid(-10, 15);
    CHECK(g.size() == 27);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == std::ldexp(1.0, -10));
    CHECK(g.back() == 32768.0);
    CHECK(penalty_grid(-10, 15, false).size() == 26);
    // 26 x 26 penalties per tree setting
    GridSpec full{penalty_grid(-10, 15, false), penalty_grid(-10, 15, false), {256}, {2}};
    CHECK(full.size() == 676);
}

TEST_CASE("grid search rows, order, budget and determinism") {
    const Dataset ds = testing::load_named("breast_cancer");
    auto [train, test] = split_train_test(ds, 0.2, 42);
    TrainConfig base;
    GridSpec grid{{0.0, 1.0}, {0.0, 1.0}, {8}, {2}};
    const auto rows = grid_search(train, test, grid, base, std::nullopt, 1);
    REQUIRE(rows.size() == 4);
    CHECK(rows[1].penalty_feature == 0.0);
    CHECK(rows[1].penalty_threshold == 1.0);
    CHECK(rows[2].penalty_feature == 1.0);
    CHECK(rows[2].penalty_threshold == 0.0);
    for (const auto& r : rows) {
        CHECK(r.report.metric == Metric::Accuracy);
        CHECK(r.report.config.penalty_feature == r.penalty_feature);
        CHECK(r.report.toad_bytes <= r.report.baseline32_bytes);
    }

    const auto parallel = grid_search(train, test, grid, base, std::nullopt, 4);
    CHECK(grid_csv(parallel) == grid_csv(rows));

    GridSpec wide{{0.0, 0.25}, {0.0, 0.25, 4.0}, {64}, {2, 3}};
    const auto capped = grid_search(train, test, wide, base, std::size_t{256}, 3);
    CHECK_FALSE(capped.empty());
    for (const auto& r : capped) CHECK(r.report.toad_bytes <= 256);

    const auto all = grid_search(ds, grid, base);
    CHECK(grid_csv(all) == grid_csv(rows));
}

TEST_CASE("report formats") {
    GridRow r = row(0.5, 12);
    r.max_iterations = 4;
    r.max_depth = 2;
    r.report.reuse_factor = 1.25;
    const std::string csv = grid_csv({r});
    CHECK(csv.rfind(std::string(kGridCsvHeader) + "\n", 0) == 0);
    CHECK(csv.find("0,0,4,2,accuracy,0.5,12,") != std::string::npos);
    const auto j = grid_json({r});
    CHECK(j.is_array());
    CHECK(j[0]["report"]["toad_bytes"] == 12);
    CHECK(j[0]["report"]["config"].contains("tinygbdt_penalty_threshold"));
}
