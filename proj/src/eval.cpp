#include "toad/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "toad/codec.hpp"
#include "toad/error.hpp"

namespace toad {

Metric metric_for(const TaskKind& task) { return task.is_classification() ? Metric::Accuracy : Metric::R2; }

std::string to_string(Metric m) { return m == Metric::Accuracy ? "accuracy" : "r2"; }

double accuracy(std::span<const double> truth, std::span<const double> predicted) {
    if (truth.size() != predicted.size() || truth.empty()) throw ConfigError("accuracy needs aligned, nonempty inputs");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == predicted[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double r2_score(std::span<const double> truth, std::span<const double> predicted) {
    if (truth.size() != predicted.size() || truth.empty()) throw ConfigError("r2 needs aligned, nonempty inputs");
    double mean = 0.0;
    for (double y : truth) mean += y;
    mean /= static_cast<double>(truth.size());
    double residual = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        residual += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
        total += (truth[i] - mean) * (truth[i] - mean);
    }
    if (total == 0.0) throw UndefinedMetric("R^2 is undefined for labels without variance");
    return 1.0 - residual / total;
}

double score(const Ensemble& e, const Dataset& ds) {
    if (e.task != ds.task()) {
        throw ConfigError("model task " + to_string(e.task) + " does not match data task " + to_string(ds.task()));
    }
    std::vector<double> predicted(ds.row_count());
    for (std::size_t i = 0; i < ds.row_count(); ++i) predicted[i] = predict(e, ds.row(i)).value;
    return e.task.is_classification() ? accuracy(ds.labels(), predicted) : r2_score(ds.labels(), predicted);
}

std::size_t baseline_memory(const Ensemble& e, int bits_per_node) {
    if (bits_per_node != 128 && bits_per_node != 64) throw ConfigError("baseline uses 128 or 64 bits per node");
    return (e.internal_count() + e.leaf_count()) * static_cast<std::size_t>(bits_per_node) / 8;
}

double reuse_factor(const Ensemble& e) {
    const std::size_t values = e.tables.threshold_count() + e.tables.leaf_values().size();
    if (e.trees.empty() || values == 0) throw ConfigError("reuse factor of an empty model");
    return static_cast<double>(e.internal_count() + e.leaf_count()) / static_cast<double>(values);
}

EvalReport evaluate(const Ensemble& e, const Dataset& test, const TrainConfig& config) {
    EvalReport r;
    r.metric = metric_for(e.task);
    r.metric_value = score(e, test);
    r.toad_bytes = size_report(e).total_bytes;
    r.baseline32_bytes = baseline_memory(e, 128);
    r.baseline16_bytes = baseline_memory(e, 64);
    r.tree_count = e.trees.size();
    r.node_count = e.internal_count();
    r.leaf_count = e.leaf_count();
    r.global_threshold_count = e.tables.threshold_count();
    r.global_leaf_value_count = e.tables.leaf_values().size();
    r.feature_count = e.tables.features().size();
    r.reuse_factor = e.trees.empty() ? std::numeric_limits<double>::quiet_NaN() : reuse_factor(e);
    r.config = config;
    return r;
}

std::vector<double> penalty_grid(int lo_exponent, int hi_exponent, bool with_zero) {
    std::vector<double> out;
    if (with_zero) out.push_back(0.0);
    for (int k = lo_exponent; k <= hi_exponent; ++k) out.push_back(std::ldexp(1.0, k));
    return out;
}

std::vector<GridRow> grid_search(const Dataset& train_ds, const Dataset& test, const GridSpec& grid,
                                 const TrainConfig& base, std::optional<std::size_t> budget, int jobs) {
    if (grid.size() == 0) throw ConfigError("grid has an empty axis");
    std::vector<GridRow> points;
    points.reserve(grid.size());
    for (int iterations : grid.max_iterations) {
        for (int depth : grid.max_depth) {
            for (double iota : grid.penalty_feature) {
                for (double xi : grid.penalty_threshold) {
                    GridRow row;
                    row.penalty_feature = iota;
                    row.penalty_threshold = xi;
                    row.max_iterations = iterations;
                    row.max_depth = depth;
                    points.push_back(row);
                }
            }
        }
    }

    // Candidates depend only on the training data and max_bins.
    base.validate();
    const CandidateSet candidates = candidate_thresholds(train_ds, base.max_bins);

    std::vector<std::exception_ptr> errors(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            GridRow& row = points[i];
            TrainConfig config = base;
            config.penalty_feature = row.penalty_feature;
            config.penalty_threshold = row.penalty_threshold;
            config.max_iterations = row.max_iterations;
            config.max_depth = row.max_depth;
            if (budget) config.forestsize_budget = budget;
            try {
                const Ensemble e = train(train_ds, candidates, config);
                row.report = evaluate(e, test, config);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(points.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!errors[i]) continue;
        const auto& p = points[i];
        const std::string where = "grid point (iota=" + std::to_string(p.penalty_feature) +
                                  ", xi=" + std::to_string(p.penalty_threshold) +
                                  ", max_iterations=" + std::to_string(p.max_iterations) +
                                  ", max_depth=" + std::to_string(p.max_depth) + ")";
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& err) {
            throw std::runtime_error(where + ": " + err.what());
        }
    }

    if (budget) {
        std::erase_if(points, [&](const GridRow& r) { return r.report.toad_bytes > *budget; });
    }
    return points;
}

std::vector<GridRow> grid_search(const Dataset& ds, const GridSpec& grid, const TrainConfig& base,
                                 std::optional<std::size_t> budget, int jobs) {
    auto [train_ds, test] = split_train_test(ds, 0.2, base.seed);
    return grid_search(train_ds, test, grid, base, budget, jobs);
}

std::vector<GridRow> pareto_filter(const std::vector<GridRow>& rows) {
    std::vector<const GridRow*> order;
    for (const auto& r : rows) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const GridRow* a, const GridRow* b) {
        if (a->report.toad_bytes != b->report.toad_bytes) return a->report.toad_bytes < b->report.toad_bytes;
        return a->report.metric_value > b->report.metric_value;
    });
    std::vector<GridRow> front;
    for (const GridRow* r : order) {
        if (front.empty() || r->report.metric_value > front.back().report.metric_value) front.push_back(*r);
    }
    return front;
}

std::optional<GridRow> best_under_budget(const std::vector<GridRow>& rows, std::size_t budget) {
    const GridRow* best = nullptr;
    for (const auto& r : rows) {
        if (r.report.toad_bytes > budget) continue;
        if (!best || r.report.metric_value > best->report.metric_value ||
            (r.report.metric_value == best->report.metric_value && r.report.toad_bytes < best->report.toad_bytes)) {
            best = &r;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

nlohmann::json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

}  // namespace

const char* const kGridCsvHeader =
    "tinygbdt_penalty_feature,tinygbdt_penalty_threshold,max_iterations,max_depth,metric_name,metric_value,"
    "toad_bytes,baseline32_bytes,baseline16_bytes,tree_count,node_count,leaf_count,global_threshold_count,"
    "global_leaf_value_count,feature_count,reuse_factor";

std::string grid_csv(const std::vector<GridRow>& rows) {
    std::string out = kGridCsvHeader;
    out += '\n';
    for (const auto& row : rows) {
        const auto& r = row.report;
        out += num(row.penalty_feature) + ',' + num(row.penalty_threshold) + ',' +
               std::to_string(row.max_iterations) + ',' + std::to_string(row.max_depth) + ',' + to_string(r.metric) +
               ',' + num(r.metric_value) + ',' + std::to_string(r.toad_bytes) + ',' +
               std::to_string(r.baseline32_bytes) + ',' + std::to_string(r.baseline16_bytes) + ',' +
               std::to_string(r.tree_count) + ',' + std::to_string(r.node_count) + ',' +
               std::to_string(r.leaf_count) + ',' + std::to_string(r.global_threshold_count) + ',' +
               std::to_string(r.global_leaf_value_count) + ',' + std::to_string(r.feature_count) + ',' +
               num(r.reuse_factor) + '\n';
    }
    return out;
}

nlohmann::json to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["tinygbdt_penalty_feature"] = c.penalty_feature;
    j["tinygbdt_penalty_threshold"] = c.penalty_threshold;
    j["tinygbdt_forestsize"] = c.forestsize_budget ? nlohmann::json(*c.forestsize_budget) : nlohmann::json(nullptr);
    j["max_iterations"] = c.max_iterations;
    j["max_depth"] = c.max_depth;
    j["learning_rate"] = c.learning_rate;
    j["lambda"] = c.lambda;
    j["gamma"] = c.gamma;
    j["min_gain"] = c.min_gain;
    j["max_bins"] = c.max_bins;
    j["seed"] = c.seed;
    return j;
}

nlohmann::json to_json(const EvalReport& r) {
    return {
        {"metric_name", to_string(r.metric)},
        {"metric_value", json_number(r.metric_value)},
        {"toad_bytes", r.toad_bytes},
        {"baseline32_bytes", r.baseline32_bytes},
        {"baseline16_bytes", r.baseline16_bytes},
        {"tree_count", r.tree_count},
        {"node_count", r.node_count},
        {"leaf_count", r.leaf_count},
        {"global_threshold_count", r.global_threshold_count},
        {"global_leaf_value_count", r.global_leaf_value_count},
        {"feature_count", r.feature_count},
        {"reuse_factor", json_number(r.reuse_factor)},
        {"config", to_json(r.config)},
    };
}

nlohmann::json grid_json(const std::vector<GridRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows) {
        out.push_back({
            {"tinygbdt_penalty_feature", row.penalty_feature},
            {"tinygbdt_penalty_threshold", row.penalty_threshold},
            {"max_iterations", row.max_iterations},
            {"max_depth", row.max_depth},
            {"report", to_json(row.report)},
        });
    }
    return out;
}

}  // namespace toad
