#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "toad/dataset.hpp"
#include "toad/model.hpp"
#include "toad/trainer.hpp"

namespace toad {

/// R^2 on labels without variance.
class UndefinedMetric : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class Metric { Accuracy, R2 };

Metric metric_for(const TaskKind& task);
std::string to_string(Metric m);

/// Accuracy for classification, R^2 (against the mean of ds's labels) for
/// regression.
double score(const Ensemble& e, const Dataset& ds);
double accuracy(std::span<const double> truth, std::span<const double> predicted);
double r2_score(std::span<const double> truth, std::span<const double> predicted);

/// Pointer-based baseline: every node of every tree costs bits_per_node
/// (128 for float32 nodes, 64 for half precision). Returns bytes.
std::size_t baseline_memory(const Ensemble& e, int bits_per_node);

/// Node and leaf usages per distinct stored value (thresholds plus leaf
/// values). 1 means nothing is shared. Throws ConfigError for an empty model.
double reuse_factor(const Ensemble& e);

struct EvalReport {
    Metric metric = Metric::Accuracy;
    double metric_value = 0.0;
    std::size_t toad_bytes = 0;
    std::size_t baseline32_bytes = 0;
    std::size_t baseline16_bytes = 0;
    std::size_t tree_count = 0;
    std::size_t node_count = 0;  // internal nodes
    std::size_t leaf_count = 0;
    std::size_t global_threshold_count = 0;
    std::size_t global_leaf_value_count = 0;
    std::size_t feature_count = 0;  // |F_U|
    double reuse_factor = 0.0;      // NaN for an empty model
    TrainConfig config;
};

EvalReport evaluate(const Ensemble& e, const Dataset& test, const TrainConfig& config);

struct GridSpec {
    std::vector<double> penalty_feature;
    std::vector<double> penalty_threshold;
    std::vector<int> max_iterations;
    std::vector<int> max_depth;

    std::size_t size() const {
        return penalty_feature.size() * penalty_threshold.size() * max_iterations.size() * max_depth.size();
    }
};

/// 0 followed by 2^lo .. 2^hi.
std::vector<double> penalty_grid(int lo_exponent, int hi_exponent, bool with_zero = true);

struct GridRow {
    double penalty_feature = 0.0;
    double penalty_threshold = 0.0;
    int max_iterations = 0;
    int max_depth = 0;
    EvalReport report;
};

/// Trains one model per grid point (iterations, then depth, then iota, then
/// xi, each in the given order) and evaluates it on `test`. A budget caps
/// training via the forestsize limit and drops any row above it. Rows come
/// back in grid order regardless of `jobs`.
std::vector<GridRow> grid_search(const Dataset& train, const Dataset& test, const GridSpec& grid,
                                 const TrainConfig& base, std::optional<std::size_t> budget = std::nullopt,
                                 int jobs = 1);
/// Splits `ds` 80/20 with base.seed first.
std::vector<GridRow> grid_search(const Dataset& ds, const GridSpec& grid, const TrainConfig& base,
                                 std::optional<std::size_t> budget = std::nullopt, int jobs = 1);

/// Rows not dominated in (metric higher, bytes lower), sorted by bytes.
/// Rows equal in both keep only the first.
std::vector<GridRow> pareto_filter(const std::vector<GridRow>& rows);

/// Highest metric among rows within `budget` bytes (ties to fewer bytes).
std::optional<GridRow> best_under_budget(const std::vector<GridRow>& rows, std::size_t budget);

extern const char* const kGridCsvHeader;
std::string grid_csv(const std::vector<GridRow>& rows);
nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const EvalReport& report);
nlohmann::json grid_json(const std::vector<GridRow>& rows);

}  // namespace toad
