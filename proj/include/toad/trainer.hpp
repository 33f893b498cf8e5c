#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toad/dataset.hpp"
#include "toad/model.hpp"

namespace toad {

struct TrainConfig {
    double penalty_feature = 0.0;    // iota: charged once per newly used input feature
    double penalty_threshold = 0.0;  // xi: charged once per newly used threshold
    double gamma = 0.0;              // per-leaf penalty
    double lambda = 1.0;             // L2 on leaf values
    double learning_rate = 0.1;
    int max_iterations = 100;
    int max_depth = 2;
    std::optional<std::size_t> forestsize_budget;  // bytes of the encoded model
    int max_bins = kDefaultMaxBins;
    double min_gain = 0.0;
    std::uint64_t seed = 42;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    /// One line of key=value pairs, defaults included.
    std::string describe() const;
};

/// Per-row first and second derivatives of the loss at the current scores.
struct GradStats {
    std::vector<double> g;
    std::vector<double> h;
};

struct GradSum {
    double g = 0.0;
    double h = 0.0;
};

/// Sums over `rows` in the order given.
GradSum sum_gradients(const GradStats& grads, std::span<const std::size_t> rows);

/// One GradStats per raw score. `scores` is row-major, n x task.score_count().
std::vector<GradStats> compute_gradients(const TaskKind& task, std::span<const double> labels,
                                         std::span<const double> scores);

/// Shrunk minimiser of G v + (H + lambda) v^2 / 2. Throws ConfigError when
/// H + lambda <= 0.
double leaf_value(double g_sum, double h_sum, double lambda, double learning_rate);

/// Unpenalised gain of replacing a leaf (g, h) by children (left, right).
double split_gain(GradSum left, GradSum right, GradSum parent, double lambda, double gamma);

/// delta - s_f * iota - s_t * xi, evaluated in that order.
double penalized_gain(double delta, bool new_feature, bool new_threshold, const TrainConfig& config);

struct GainResult {
    double delta = 0.0;
    double delta_l = 0.0;
    bool new_feature = false;    // s_f
    bool new_threshold = false;  // s_t
    std::size_t feature = 0;     // input feature index
    double threshold = 0.0;
    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    GradSum left;
    GradSum right;
};

/// A leaf that may still be split.
struct LeafWorkItem {
    Tree::Index position = 0;
    std::vector<std::size_t> rows;  // ascending
    GradSum sums;
    std::optional<GainResult> best_split;

    static LeafWorkItem make(Tree::Index position, std::vector<std::size_t> rows, const GradStats& grads);
};

/// Evaluates one split directly from the feature values. Returns nullopt
/// when either side is empty. Never modifies `tables`.
std::optional<GainResult> evaluate_split(const Dataset& ds, const LeafWorkItem& item, std::size_t feature,
                                         double threshold, const GradStats& grads, const TrainConfig& config,
                                         const GlobalTables& tables);

/// Training rows mapped to candidate bins: bin(x) = number of candidates
/// below x, so x <= candidate[k] exactly when bin(x) <= k.
class BinnedData {
public:
    BinnedData(const Dataset& ds, CandidateSet candidates);

    const Dataset& dataset() const { return *ds_; }
    const CandidateSet& candidates() const { return candidates_; }
    std::size_t feature_count() const { return candidates_.feature_count(); }
    std::size_t bin(std::size_t row, std::size_t feature) const { return bins_[feature][row]; }
    /// Sorted training values of every feature.
    const std::vector<std::vector<double>>& sorted_values() const { return sorted_values_; }

private:
    const Dataset* ds_;
    CandidateSet candidates_;
    std::vector<std::vector<std::uint32_t>> bins_;
    std::vector<std::vector<double>> sorted_values_;
};

/// Best split of one feature over its candidates (ties to the lower
/// threshold); nullopt when no candidate separates the leaf's rows. Row sets
/// are left empty.
std::optional<GainResult> best_split_for_feature(const BinnedData& data, const LeafWorkItem& item,
                                                 std::size_t feature, const GradStats& grads,
                                                 const TrainConfig& config, const GlobalTables& tables);

/// Highest penalised gain over all features and candidates, ties to the lower
/// feature index then lower threshold. nullopt unless it exceeds min_gain.
std::optional<GainResult> best_split(const BinnedData& data, const LeafWorkItem& item, const GradStats& grads,
                                     const TrainConfig& config, const GlobalTables& tables);

/// Leaf-wise growth: repeatedly splits the pool leaf with the highest
/// penalised gain, interning each used feature and threshold as it goes.
/// Leaf values are interned into `tables` after shrinkage.
Tree grow_tree(const BinnedData& data, std::vector<std::size_t> rows, const GradStats& grads,
               const TrainConfig& config, GlobalTables& tables);

struct TrainSummary {
    int rounds = 0;
    enum class Stop { Iterations, NoSplit, Budget, FormatLimit } stop = Stop::Iterations;
};

std::string to_string(TrainSummary::Stop stop);

/// Gradient boosting from a zero base score. Stops after max_iterations
/// rounds, after a round in which no tree could split (that round is kept
/// only when it is the first), or before a round whose encoded model would
/// exceed the budget or the format limits. Thresholds get their final
/// widths at the end.
Ensemble train(const Dataset& ds, const TrainConfig& config, TrainSummary* summary = nullptr);
Ensemble train(const Dataset& ds, const CandidateSet& candidates, const TrainConfig& config,
               TrainSummary* summary = nullptr);

/// Exact encoded size of `e`, including section padding.
std::size_t encoded_size_bits(const Ensemble& e);

}  // namespace toad
