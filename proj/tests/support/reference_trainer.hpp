#pragma once

#include <memory>
#include <span>
#include <vector>

#include "toad/dataset.hpp"

namespace toad::testing {

/// Plain unpenalised booster with depth-first (level-wise) growth and no
/// shared tables. Trees hold their thresholds and float leaf values inline.
struct RefNode {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    float value = 0.0f;
    std::unique_ptr<RefNode> left;
    std::unique_ptr<RefNode> right;
};

struct RefEnsemble {
    TaskKind task;
    std::vector<std::unique_ptr<RefNode>> trees;

    std::vector<double> predict_raw(std::span<const double> x) const;
};

struct RefConfig {
    double lambda = 1.0;
    double gamma = 0.0;
    double learning_rate = 0.1;
    int max_iterations = 100;
    int max_depth = 2;
    double min_gain = 0.0;
};

RefEnsemble reference_train(const Dataset& ds, const CandidateSet& candidates, const RefConfig& config);

}  // namespace toad::testing
