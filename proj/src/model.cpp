#include "toad/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <string>

#include "toad/error.hpp"

namespace toad {

namespace {

std::uint64_t threshold_key(double v) { return std::bit_cast<std::uint64_t>(canonical(v)); }
std::uint32_t leaf_key(float v) { return std::bit_cast<std::uint32_t>(canonical(v)); }

}  // namespace

GlobalTables::Interned GlobalTables::intern_feature(std::size_t input_index) {
    if (auto found = find_feature(input_index)) return {*found, false};
    const std::size_t ref = features_.size();
    FeatureEntry entry;
    entry.input_index = static_cast<std::uint32_t>(input_index);
    features_.push_back(std::move(entry));
    threshold_lookup_.emplace_back();
    feature_lookup_.emplace(input_index, ref);
    return {ref, true};
}

GlobalTables::Interned GlobalTables::intern_threshold(std::size_t feature_ref, double threshold) {
    if (feature_ref >= features_.size()) throw ConfigError("feature reference out of range");
    if (!std::isfinite(threshold)) throw ConfigError("threshold must be finite");
    threshold = canonical(threshold);
    auto& lookup = threshold_lookup_[feature_ref];
    auto [it, inserted] = lookup.emplace(threshold_key(threshold), features_[feature_ref].thresholds.size());
    if (inserted) features_[feature_ref].thresholds.push_back(threshold);
    return {it->second, inserted};
}

std::size_t GlobalTables::intern_leaf_value(double value) {
    if (!std::isfinite(value)) throw ConfigError("leaf value must be finite");
    const float v = canonical(static_cast<float>(value));
    if (!std::isfinite(v)) throw ConfigError("leaf value overflows 32-bit float");
    auto [it, inserted] = leaf_lookup_.emplace(leaf_key(v), leaf_values_.size());
    if (inserted) leaf_values_.push_back(v);
    return it->second;
}

std::optional<std::size_t> GlobalTables::find_feature(std::size_t input_index) const {
    auto it = feature_lookup_.find(input_index);
    if (it == feature_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> GlobalTables::find_threshold(std::size_t feature_ref, double threshold) const {
    if (feature_ref >= features_.size()) return std::nullopt;
    const auto& lookup = threshold_lookup_[feature_ref];
    auto it = lookup.find(threshold_key(threshold));
    if (it == lookup.end()) return std::nullopt;
    return it->second;
}

std::size_t GlobalTables::threshold_count() const {
    std::size_t total = 0;
    for (const auto& f : features_) total += f.thresholds.size();
    return total;
}

std::size_t GlobalTables::max_threshold_count() const {
    std::size_t best = 0;
    for (const auto& f : features_) best = std::max(best, f.thresholds.size());
    return best;
}

void GlobalTables::index_thresholds(std::size_t feature_ref) {
    auto& lookup = threshold_lookup_[feature_ref];
    lookup.clear();
    auto& thresholds = features_[feature_ref].thresholds;
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!std::isfinite(thresholds[i])) throw ConfigError("threshold must be finite");
        thresholds[i] = canonical(thresholds[i]);
        if (!lookup.emplace(threshold_key(thresholds[i]), i).second) {
            throw ConfigError("duplicate threshold for input feature " +
                              std::to_string(features_[feature_ref].input_index));
        }
    }
}

std::size_t GlobalTables::add_feature(FeatureEntry entry) {
    if (find_feature(entry.input_index)) {
        throw ConfigError("duplicate feature entry for input index " + std::to_string(entry.input_index));
    }
    if (entry.thresholds.empty()) throw ConfigError("feature entry without thresholds");
    if (entry.width_exponent < 0 || entry.width_exponent > kMaxWidthExponent) {
        throw ConfigError("width exponent out of range");
    }
    const std::size_t ref = features_.size();
    const std::size_t input_index = entry.input_index;
    feature_lookup_.emplace(input_index, ref);
    features_.push_back(std::move(entry));
    threshold_lookup_.emplace_back();
    try {
        index_thresholds(ref);
    } catch (...) {
        features_.pop_back();
        threshold_lookup_.pop_back();
        feature_lookup_.erase(input_index);
        throw;
    }
    return ref;
}

std::size_t GlobalTables::add_leaf_value(float value) {
    if (!std::isfinite(value)) throw ConfigError("leaf value must be finite");
    value = canonical(value);
    if (!leaf_lookup_.emplace(leaf_key(value), leaf_values_.size()).second) {
        throw ConfigError("duplicate leaf value");
    }
    leaf_values_.push_back(value);
    return leaf_values_.size() - 1;
}

void GlobalTables::reset_thresholds(std::size_t feature_ref, std::vector<double> thresholds, int width_exponent,
                                    NumericType type) {
    if (feature_ref >= features_.size()) throw ConfigError("feature reference out of range");
    if (thresholds.empty()) throw ConfigError("feature entry without thresholds");
    if (width_exponent < 0 || width_exponent > kMaxWidthExponent) throw ConfigError("width exponent out of range");
    auto& entry = features_[feature_ref];
    entry.thresholds = std::move(thresholds);
    entry.width_exponent = width_exponent;
    entry.numeric_type = type;
    index_thresholds(feature_ref);
}

int Tree::depth_of(Index i) { return std::bit_width(i + 1) - 1; }

std::size_t Tree::internal_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& kv) {
        return std::holds_alternative<InternalNode>(kv.second);
    }));
}

std::size_t Tree::leaf_count() const { return nodes_.size() - internal_count(); }

int Tree::depth() const {
    if (nodes_.empty()) return -1;
    return depth_of(nodes_.rbegin()->first);
}

std::vector<Tree::Index> Tree::level_order() const {
    std::vector<Index> order;
    if (!contains(0)) return order;
    std::deque<Index> queue{0};
    while (!queue.empty()) {
        const Index i = queue.front();
        queue.pop_front();
        order.push_back(i);
        if (std::holds_alternative<InternalNode>(node(i))) {
            queue.push_back(left_child(i));
            queue.push_back(right_child(i));
        }
    }
    return order;
}

std::size_t Ensemble::internal_count() const {
    std::size_t total = 0;
    for (const auto& t : trees) total += t.internal_count();
    return total;
}

std::size_t Ensemble::leaf_count() const {
    std::size_t total = 0;
    for (const auto& t : trees) total += t.leaf_count();
    return total;
}

void validate(const Ensemble& e) {
    const int classes = e.class_count();
    if (e.task.type == TaskType::Multiclass && e.task.class_count < 3) {
        throw ConfigError("multiclass ensemble needs at least 3 classes");
    }
    if (e.trees.size() % static_cast<std::size_t>(classes) != 0) {
        throw ConfigError("tree count " + std::to_string(e.trees.size()) + " is not a multiple of class count " +
                          std::to_string(classes));
    }
    if (e.max_depth < 1) throw ConfigError("max_depth must be at least 1");
    const auto& features = e.tables.features();
    for (const auto& f : features) {
        if (f.input_index >= e.feature_count) {
            throw ConfigError("feature entry references input " + std::to_string(f.input_index) +
                              " but the ensemble has " + std::to_string(e.feature_count) + " features");
        }
        if (f.thresholds.empty()) throw ConfigError("feature entry without thresholds");
    }
    for (std::size_t k = 0; k < e.trees.size(); ++k) {
        const auto& tree = e.trees[k];
        const std::string where = "tree " + std::to_string(k);
        if (!tree.contains(0)) throw ConfigError(where + " has no root");
        if (tree.depth() > e.max_depth) throw ConfigError(where + " exceeds max_depth");
        for (const auto& [index, node] : tree.nodes()) {
            if (index != 0) {
                const Tree::Index parent = (index - 1) / 2;
                if (!tree.contains(parent) || !std::holds_alternative<InternalNode>(tree.node(parent))) {
                    throw ConfigError(where + ": node " + std::to_string(index) + " has no internal parent");
                }
            }
            if (const auto* in = std::get_if<InternalNode>(&node)) {
                if (!tree.contains(Tree::left_child(index)) || !tree.contains(Tree::right_child(index))) {
                    throw ConfigError(where + ": internal node " + std::to_string(index) + " lacks a child");
                }
                if (in->feature_ref >= features.size()) {
                    throw ConfigError(where + ": feature reference out of range");
                }
                if (in->threshold_ref >= features[in->feature_ref].thresholds.size()) {
                    throw ConfigError(where + ": threshold reference out of range");
                }
            } else if (std::get<LeafNode>(node).leaf_ref >= e.tables.leaf_values().size()) {
                throw ConfigError(where + ": leaf reference out of range");
            }
        }
    }
}

std::vector<double> predict_raw(const Ensemble& e, std::span<const double> x) {
    if (x.size() != e.feature_count) {
        throw ConfigError("input has " + std::to_string(x.size()) + " features, model expects " +
                          std::to_string(e.feature_count));
    }
    const auto classes = static_cast<std::size_t>(e.class_count());
    std::vector<double> scores(classes, e.base_score);
    const auto& features = e.tables.features();
    const auto& leaves = e.tables.leaf_values();
    for (std::size_t k = 0; k < e.trees.size(); ++k) {
        const Tree& tree = e.trees[k];
        Tree::Index i = 0;
        while (true) {
            const TreeNode& node = tree.node(i);
            if (const auto* leaf = std::get_if<LeafNode>(&node)) {
                scores[k % classes] += static_cast<double>(leaves[leaf->leaf_ref]);
                break;
            }
            const auto& split = std::get<InternalNode>(node);
            const FeatureEntry& f = features[split.feature_ref];
            i = x[f.input_index] <= f.thresholds[split.threshold_ref] ? Tree::left_child(i) : Tree::right_child(i);
        }
    }
    return scores;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> softmax(std::span<const double> z) {
    const double top = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double total = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
        p[c] = std::exp(z[c] - top);
        total += p[c];
    }
    for (double& v : p) v /= total;
    return p;
}

Prediction predict(const Ensemble& e, std::span<const double> x) {
    Prediction out;
    out.raw = predict_raw(e, x);
    switch (e.task.type) {
        case TaskType::Regression:
            out.value = out.raw[0];
            break;
        case TaskType::Binary: {
            const double p = logistic(out.raw[0]);
            out.probabilities = {1.0 - p, p};
            out.value = p >= 0.5 ? 1.0 : 0.0;
            break;
        }
        case TaskType::Multiclass: {
            out.probabilities = softmax(out.raw);
            // max_element returns the first maximum, i.e. the lowest class index.
            auto best = std::max_element(out.raw.begin(), out.raw.end());
            out.value = static_cast<double>(best - out.raw.begin());
            break;
        }
    }
    return out;
}

}  // namespace toad
