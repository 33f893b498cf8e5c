#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "toad/dataset.hpp"

namespace toad {

/// Threshold representation. The enumerator value is the bit written to the
/// Feature & Threshold Map.
enum class NumericType : std::uint8_t { Integer = 0, Float = 1 };

inline constexpr int kMaxWidthExponent = 5;

/// One used input feature and the thresholds shared by every node that
/// splits on it.
struct FeatureEntry {
    std::uint32_t input_index = 0;
    int width_exponent = kMaxWidthExponent;  // threshold width is 2^width_exponent bits
    NumericType numeric_type = NumericType::Float;
    std::vector<double> thresholds;

    int width_bits() const { return 1 << width_exponent; }

    friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

/// Maps -0.0 to +0.0; all other values unchanged.
inline double canonical(double v) { return v == 0.0 ? 0.0 : v; }
inline float canonical(float v) { return v == 0.0f ? 0.0f : v; }

/// Ensemble-wide lookup tables: used features in order of first use, their
/// thresholds, and the 32-bit leaf values.
class GlobalTables {
public:
    struct Interned {
        std::size_t ref;
        bool novel;  // true when the table grew
    };

    Interned intern_feature(std::size_t input_index);
    /// Matches bit-wise after mapping -0.0 to +0.0. Throws ConfigError for a
    /// non-finite value or a bad feature_ref.
    Interned intern_threshold(std::size_t feature_ref, double threshold);
    /// Rounds to the nearest float before matching. Throws ConfigError for a
    /// non-finite value.
    std::size_t intern_leaf_value(double value);

    std::optional<std::size_t> find_feature(std::size_t input_index) const;
    std::optional<std::size_t> find_threshold(std::size_t feature_ref, double threshold) const;

    const std::vector<FeatureEntry>& features() const { return features_; }
    const FeatureEntry& feature(std::size_t ref) const { return features_.at(ref); }
    const std::vector<float>& leaf_values() const { return leaf_values_; }

    /// Sum of threshold counts over all features.
    std::size_t threshold_count() const;
    /// Largest threshold count of any feature (0 when empty).
    std::size_t max_threshold_count() const;

    /// Appends a complete entry (used by the decoder and model loaders).
    /// Throws ConfigError on a duplicate input index, empty or duplicate
    /// thresholds.
    std::size_t add_feature(FeatureEntry entry);
    /// Appends a leaf value verbatim; throws ConfigError on a duplicate.
    std::size_t add_leaf_value(float value);

    /// Replaces an entry's thresholds and encoding. The new list must be free
    /// of duplicates; callers remap node references themselves.
    void reset_thresholds(std::size_t feature_ref, std::vector<double> thresholds, int width_exponent,
                          NumericType type);

    friend bool operator==(const GlobalTables& a, const GlobalTables& b) {
        return a.features_ == b.features_ && a.leaf_values_ == b.leaf_values_;
    }

private:
    void index_thresholds(std::size_t feature_ref);

    std::vector<FeatureEntry> features_;
    std::vector<float> leaf_values_;
    std::unordered_map<std::size_t, std::size_t> feature_lookup_;
    std::vector<std::unordered_map<std::uint64_t, std::size_t>> threshold_lookup_;
    std::unordered_map<std::uint32_t, std::size_t> leaf_lookup_;
};

struct InternalNode {
    std::uint32_t feature_ref = 0;
    std::uint32_t threshold_ref = 0;
    friend bool operator==(const InternalNode&, const InternalNode&) = default;
};

struct LeafNode {
    std::uint32_t leaf_ref = 0;
    friend bool operator==(const LeafNode&, const LeafNode&) = default;
};

using TreeNode = std::variant<InternalNode, LeafNode>;

/// Pointer-less binary tree: the root sits at heap index 0 and the children
/// of node i at 2i+1 (left, x <= threshold) and 2i+2 (right).
class Tree {
public:
    using Index = std::uint64_t;

    static Index left_child(Index i) { return 2 * i + 1; }
    static Index right_child(Index i) { return 2 * i + 2; }
    static int depth_of(Index i);

    void set_node(Index index, TreeNode node) { nodes_[index] = node; }
    const std::map<Index, TreeNode>& nodes() const { return nodes_; }
    const TreeNode& node(Index index) const { return nodes_.at(index); }
    bool contains(Index index) const { return nodes_.count(index) != 0; }

    std::size_t internal_count() const;
    std::size_t leaf_count() const;
    /// Depth of the deepest node; 0 for a single leaf, -1 for no nodes.
    int depth() const;

    /// Nodes reachable from the root in breadth-first order, children of
    /// leaves skipped.
    std::vector<Index> level_order() const;

    friend bool operator==(const Tree&, const Tree&) = default;

private:
    std::map<Index, TreeNode> nodes_;
};

/// Additive tree ensemble. Tree j contributes to raw score j mod class_count.
/// Leaf values are stored after shrinkage, so prediction is a plain sum.
struct Ensemble {
    std::vector<Tree> trees;
    GlobalTables tables;
    TaskKind task;
    std::size_t feature_count = 0;
    int max_depth = 1;
    double base_score = 0.0;
    double learning_rate = 1.0;

    int class_count() const { return task.score_count(); }
    std::size_t internal_count() const;
    std::size_t leaf_count() const;
};

/// Throws ConfigError describing the first broken structural invariant.
void validate(const Ensemble& e);

/// Per-class raw scores, starting at base_score.
std::vector<double> predict_raw(const Ensemble& e, std::span<const double> x);

struct Prediction {
    std::vector<double> raw;
    /// Class probabilities for classification (size 2 for binary); empty for
    /// regression.
    std::vector<double> probabilities;
    /// Regression: the raw score. Classification: the class index.
    double value = 0.0;
};

Prediction predict(const Ensemble& e, std::span<const double> x);

double logistic(double z);
std::vector<double> softmax(std::span<const double> z);

}  // namespace toad
