#include "toad/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "toad/codec.hpp"
#include "toad/error.hpp"

namespace toad {

namespace {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

void TrainConfig::validate() const {
    auto nonneg = [](double v, const char* name) {
        if (!std::isfinite(v) || v < 0.0) throw ConfigError(std::string(name) + " must be finite and >= 0");
    };
    nonneg(penalty_feature, "tinygbdt_penalty_feature");
    nonneg(penalty_threshold, "tinygbdt_penalty_threshold");
    nonneg(gamma, "gamma");
    nonneg(lambda, "lambda");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("learning_rate must lie in (0, 1]");
    if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
    if (max_depth < 1 || max_depth > limits::kMaxDepth) {
        throw ConfigError("max_depth must lie in [1, " + std::to_string(limits::kMaxDepth) + "]");
    }
    if (max_bins < 1) throw ConfigError("max_bins must be >= 1");
    if (!std::isfinite(min_gain)) throw ConfigError("min_gain must be finite");
}

std::string TrainConfig::describe() const {
    std::ostringstream out;
    out << "tinygbdt_penalty_feature=" << format_double(penalty_feature)
        << " tinygbdt_penalty_threshold=" << format_double(penalty_threshold) << " tinygbdt_forestsize="
        << (forestsize_budget ? std::to_string(*forestsize_budget) : std::string("none"))
        << " max_iterations=" << max_iterations << " max_depth=" << max_depth
        << " learning_rate=" << format_double(learning_rate) << " lambda=" << format_double(lambda)
        << " gamma=" << format_double(gamma) << " min_gain=" << format_double(min_gain) << " max_bins=" << max_bins
        << " seed=" << seed;
    return out.str();
}

GradSum sum_gradients(const GradStats& grads, std::span<const std::size_t> rows) {
    GradSum s;
    for (std::size_t r : rows) {
        s.g += grads.g[r];
        s.h += grads.h[r];
    }
    return s;
}

std::vector<GradStats> compute_gradients(const TaskKind& task, std::span<const double> labels,
                                         std::span<const double> scores) {
    const std::size_t n = labels.size();
    const auto classes = static_cast<std::size_t>(task.score_count());
    if (scores.size() != n * classes) throw ConfigError("score matrix does not match labels");
    for (double s : scores) {
        if (!std::isfinite(s)) throw ConfigError("non-finite raw score");
    }
    std::vector<GradStats> out(classes);
    for (auto& gs : out) {
        gs.g.resize(n);
        gs.h.resize(n);
    }
    switch (task.type) {
        case TaskType::Regression:
            for (std::size_t i = 0; i < n; ++i) {
                out[0].g[i] = scores[i] - labels[i];
                out[0].h[i] = 1.0;
            }
            break;
        case TaskType::Binary:
            for (std::size_t i = 0; i < n; ++i) {
                const double p = logistic(scores[i]);
                out[0].g[i] = p - labels[i];
                out[0].h[i] = p * (1.0 - p);
            }
            break;
        case TaskType::Multiclass:
            for (std::size_t i = 0; i < n; ++i) {
                const auto p = softmax(scores.subspan(i * classes, classes));
                for (std::size_t c = 0; c < classes; ++c) {
                    out[c].g[i] = p[c] - (labels[i] == static_cast<double>(c) ? 1.0 : 0.0);
                    out[c].h[i] = p[c] * (1.0 - p[c]);
                }
            }
            break;
    }
    return out;
}

double leaf_value(double g_sum, double h_sum, double lambda, double learning_rate) {
    if (!(h_sum + lambda > 0.0)) throw ConfigError("leaf value needs H + lambda > 0");
    return learning_rate * (-g_sum / (h_sum + lambda));
}

double split_gain(GradSum left, GradSum right, GradSum parent, double lambda, double gamma) {
    return 0.5 * (left.g * left.g / (left.h + lambda) + right.g * right.g / (right.h + lambda) -
                  parent.g * parent.g / (parent.h + lambda)) -
           gamma;
}

double penalized_gain(double delta, bool new_feature, bool new_threshold, const TrainConfig& config) {
    const double sf = new_feature ? 1.0 : 0.0;
    const double st = new_threshold ? 1.0 : 0.0;
    return delta - sf * config.penalty_feature - st * config.penalty_threshold;
}

LeafWorkItem LeafWorkItem::make(Tree::Index position, std::vector<std::size_t> rows, const GradStats& grads) {
    LeafWorkItem item;
    item.position = position;
    item.rows = std::move(rows);
    item.sums = sum_gradients(grads, item.rows);
    return item;
}

namespace {

struct Novelty {
    bool feature;
    bool threshold;
};

Novelty novelty(const GlobalTables& tables, std::size_t feature, double threshold) {
    auto ref = tables.find_feature(feature);
    if (!ref) return {true, true};
    return {false, !tables.find_threshold(*ref, threshold).has_value()};
}

}  // namespace

std::optional<GainResult> evaluate_split(const Dataset& ds, const LeafWorkItem& item, std::size_t feature,
                                         double threshold, const GradStats& grads, const TrainConfig& config,
                                         const GlobalTables& tables) {
    GainResult r;
    r.feature = feature;
    r.threshold = threshold;
    for (std::size_t row : item.rows) {
        if (ds.value(row, feature) <= threshold) {
            r.left_rows.push_back(row);
            r.left.g += grads.g[row];
            r.left.h += grads.h[row];
        } else {
            r.right_rows.push_back(row);
        }
    }
    if (r.left_rows.empty() || r.right_rows.empty()) return std::nullopt;
    r.right = {item.sums.g - r.left.g, item.sums.h - r.left.h};
    r.delta = split_gain(r.left, r.right, item.sums, config.lambda, config.gamma);
    const auto nov = novelty(tables, feature, threshold);
    r.new_feature = nov.feature;
    r.new_threshold = nov.threshold;
    r.delta_l = penalized_gain(r.delta, r.new_feature, r.new_threshold, config);
    return r;
}

BinnedData::BinnedData(const Dataset& ds, CandidateSet candidates)
    : ds_(&ds), candidates_(std::move(candidates)) {
    if (candidates_.feature_count() != ds.feature_count()) {
        throw ConfigError("candidate set does not match the dataset's feature count");
    }
    const std::size_t n = ds.row_count();
    bins_.resize(ds.feature_count());
    sorted_values_.resize(ds.feature_count());
    for (std::size_t f = 0; f < ds.feature_count(); ++f) {
        const auto& cands = candidates_.thresholds[f];
        auto& column = bins_[f];
        auto& sorted = sorted_values_[f];
        column.resize(n);
        sorted.resize(n);
        for (std::size_t r = 0; r < n; ++r) {
            const double x = ds.value(r, f);
            column[r] = static_cast<std::uint32_t>(std::lower_bound(cands.begin(), cands.end(), x) - cands.begin());
            sorted[r] = x;
        }
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    }
}

std::optional<GainResult> best_split_for_feature(const BinnedData& data, const LeafWorkItem& item,
                                                 std::size_t feature, const GradStats& grads,
                                                 const TrainConfig& config, const GlobalTables& tables) {
    const auto& cands = data.candidates().thresholds[feature];
    const std::size_t m = cands.size();
    if (m == 0 || !(item.sums.h + config.lambda > 0.0)) return std::nullopt;

    std::vector<double> hist_g(m + 1, 0.0);
    std::vector<double> hist_h(m + 1, 0.0);
    std::vector<std::size_t> hist_n(m + 1, 0);
    for (std::size_t row : item.rows) {
        const std::size_t b = data.bin(row, feature);
        hist_g[b] += grads.g[row];
        hist_h[b] += grads.h[row];
        ++hist_n[b];
    }

    const auto feature_ref = tables.find_feature(feature);
    std::optional<GainResult> best;
    GradSum left;
    std::size_t left_n = 0;
    for (std::size_t k = 0; k < m; ++k) {
        left.g += hist_g[k];
        left.h += hist_h[k];
        left_n += hist_n[k];
        if (left_n == 0) continue;
        if (left_n == item.rows.size()) break;
        const GradSum right{item.sums.g - left.g, item.sums.h - left.h};
        if (!(left.h + config.lambda > 0.0) || !(right.h + config.lambda > 0.0)) continue;
        const double delta = split_gain(left, right, item.sums, config.lambda, config.gamma);
        const bool new_feature = !feature_ref.has_value();
        const bool new_threshold = new_feature || !tables.find_threshold(*feature_ref, cands[k]).has_value();
        const double delta_l = penalized_gain(delta, new_feature, new_threshold, config);
        if (!best || delta_l > best->delta_l) {
            if (!best) best.emplace();
            best->delta = delta;
            best->delta_l = delta_l;
            best->new_feature = new_feature;
            best->new_threshold = new_threshold;
            best->feature = feature;
            best->threshold = cands[k];
            best->left = left;
            best->right = right;
        }
    }
    return best;
}

namespace {

std::optional<GainResult> reduce_features(const std::vector<std::optional<GainResult>>& per_feature,
                                          double min_gain) {
    const GainResult* best = nullptr;
    for (const auto& candidate : per_feature) {
        if (candidate && (!best || candidate->delta_l > best->delta_l)) best = &*candidate;
    }
    if (!best || !(best->delta_l > min_gain)) return std::nullopt;
    return *best;
}

void fill_rows(const Dataset& ds, const LeafWorkItem& item, GainResult& split) {
    split.left_rows.clear();
    split.right_rows.clear();
    for (std::size_t row : item.rows) {
        (ds.value(row, split.feature) <= split.threshold ? split.left_rows : split.right_rows).push_back(row);
    }
}

}  // namespace

std::optional<GainResult> best_split(const BinnedData& data, const LeafWorkItem& item, const GradStats& grads,
                                     const TrainConfig& config, const GlobalTables& tables) {
    std::vector<std::optional<GainResult>> per_feature(data.feature_count());
    for (std::size_t f = 0; f < data.feature_count(); ++f) {
        per_feature[f] = best_split_for_feature(data, item, f, grads, config, tables);
    }
    auto best = reduce_features(per_feature, config.min_gain);
    if (best) fill_rows(data.dataset(), item, *best);
    return best;
}

namespace {

struct PoolLeaf {
    LeafWorkItem item;
    std::vector<std::optional<GainResult>> per_feature;  // empty when the leaf sits at max_depth
};

}  // namespace

Tree grow_tree(const BinnedData& data, std::vector<std::size_t> rows, const GradStats& grads,
               const TrainConfig& config, GlobalTables& tables) {
    if (rows.empty()) throw ConfigError("grow_tree needs at least one row");
    const std::size_t d = data.feature_count();
    std::map<Tree::Index, PoolLeaf> pool;

    auto admit = [&](Tree::Index position, std::vector<std::size_t> leaf_rows) {
        PoolLeaf leaf{LeafWorkItem::make(position, std::move(leaf_rows), grads), {}};
        if (Tree::depth_of(position) < config.max_depth) {
            leaf.per_feature.resize(d);
            for (std::size_t f = 0; f < d; ++f) {
                leaf.per_feature[f] = best_split_for_feature(data, leaf.item, f, grads, config, tables);
            }
            leaf.item.best_split = reduce_features(leaf.per_feature, config.min_gain);
        }
        pool.emplace(position, std::move(leaf));
    };

    admit(0, std::move(rows));
    Tree tree;
    while (true) {
        auto chosen = pool.end();
        for (auto it = pool.begin(); it != pool.end(); ++it) {
            const auto& split = it->second.item.best_split;
            if (split && (chosen == pool.end() || split->delta_l > chosen->second.item.best_split->delta_l)) {
                chosen = it;
            }
        }
        if (chosen == pool.end()) break;

        PoolLeaf leaf = std::move(chosen->second);
        pool.erase(chosen);
        GainResult split = *leaf.item.best_split;
        fill_rows(data.dataset(), leaf.item, split);

        const auto feature = tables.intern_feature(split.feature);
        const auto threshold = tables.intern_threshold(feature.ref, split.threshold);
        tree.set_node(leaf.item.position, InternalNode{static_cast<std::uint32_t>(feature.ref),
                                                       static_cast<std::uint32_t>(threshold.ref)});
        if (feature.novel || threshold.novel) {
            // Only candidates on this feature changed novelty.
            for (auto& [position, other] : pool) {
                if (other.per_feature.empty()) continue;
                other.per_feature[split.feature] =
                    best_split_for_feature(data, other.item, split.feature, grads, config, tables);
                other.item.best_split = reduce_features(other.per_feature, config.min_gain);
            }
        }
        admit(Tree::left_child(leaf.item.position), std::move(split.left_rows));
        admit(Tree::right_child(leaf.item.position), std::move(split.right_rows));
    }

    for (const auto& [position, leaf] : pool) {
        const GradSum s = leaf.item.sums;
        const double value = s.h + config.lambda > 0.0 ? leaf_value(s.g, s.h, config.lambda, config.learning_rate) : 0.0;
        tree.set_node(position, LeafNode{static_cast<std::uint32_t>(tables.intern_leaf_value(value))});
    }
    return tree;
}

std::string to_string(TrainSummary::Stop stop) {
    switch (stop) {
        case TrainSummary::Stop::Iterations:
            return "max_iterations reached";
        case TrainSummary::Stop::NoSplit:
            return "no tree could split";
        case TrainSummary::Stop::Budget:
            return "forestsize budget reached";
        case TrainSummary::Stop::FormatLimit:
            return "format limit reached";
    }
    return "unknown";
}

namespace {

std::size_t route(const Tree& tree, const GlobalTables& tables, std::span<const double> x) {
    Tree::Index i = 0;
    while (true) {
        const TreeNode& node = tree.node(i);
        if (const auto* leaf = std::get_if<LeafNode>(&node)) return leaf->leaf_ref;
        const auto& split = std::get<InternalNode>(node);
        const FeatureEntry& f = tables.feature(split.feature_ref);
        i = x[f.input_index] <= f.thresholds[split.threshold_ref] ? Tree::left_child(i) : Tree::right_child(i);
    }
}

bool within_format_limits(const GlobalTables& tables, std::size_t tree_count) {
    return tree_count <= limits::kMaxTrees && tables.features().size() <= limits::kMaxUsedFeatures &&
           tables.max_threshold_count() <= limits::kMaxThresholdsPerFeature &&
           tables.leaf_values().size() <= limits::kMaxLeafValues;
}

std::size_t projected_bits(const GlobalTables& tables, std::span<const Tree> trees, std::size_t feature_count,
                           const std::vector<std::vector<double>>& training_values) {
    GlobalTables fitted = tables;
    for (std::size_t ref = 0; ref < fitted.features().size(); ++ref) {
        const auto& entry = fitted.feature(ref);
        auto enc = select_threshold_encoding(entry.thresholds, training_values[entry.input_index]);
        fitted.reset_thresholds(ref, std::move(enc.thresholds), enc.width_exponent, enc.type);
    }
    return size_report(fitted, trees, feature_count).total_bits;
}

}  // namespace

Ensemble train(const Dataset& ds, const TrainConfig& config, TrainSummary* summary) {
    config.validate();
    return train(ds, candidate_thresholds(ds, config.max_bins), config, summary);
}

Ensemble train(const Dataset& ds, const CandidateSet& candidates, const TrainConfig& config, TrainSummary* summary) {
    config.validate();
    if (ds.row_count() < 2) throw ConfigError("training needs at least 2 rows");
    if (ds.feature_count() > limits::kMaxInputFeatures) throw ConfigError("too many input features for the format");
    if (ds.task().class_count > limits::kMaxClasses) throw ConfigError("too many classes for the format");

    const BinnedData data(ds, candidates);
    const std::size_t n = ds.row_count();
    const auto classes = static_cast<std::size_t>(ds.task().score_count());

    Ensemble e;
    e.task = ds.task();
    e.feature_count = ds.feature_count();
    e.max_depth = config.max_depth;
    e.learning_rate = config.learning_rate;
    e.base_score = 0.0;

    TrainSummary local;
    TrainSummary& info = summary ? *summary : local;
    info = TrainSummary{};

    std::vector<double> scores(n * classes, e.base_score);
    std::vector<std::size_t> all_rows(n);
    for (std::size_t i = 0; i < n; ++i) all_rows[i] = i;

    for (int round = 0; round < config.max_iterations; ++round) {
        const auto grads = compute_gradients(ds.task(), ds.labels(), scores);
        GlobalTables before = e.tables;
        const std::size_t kept = e.trees.size();
        bool any_split = false;
        for (std::size_t c = 0; c < classes; ++c) {
            e.trees.push_back(grow_tree(data, all_rows, grads[c], config, e.tables));
            any_split = any_split || e.trees.back().nodes().size() > 1;
        }

        auto reject = [&](TrainSummary::Stop why) {
            e.trees.resize(kept);
            e.tables = std::move(before);
            info.stop = why;
        };
        if (!any_split && kept > 0) {
            reject(TrainSummary::Stop::NoSplit);
            break;
        }
        if (!within_format_limits(e.tables, e.trees.size())) {
            reject(TrainSummary::Stop::FormatLimit);
            break;
        }
        if (config.forestsize_budget &&
            projected_bits(e.tables, e.trees, e.feature_count, data.sorted_values()) > *config.forestsize_budget * 8) {
            reject(TrainSummary::Stop::Budget);
            break;
        }

        const auto& leaves = e.tables.leaf_values();
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = ds.row(i);
            for (std::size_t c = 0; c < classes; ++c) {
                scores[i * classes + c] += static_cast<double>(leaves[route(e.trees[kept + c], e.tables, x)]);
            }
        }
        info.rounds = round + 1;
        if (!any_split) {
            info.stop = TrainSummary::Stop::NoSplit;
            break;
        }
    }

    fit_threshold_widths(e, data.sorted_values());
    return e;
}

std::size_t encoded_size_bits(const Ensemble& e) { return size_report(e).total_bits; }

}  // namespace toad
