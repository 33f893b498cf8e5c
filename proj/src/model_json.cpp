#include "toad/model_json.hpp"

#include <bit>

#include "toad/error.hpp"

namespace toad {

nlohmann::json model_to_json(const Ensemble& e) {
    nlohmann::json j;
    switch (e.task.type) {
        case TaskType::Regression:
            j["task"] = "regression";
            break;
        case TaskType::Binary:
            j["task"] = "binary";
            break;
        case TaskType::Multiclass:
            j["task"] = "multiclass";
            break;
    }
    j["class_count"] = e.class_count();
    j["feature_count"] = e.feature_count;
    j["max_depth"] = e.max_depth;
    j["features"] = nlohmann::json::array();
    for (const auto& f : e.tables.features()) {
        j["features"].push_back({{"input_index", f.input_index},
                                 {"width_bits", f.width_bits()},
                                 {"numeric_type", f.numeric_type == NumericType::Integer ? "integer" : "float"},
                                 {"thresholds", f.thresholds}});
    }
    j["leaf_values"] = e.tables.leaf_values();
    j["trees"] = nlohmann::json::array();
    for (const auto& tree : e.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& [index, node] : tree.nodes()) {
            if (const auto* in = std::get_if<InternalNode>(&node)) {
                nodes.push_back({{"index", index}, {"feature_ref", in->feature_ref}, {"threshold_ref", in->threshold_ref}});
            } else {
                nodes.push_back({{"index", index}, {"leaf_ref", std::get<LeafNode>(node).leaf_ref}});
            }
        }
        j["trees"].push_back(std::move(nodes));
    }
    return j;
}

Ensemble model_from_json(const nlohmann::json& j) {
    try {
        Ensemble e;
        const std::string task = j.at("task").get<std::string>();
        if (task == "multiclass") {
            e.task = TaskKind::multiclass(j.at("class_count").get<int>());
        } else {
            e.task = parse_task(task);
        }
        e.feature_count = j.at("feature_count").get<std::size_t>();
        e.max_depth = j.at("max_depth").get<int>();
        for (const auto& f : j.at("features")) {
            FeatureEntry entry;
            entry.input_index = f.at("input_index").get<std::uint32_t>();
            const int width = f.at("width_bits").get<int>();
            if (width < 1 || !std::has_single_bit(static_cast<unsigned>(width)) || width > 32) {
                throw ConfigError("width_bits must be one of 1, 2, 4, 8, 16, 32");
            }
            entry.width_exponent = std::countr_zero(static_cast<unsigned>(width));
            const std::string type = f.at("numeric_type").get<std::string>();
            if (type != "integer" && type != "float") throw ConfigError("numeric_type must be integer or float");
            entry.numeric_type = type == "integer" ? NumericType::Integer : NumericType::Float;
            entry.thresholds = f.at("thresholds").get<std::vector<double>>();
            e.tables.add_feature(std::move(entry));
        }
        for (const auto& v : j.at("leaf_values")) e.tables.add_leaf_value(v.get<float>());
        for (const auto& nodes : j.at("trees")) {
            Tree tree;
            for (const auto& n : nodes) {
                const auto index = n.at("index").get<Tree::Index>();
                if (tree.contains(index)) throw ConfigError("duplicate node index " + std::to_string(index));
                if (n.contains("leaf_ref")) {
                    tree.set_node(index, LeafNode{n.at("leaf_ref").get<std::uint32_t>()});
                } else {
                    tree.set_node(index, InternalNode{n.at("feature_ref").get<std::uint32_t>(),
                                                      n.at("threshold_ref").get<std::uint32_t>()});
                }
            }
            e.trees.push_back(std::move(tree));
        }
        validate(e);
        return e;
    } catch (const nlohmann::json::exception& err) {
        throw ConfigError(std::string("invalid model description: ") + err.what());
    }
}

}  // namespace toad
