#pragma once

#include <json.hpp>

#include "toad/model.hpp"

namespace toad {

/// Human-readable model description:
///
///   {"task": "binary", "class_count": 1, "feature_count": 4, "max_depth": 2,
///    "features": [{"input_index": 0, "width_bits": 2, "numeric_type": "integer",
///                  "thresholds": [2, 3]}, ...],
///    "leaf_values": [0.5, ...],
///    "trees": [[{"index": 0, "feature_ref": 0, "threshold_ref": 0},
///               {"index": 1, "leaf_ref": 3}, ...], ...]}
///
/// class_count is only read for multiclass models.
nlohmann::json model_to_json(const Ensemble& e);
/// Throws ConfigError for missing fields or a structurally invalid model.
Ensemble model_from_json(const nlohmann::json& j);

}  // namespace toad
