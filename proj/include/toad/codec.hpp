#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "toad/model.hpp"

namespace toad {

/// Packed model layout, every section padded to a byte boundary:
///
///   metadata            magic(8) version(4) task(2) classes(8) K(16)
///                       max_depth(6) d(16) |F_U|(12) max_count(12) V(12)
///   feature map         per used feature: input index, width exponent(3),
///                       numeric type(1), count-1
///   global thresholds   per feature, count x 2^exponent bits
///   global leaf values  V x float32
///   trees               level order per tree; tag bit (1 = leaf) then
///                       feature/threshold refs or a leaf ref
///
/// Fields are big-endian, most significant bit first. A reference into a
/// table of size s takes ceil(log2(s)) bits, so single-entry tables cost 0.
inline constexpr std::uint8_t kMagic = 0xD7;
inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::size_t kMetadataBits = 96;

namespace limits {
inline constexpr std::size_t kMaxTrees = (1u << 16) - 1;
inline constexpr int kMaxDepth = (1 << 6) - 1;
inline constexpr std::size_t kMaxInputFeatures = (1u << 16) - 1;
inline constexpr std::size_t kMaxUsedFeatures = (1u << 12) - 1;
inline constexpr std::size_t kMaxThresholdsPerFeature = (1u << 12) - 1;
inline constexpr std::size_t kMaxLeafValues = (1u << 12) - 1;
inline constexpr int kMaxClasses = (1 << 8) - 1;
}  // namespace limits

struct EncodedModel {
    std::vector<std::uint8_t> bytes;
    std::size_t bit_length = 0;  // includes section padding, so always 8 * bytes.size()
};

/// Unpadded bit count per section; total_bits includes padding.
struct SizeReport {
    std::size_t metadata_bits = 0;
    std::size_t feature_map_bits = 0;
    std::size_t thresholds_bits = 0;
    std::size_t leaf_values_bits = 0;
    std::size_t trees_bits = 0;
    std::size_t total_bits = 0;
    std::size_t total_bytes = 0;
};

/// ceil(log2(n)), with 0 for n <= 1.
int ceil_log2(std::size_t n);

EncodedModel encode(const Ensemble& e);
/// Strict decoder; any inconsistency raises DecodeError with the section and
/// bit offset. Decoded models have learning_rate 1 (leaf values are already
/// shrunk) and base_score 0.
Ensemble decode(std::span<const std::uint8_t> bytes);
SizeReport size_report(const Ensemble& e);
/// Size of a model made of these tables and trees, without building it.
SizeReport size_report(const GlobalTables& tables, std::span<const Tree> trees, std::size_t feature_count);

/// Checks that every layout limit holds and every threshold is exactly
/// representable at its entry's width and type. Throws EncodeError.
void check_encodable(const Ensemble& e);

void write_model(const Ensemble& e, const std::filesystem::path& path);
Ensemble read_model(const std::filesystem::path& path);

// Threshold representations.

std::uint16_t to_half_bits(double v);  // round to nearest, ties to even
double from_half_bits(std::uint16_t bits);

bool representable(double value, int width_exponent, NumericType type);
/// Nearest value of the given representation (integers: nearest, clamped to
/// the unsigned range).
double round_to_representation(double value, int width_exponent, NumericType type);

/// Width and type chosen for one feature's thresholds. `remap[i]` is the new
/// index of old threshold i; entries only merge when no admissible width
/// exists and the float32 fallback collapses two thresholds.
struct ThresholdEncoding {
    int width_exponent = kMaxWidthExponent;
    NumericType type = NumericType::Float;
    std::vector<double> thresholds;
    std::vector<std::size_t> remap;
    bool routing_preserved = true;
};

/// Picks the narrowest representation whose rounded thresholds send every
/// value in `training_values` (sorted ascending) to the same side as the
/// original thresholds. Integer is tried before float at equal width.
ThresholdEncoding select_threshold_encoding(std::span<const double> thresholds,
                                            std::span<const double> training_values);

/// Applies select_threshold_encoding to every feature entry of `e` and
/// remaps node references. `training_values[input_index]` holds the sorted
/// training values of that input feature.
void fit_threshold_widths(Ensemble& e, const std::vector<std::vector<double>>& training_values);

}  // namespace toad
