#include "toad/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "toad/bitstream.hpp"
#include "toad/error.hpp"

namespace toad {

int ceil_log2(std::size_t n) {
    if (n <= 1) return 0;
    return std::bit_width(n - 1);
}

// ---------------------------------------------------------------------------
// Threshold representations

std::uint16_t to_half_bits(double v) {
    if (std::isnan(v)) return 0x7e00;
    const std::uint16_t sign = std::signbit(v) ? 0x8000 : 0;
    const double a = std::fabs(v);
    if (a >= 65520.0) return sign | 0x7c00;  // rounds to infinity
    int e = 0;
    std::frexp(a, &e);  // a = m * 2^e, m in [0.5, 1)
    int exponent = e - 1;
    if (a == 0.0 || exponent < -14) {
        const double q = std::nearbyint(std::ldexp(a, 24));  // subnormal quantum 2^-24
        return sign | static_cast<std::uint16_t>(q);          // q == 1024 encodes the smallest normal
    }
    double q = std::nearbyint(std::ldexp(a, 10 - exponent));
    if (q == 2048.0) {
        q = 1024.0;
        ++exponent;
    }
    if (exponent > 15) return sign | 0x7c00;
    return sign | static_cast<std::uint16_t>(((exponent + 15) << 10) | (static_cast<int>(q) - 1024));
}

double from_half_bits(std::uint16_t bits) {
    const double sign = (bits & 0x8000) ? -1.0 : 1.0;
    const int exponent = (bits >> 10) & 0x1f;
    const int mantissa = bits & 0x3ff;
    if (exponent == 0) return sign * std::ldexp(mantissa, -24);
    if (exponent == 31) return mantissa ? std::numeric_limits<double>::quiet_NaN()
                                        : sign * std::numeric_limits<double>::infinity();
    return sign * std::ldexp(mantissa + 1024, exponent - 25);
}

namespace {

double integer_limit(int width_exponent) { return std::ldexp(1.0, 1 << width_exponent); }

bool valid_representation(int width_exponent, NumericType type) {
    if (width_exponent < 0 || width_exponent > kMaxWidthExponent) return false;
    return type == NumericType::Integer || width_exponent >= 4;
}

double half_round_trip(double v) { return from_half_bits(to_half_bits(v)); }

}  // namespace

bool representable(double value, int width_exponent, NumericType type) {
    if (!std::isfinite(value) || !valid_representation(width_exponent, type)) return false;
    value = canonical(value);
    if (type == NumericType::Integer) {
        return value == std::floor(value) && value >= 0.0 && value < integer_limit(width_exponent);
    }
    if (width_exponent == 4) return half_round_trip(value) == value;
    return static_cast<double>(static_cast<float>(value)) == value;
}

double round_to_representation(double value, int width_exponent, NumericType type) {
    if (type == NumericType::Integer) {
        const double top = integer_limit(width_exponent) - 1.0;
        return canonical(std::clamp(std::nearbyint(value), 0.0, top));
    }
    if (width_exponent == 4) return canonical(half_round_trip(value));
    return canonical(static_cast<double>(static_cast<float>(value)));
}

namespace {

std::uint64_t threshold_to_bits(double v, int width_exponent, NumericType type) {
    if (type == NumericType::Integer) return static_cast<std::uint64_t>(v);
    if (width_exponent == 4) return to_half_bits(v);
    return std::bit_cast<std::uint32_t>(static_cast<float>(v));
}

double threshold_from_bits(std::uint64_t bits, int width_exponent, NumericType type) {
    if (type == NumericType::Integer) return static_cast<double>(bits);
    if (width_exponent == 4) return from_half_bits(static_cast<std::uint16_t>(bits));
    return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(bits)));
}

// Smallest value of the representation that is >= v, if any.
std::optional<double> round_up_to_representation(double v, int width_exponent, NumericType type) {
    if (type == NumericType::Integer) {
        const double q = std::max(std::ceil(v), 0.0);
        if (q >= integer_limit(width_exponent)) return std::nullopt;
        return canonical(q);
    }
    if (width_exponent == 4) {
        std::uint16_t bits = to_half_bits(v);
        double q = from_half_bits(bits);
        if (q < v) {
            if (bits == 0x8000 || bits == 0x0000) {
                bits = 0x0001;
            } else if (bits & 0x8000) {
                --bits;
            } else {
                ++bits;
            }
            q = from_half_bits(bits);
        }
        if (!std::isfinite(q)) return std::nullopt;
        return canonical(q);
    }
    float q = static_cast<float>(v);
    if (static_cast<double>(q) < v) q = std::nextafter(q, std::numeric_limits<float>::infinity());
    if (!std::isfinite(q)) return std::nullopt;
    return canonical(static_cast<double>(q));
}

struct Option {
    int width_exponent;
    NumericType type;
};

constexpr Option kOptions[] = {
    {0, NumericType::Integer}, {1, NumericType::Integer}, {2, NumericType::Integer},
    {3, NumericType::Integer}, {4, NumericType::Integer}, {4, NumericType::Float},
    {5, NumericType::Integer}, {5, NumericType::Float},
};

// A replacement q routes the training values exactly like t iff
// below <= q < above, where below is the largest value <= t and above the
// smallest value > t.
std::optional<double> admissible_replacement(double t, Option opt, std::span<const double> values) {
    auto upper = std::upper_bound(values.begin(), values.end(), t);
    const double above = upper == values.end() ? std::numeric_limits<double>::infinity() : *upper;
    const double below =
        upper == values.begin() ? -std::numeric_limits<double>::infinity() : *std::prev(upper);

    auto fits = [&](double q) { return std::isfinite(q) && q >= below && q < above; };

    if (opt.type == NumericType::Integer) {
        if (representable(t, opt.width_exponent, opt.type)) return canonical(t);
        if (!std::isfinite(below)) {
            const double q = std::min(std::floor(t), integer_limit(opt.width_exponent) - 1.0);
            return q >= 0.0 && fits(q) ? std::optional<double>(canonical(q)) : std::nullopt;
        }
        auto q = round_up_to_representation(below, opt.width_exponent, opt.type);
        if (q && fits(*q)) return q;
        return std::nullopt;
    }
    const double nearest = round_to_representation(t, opt.width_exponent, opt.type);
    if (fits(nearest)) return nearest;
    if (std::isfinite(below)) {
        auto q = round_up_to_representation(below, opt.width_exponent, opt.type);
        if (q && fits(*q)) return q;
    }
    return std::nullopt;
}

}  // namespace

ThresholdEncoding select_threshold_encoding(std::span<const double> thresholds,
                                            std::span<const double> training_values) {
    ThresholdEncoding out;
    for (const Option& opt : kOptions) {
        std::vector<double> rounded;
        rounded.reserve(thresholds.size());
        for (double t : thresholds) {
            auto q = admissible_replacement(t, opt, training_values);
            if (!q) break;
            rounded.push_back(*q);
        }
        if (rounded.size() != thresholds.size()) continue;
        out.width_exponent = opt.width_exponent;
        out.type = opt.type;
        out.thresholds = std::move(rounded);
        break;
    }
    if (out.thresholds.size() != thresholds.size()) {
        out.width_exponent = kMaxWidthExponent;
        out.type = NumericType::Float;
        out.routing_preserved = false;
        out.thresholds.clear();
        for (double t : thresholds) out.thresholds.push_back(round_to_representation(t, 5, NumericType::Float));
    }

    // Merge collisions, keeping first-use order.
    std::vector<double> unique;
    out.remap.resize(out.thresholds.size());
    for (std::size_t i = 0; i < out.thresholds.size(); ++i) {
        const double q = out.thresholds[i];
        auto it = std::find_if(unique.begin(), unique.end(),
                               [q](double u) { return std::bit_cast<std::uint64_t>(u) == std::bit_cast<std::uint64_t>(q); });
        if (it == unique.end()) {
            out.remap[i] = unique.size();
            unique.push_back(q);
        } else {
            out.remap[i] = static_cast<std::size_t>(it - unique.begin());
        }
    }
    out.thresholds = std::move(unique);
    return out;
}

void fit_threshold_widths(Ensemble& e, const std::vector<std::vector<double>>& training_values) {
    for (std::size_t ref = 0; ref < e.tables.features().size(); ++ref) {
        const FeatureEntry& entry = e.tables.feature(ref);
        if (entry.input_index >= training_values.size()) {
            throw ConfigError("no training values for input feature " + std::to_string(entry.input_index));
        }
        auto enc = select_threshold_encoding(entry.thresholds, training_values[entry.input_index]);
        const bool merged = enc.thresholds.size() != entry.thresholds.size();
        e.tables.reset_thresholds(ref, enc.thresholds, enc.width_exponent, enc.type);
        if (!merged) continue;
        for (Tree& tree : e.trees) {
            for (const auto& [index, node] : tree.nodes()) {
                if (const auto* in = std::get_if<InternalNode>(&node); in && in->feature_ref == ref) {
                    tree.set_node(index, InternalNode{in->feature_ref,
                                                      static_cast<std::uint32_t>(enc.remap[in->threshold_ref])});
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Layout

void check_encodable(const Ensemble& e) {
    try {
        validate(e);
    } catch (const ConfigError& err) {
        throw EncodeError(err.what());
    }
    const auto& tables = e.tables;
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw EncodeError(what);
    };
    require(e.trees.size() <= limits::kMaxTrees, "too many trees for the format");
    require(e.max_depth <= limits::kMaxDepth, "max_depth too large for the format");
    require(e.feature_count >= 1 && e.feature_count <= limits::kMaxInputFeatures, "input feature count out of range");
    require(tables.features().size() <= limits::kMaxUsedFeatures, "too many used features for the format");
    require(tables.max_threshold_count() <= limits::kMaxThresholdsPerFeature, "too many thresholds for one feature");
    require(tables.leaf_values().size() <= limits::kMaxLeafValues, "too many leaf values for the format");
    require(e.class_count() <= limits::kMaxClasses, "too many classes for the format");
    for (const auto& f : tables.features()) {
        for (double t : f.thresholds) {
            require(representable(t, f.width_exponent, f.numeric_type),
                    "threshold " + std::to_string(t) + " of input feature " + std::to_string(f.input_index) +
                        " is not representable at width " + std::to_string(f.width_bits()));
        }
    }
}

namespace {

std::size_t padded(std::size_t bits) { return (bits + 7) / 8 * 8; }

std::size_t feature_entry_bits(const GlobalTables& tables, std::size_t feature_count) {
    return static_cast<std::size_t>(ceil_log2(feature_count) + 3 + 1 + ceil_log2(tables.max_threshold_count()));
}

std::size_t tree_bits(const Tree& tree, const GlobalTables& tables) {
    const int feature_ref_bits = ceil_log2(tables.features().size());
    const int leaf_ref_bits = ceil_log2(tables.leaf_values().size());
    std::size_t bits = 0;
    for (const auto& [index, node] : tree.nodes()) {
        bits += 1;
        if (const auto* in = std::get_if<InternalNode>(&node)) {
            bits += static_cast<std::size_t>(
                feature_ref_bits + ceil_log2(tables.feature(in->feature_ref).thresholds.size()));
        } else {
            bits += static_cast<std::size_t>(leaf_ref_bits);
        }
    }
    return bits;
}

int task_code(TaskType t) { return static_cast<int>(t); }

}  // namespace

SizeReport size_report(const Ensemble& e) { return size_report(e.tables, e.trees, e.feature_count); }

SizeReport size_report(const GlobalTables& tables, std::span<const Tree> trees, std::size_t feature_count) {
    SizeReport r;
    r.metadata_bits = kMetadataBits;
    r.feature_map_bits = tables.features().size() * feature_entry_bits(tables, feature_count);
    for (const auto& f : tables.features()) {
        r.thresholds_bits += f.thresholds.size() * static_cast<std::size_t>(f.width_bits());
    }
    r.leaf_values_bits = tables.leaf_values().size() * 32;
    for (const auto& t : trees) r.trees_bits += tree_bits(t, tables);
    r.total_bits = padded(r.metadata_bits) + padded(r.feature_map_bits) + padded(r.thresholds_bits) +
                   padded(r.leaf_values_bits) + padded(r.trees_bits);
    r.total_bytes = r.total_bits / 8;
    return r;
}

EncodedModel encode(const Ensemble& e) {
    check_encodable(e);
    const auto& tables = e.tables;
    const auto& features = tables.features();
    BitWriter w;

    w.write(kMagic, 8);
    w.write(kFormatVersion, 4);
    w.write(static_cast<std::uint64_t>(task_code(e.task.type)), 2);
    w.write(static_cast<std::uint64_t>(e.class_count()), 8);
    w.write(e.trees.size(), 16);
    w.write(static_cast<std::uint64_t>(e.max_depth), 6);
    w.write(e.feature_count, 16);
    w.write(features.size(), 12);
    w.write(tables.max_threshold_count(), 12);
    w.write(tables.leaf_values().size(), 12);
    w.align();

    const int input_bits = ceil_log2(e.feature_count);
    const int count_bits = ceil_log2(tables.max_threshold_count());
    for (const auto& f : features) {
        w.write(f.input_index, input_bits);
        w.write(static_cast<std::uint64_t>(f.width_exponent), 3);
        w.write(static_cast<std::uint64_t>(f.numeric_type), 1);
        w.write(f.thresholds.size() - 1, count_bits);
    }
    w.align();

    for (const auto& f : features) {
        for (double t : f.thresholds) w.write(threshold_to_bits(t, f.width_exponent, f.numeric_type), f.width_bits());
    }
    w.align();

    for (float v : tables.leaf_values()) w.write(std::bit_cast<std::uint32_t>(v), 32);
    w.align();

    const int feature_ref_bits = ceil_log2(features.size());
    const int leaf_ref_bits = ceil_log2(tables.leaf_values().size());
    for (const auto& tree : e.trees) {
        for (Tree::Index i : tree.level_order()) {
            const TreeNode& node = tree.node(i);
            if (const auto* in = std::get_if<InternalNode>(&node)) {
                w.write(0, 1);
                w.write(in->feature_ref, feature_ref_bits);
                w.write(in->threshold_ref, ceil_log2(features[in->feature_ref].thresholds.size()));
            } else {
                w.write(1, 1);
                w.write(std::get<LeafNode>(node).leaf_ref, leaf_ref_bits);
            }
        }
    }
    w.align();

    EncodedModel out;
    out.bit_length = w.bit_length();
    out.bytes = std::move(w).take();
    return out;
}

Ensemble decode(std::span<const std::uint8_t> bytes) {
    BitReader r(bytes);
    Ensemble e;

    r.set_section("metadata");
    if (r.read(8) != kMagic) {
        throw DecodeError("metadata", 0, "bad magic field");
    }
    if (const auto version = r.read(4); version != kFormatVersion) {
        r.fail("unsupported format version " + std::to_string(version));
    }
    const auto task = r.read(2);
    const auto classes = static_cast<int>(r.read(8));
    switch (task) {
        case 0:
        case 1:
            if (classes != 1) r.fail("class count must be 1 for regression and binary models");
            e.task = task == 0 ? TaskKind::regression() : TaskKind::binary();
            break;
        case 2:
            if (classes < 3) r.fail("multiclass model with fewer than 3 classes");
            e.task = TaskKind::multiclass(classes);
            break;
        default:
            r.fail("invalid task kind " + std::to_string(task));
    }
    const auto tree_count = r.read(16);
    if (tree_count % static_cast<std::uint64_t>(e.class_count()) != 0) {
        r.fail("tree count is not a multiple of the class count");
    }
    e.max_depth = static_cast<int>(r.read(6));
    if (e.max_depth < 1) r.fail("max_depth must be at least 1");
    e.feature_count = r.read(16);
    if (e.feature_count < 1) r.fail("input feature count must be at least 1");
    const auto used_features = r.read(12);
    const auto max_count = r.read(12);
    const auto leaf_count = r.read(12);
    if ((used_features == 0) != (max_count == 0)) r.fail("feature count and threshold count disagree");
    if (tree_count > 0 && leaf_count == 0) r.fail("trees present but no leaf values");
    r.align();

    struct MapEntry {
        std::uint32_t input_index;
        int width_exponent;
        NumericType type;
        std::size_t count;
    };
    std::vector<MapEntry> map;
    r.set_section("feature_map");
    const int input_bits = ceil_log2(e.feature_count);
    const int count_bits = ceil_log2(max_count);
    std::size_t observed_max = 0;
    for (std::uint64_t i = 0; i < used_features; ++i) {
        MapEntry m{};
        m.input_index = static_cast<std::uint32_t>(r.read(input_bits));
        if (m.input_index >= e.feature_count) r.fail("input feature index out of range");
        m.width_exponent = static_cast<int>(r.read(3));
        if (m.width_exponent > kMaxWidthExponent) r.fail("invalid width exponent " + std::to_string(m.width_exponent));
        m.type = r.read(1) ? NumericType::Float : NumericType::Integer;
        if (!valid_representation(m.width_exponent, m.type)) r.fail("float thresholds need width 16 or 32");
        m.count = r.read(count_bits) + 1;
        if (m.count > max_count) r.fail("threshold count exceeds the declared maximum");
        observed_max = std::max(observed_max, m.count);
        map.push_back(m);
    }
    if (observed_max != max_count) r.fail("declared maximum threshold count is never reached");
    r.align();

    r.set_section("thresholds");
    for (const auto& m : map) {
        FeatureEntry entry;
        entry.input_index = m.input_index;
        entry.width_exponent = m.width_exponent;
        entry.numeric_type = m.type;
        const std::size_t start = r.position();
        for (std::size_t j = 0; j < m.count; ++j) {
            const double t = threshold_from_bits(r.read(1 << m.width_exponent), m.width_exponent, m.type);
            if (!std::isfinite(t)) r.fail("non-finite threshold");
            if (t == 0.0 && std::signbit(t)) r.fail("negative zero threshold");
            entry.thresholds.push_back(t);
        }
        try {
            e.tables.add_feature(std::move(entry));
        } catch (const ConfigError& err) {
            throw DecodeError("thresholds", start, err.what());
        }
    }
    r.align();

    r.set_section("leaf_values");
    for (std::uint64_t j = 0; j < leaf_count; ++j) {
        const std::size_t start = r.position();
        const float v = std::bit_cast<float>(static_cast<std::uint32_t>(r.read(32)));
        if (!std::isfinite(v)) throw DecodeError("leaf_values", start, "non-finite leaf value");
        if (std::bit_cast<std::uint32_t>(v) == 0x80000000u) throw DecodeError("leaf_values", start, "negative zero leaf value");
        try {
            e.tables.add_leaf_value(v);
        } catch (const ConfigError& err) {
            throw DecodeError("leaf_values", start, err.what());
        }
    }
    r.align();

    r.set_section("trees");
    const auto& features = e.tables.features();
    const int feature_ref_bits = ceil_log2(features.size());
    const int leaf_ref_bits = ceil_log2(leaf_count);
    for (std::uint64_t k = 0; k < tree_count; ++k) {
        Tree tree;
        std::vector<Tree::Index> queue{0};
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const Tree::Index i = queue[q];
            if (Tree::depth_of(i) > e.max_depth) r.fail("tree " + std::to_string(k) + " exceeds max_depth");
            if (r.read(1) == 0) {
                const auto feature_ref = r.read(feature_ref_bits);
                if (feature_ref >= features.size()) r.fail("feature reference out of range");
                const auto threshold_ref = r.read(ceil_log2(features[feature_ref].thresholds.size()));
                if (threshold_ref >= features[feature_ref].thresholds.size()) {
                    r.fail("threshold reference out of range");
                }
                if (Tree::depth_of(i) == e.max_depth) r.fail("internal node at max_depth");
                tree.set_node(i, InternalNode{static_cast<std::uint32_t>(feature_ref),
                                              static_cast<std::uint32_t>(threshold_ref)});
                queue.push_back(Tree::left_child(i));
                queue.push_back(Tree::right_child(i));
            } else {
                const auto leaf_ref = r.read(leaf_ref_bits);
                if (leaf_ref >= leaf_count) r.fail("leaf reference out of range");
                tree.set_node(i, LeafNode{static_cast<std::uint32_t>(leaf_ref)});
            }
        }
        e.trees.push_back(std::move(tree));
    }
    r.align();
    if (r.position() != r.bit_size()) r.fail("trailing data after trees section");
    return e;
}

void write_model(const Ensemble& e, const std::filesystem::path& path) {
    const auto encoded = encode(e);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(encoded.bytes.data()), static_cast<std::streamsize>(encoded.bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Ensemble read_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

}  // namespace toad
