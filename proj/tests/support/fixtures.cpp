#include "support/fixtures.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "toad/codec.hpp"

namespace toad::testing {

std::string data_path(const std::string& file) { return std::string(TOAD_DATA_DIR) + "/" + file; }

Dataset load_named(const std::string& name) {
    if (name == "breast_cancer") {
        return load_csv(data_path("breast_cancer.csv"), LabelColumn::by_name("y"), TaskKind::binary());
    }
    if (name == "wine") return load_csv(data_path("wine.csv"), LabelColumn::by_name("y"), TaskKind::multiclass(3));
    if (name == "diabetes") {
        return load_csv(data_path("diabetes.csv"), LabelColumn::by_name("y"), TaskKind::regression());
    }
    if (name == "housing_synth") {
        return load_csv(data_path("housing_synth.csv"), LabelColumn::by_name("y"), TaskKind::regression());
    }
    throw std::invalid_argument("unknown dataset " + name);
}

std::vector<NamedDataset> load_corpus() {
    std::vector<NamedDataset> out;
    for (const char* name : {"breast_cancer", "wine", "diabetes", "housing_synth"}) {
        out.push_back({name, load_named(name)});
    }
    return out;
}

Ensemble sample_ensemble() {
    Ensemble e;
    e.task = TaskKind::binary();
    e.feature_count = 4;
    e.max_depth = 2;
    e.tables.add_feature({0, 1, NumericType::Integer, {2.0, 3.0}});
    e.tables.add_feature({1, 0, NumericType::Integer, {0.0, 1.0}});
    e.tables.add_feature({3, 4, NumericType::Float, {0.5}});
    for (float v : {0.5f, -0.25f, 1.0f, 0.125f, -2.0f}) e.tables.add_leaf_value(v);

    Tree t1;
    t1.set_node(0, InternalNode{0, 0});
    t1.set_node(1, InternalNode{1, 0});
    t1.set_node(2, InternalNode{0, 1});
    t1.set_node(3, LeafNode{0});
    t1.set_node(4, LeafNode{1});
    t1.set_node(5, LeafNode{2});
    t1.set_node(6, LeafNode{3});

    Tree t2;
    t2.set_node(0, InternalNode{2, 0});
    t2.set_node(1, LeafNode{3});
    t2.set_node(2, InternalNode{1, 1});
    t2.set_node(5, LeafNode{4});
    t2.set_node(6, LeafNode{0});

    e.trees = {t1, t2};
    return e;
}

std::string sample_bitstring() {
    std::string s;
    // metadata: magic, version, task, classes, K, max_depth, d, |F_U|, max_count, V
    s += "11010111" "0001" "01" "00000001" "0000000000000010" "000010" "0000000000000100" "000000000011"
         "000000000010" "000000000101";
    // map: input(2) exponent(3) type(1) count-1(1), then 3 pad bits
    s += "0000101" "0100001" "1110010" "000";
    // thresholds: 2, 3 | 0, 1 | half 0.5, then 2 pad bits
    s += "10" "11" "0" "1" "0011100000000000" "00";
    // leaf values 0.5, -0.25, 1.0, 0.125, -2.0
    s += "00111111000000000000000000000000";
    s += "10111110100000000000000000000000";
    s += "00111111100000000000000000000000";
    s += "00111110000000000000000000000000";
    s += "11000000000000000000000000000000";
    // t1 level order: three internal nodes then four leaves
    s += "0000" "0010" "0001" "1000" "1001" "1010" "1011";
    // t2: input 3 split (no threshold bits), leaf v3, internal, leaves v4 and v0, then 1 pad bit
    s += "010" "1011" "0011" "1100" "1000" "0";
    return s;
}

std::vector<std::uint8_t> bits_to_bytes(const std::string& bits) {
    if (bits.size() % 8 != 0) throw std::invalid_argument("bit string is not byte aligned");
    std::vector<std::uint8_t> out(bits.size() / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1') out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    return out;
}

namespace {

double random_threshold(std::mt19937_64& rng, int exponent, NumericType type) {
    if (type == NumericType::Integer) {
        const int w = 1 << exponent;
        const std::uint64_t top = w == 64 ? ~0ull : (1ull << w) - 1;
        return static_cast<double>(std::uniform_int_distribution<std::uint64_t>(0, top)(rng));
    }
    while (true) {
        double v;
        if (exponent == 4) {
            v = from_half_bits(static_cast<std::uint16_t>(std::uniform_int_distribution<unsigned>(0, 0xFFFF)(rng)));
        } else {
            std::normal_distribution<double> dist(0.0, std::ldexp(1.0, std::uniform_int_distribution<int>(-20, 20)(rng)));
            v = static_cast<double>(static_cast<float>(dist(rng)));
        }
        if (std::isfinite(v) && !(v == 0.0 && std::signbit(v))) return v;
    }
}

std::size_t capacity(int exponent, NumericType type) {
    if (type == NumericType::Integer && exponent <= 2) return std::size_t{1} << (1 << exponent);
    return 40;
}

void grow(Tree& t, Tree::Index i, int depth, const Ensemble& e, std::mt19937_64& rng, double split_chance) {
    const auto& features = e.tables.features();
    const bool split = !features.empty() && depth < e.max_depth &&
                       std::bernoulli_distribution(depth == 0 ? 0.85 : split_chance)(rng);
    if (!split) {
        const auto v = e.tables.leaf_values().size();
        t.set_node(i, LeafNode{static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, v - 1)(rng))});
        return;
    }
    const auto f = std::uniform_int_distribution<std::size_t>(0, features.size() - 1)(rng);
    const auto th = std::uniform_int_distribution<std::size_t>(0, features[f].thresholds.size() - 1)(rng);
    t.set_node(i, InternalNode{static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(th)});
    grow(t, Tree::left_child(i), depth + 1, e, rng, split_chance);
    grow(t, Tree::right_child(i), depth + 1, e, rng, split_chance);
}

}  // namespace

Ensemble random_ensemble(std::mt19937_64& rng) {
    auto uniform = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    Ensemble e;
    switch (uniform(0, 2)) {
        case 0:
            e.task = TaskKind::regression();
            break;
        case 1:
            e.task = TaskKind::binary();
            break;
        default:
            e.task = TaskKind::multiclass(static_cast<int>(uniform(3, 6)));
            break;
    }
    e.feature_count = uniform(1, 40);
    e.max_depth = static_cast<int>(uniform(1, 6));

    std::vector<std::size_t> inputs(e.feature_count);
    std::iota(inputs.begin(), inputs.end(), std::size_t{0});
    std::shuffle(inputs.begin(), inputs.end(), rng);
    const std::size_t used = uniform(0, std::min<std::size_t>(e.feature_count, 10));

    static const std::pair<int, NumericType> kinds[] = {
        {0, NumericType::Integer}, {1, NumericType::Integer}, {2, NumericType::Integer}, {3, NumericType::Integer},
        {4, NumericType::Integer}, {5, NumericType::Integer}, {4, NumericType::Float},   {5, NumericType::Float}};
    for (std::size_t k = 0; k < used; ++k) {
        const auto [exponent, type] = kinds[uniform(0, std::size(kinds) - 1)];
        const std::size_t count = uniform(1, std::min<std::size_t>(capacity(exponent, type), 12));
        std::set<double> values;
        while (values.size() < count) values.insert(random_threshold(rng, exponent, type));
        std::vector<double> thresholds(values.begin(), values.end());
        std::shuffle(thresholds.begin(), thresholds.end(), rng);
        e.tables.add_feature({static_cast<std::uint32_t>(inputs[k]), exponent, type, std::move(thresholds)});
    }

    const std::size_t rounds = uniform(0, 5) == 0 ? 0 : uniform(1, 4);
    const std::size_t leaf_values = rounds == 0 ? uniform(0, 3) : uniform(1, 20);
    std::set<std::uint32_t> seen;
    while (e.tables.leaf_values().size() < leaf_values) {
        const float v = static_cast<float>(std::normal_distribution<double>(0.0, 1.0)(rng));
        if (v == 0.0f || !seen.insert(std::bit_cast<std::uint32_t>(v)).second) continue;
        e.tables.add_leaf_value(v);
    }

    const double split_chance = std::uniform_real_distribution<double>(0.2, 0.8)(rng);
    const std::size_t trees = rounds * static_cast<std::size_t>(e.class_count());
    for (std::size_t k = 0; k < trees; ++k) {
        Tree t;
        grow(t, 0, 0, e, rng, split_chance);
        e.trees.push_back(std::move(t));
    }
    validate(e);
    return e;
}

std::vector<std::vector<double>> probe_inputs(const Ensemble& e, std::mt19937_64& rng, std::size_t extra) {
    std::normal_distribution<double> noise(0.0, 100.0);
    auto base = [&] {
        std::vector<double> x(e.feature_count);
        for (double& v : x) v = noise(rng);
        return x;
    };
    std::vector<std::vector<double>> out;
    const double inf = std::numeric_limits<double>::infinity();
    for (const auto& f : e.tables.features()) {
        for (double t : f.thresholds) {
            for (double probe : {t, std::nextafter(t, -inf), std::nextafter(t, inf)}) {
                auto x = base();
                x[f.input_index] = probe;
                out.push_back(std::move(x));
            }
        }
    }
    for (std::size_t k = 0; k < extra; ++k) {
        auto x = base();
        for (const auto& f : e.tables.features()) {
            const double t = f.thresholds[std::uniform_int_distribution<std::size_t>(0, f.thresholds.size() - 1)(rng)];
            const int side = std::uniform_int_distribution<int>(-1, 1)(rng);
            x[f.input_index] = side == 0 ? t : std::nextafter(t, side * inf);
        }
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace toad::testing
