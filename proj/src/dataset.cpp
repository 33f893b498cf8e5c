#include "toad/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "toad/error.hpp"

namespace toad {

TaskKind TaskKind::multiclass(int classes) {
    if (classes < 3) {
        throw ConfigError("multiclass task needs at least 3 classes, got " + std::to_string(classes));
    }
    return {TaskType::Multiclass, classes};
}

std::string to_string(const TaskKind& task) {
    switch (task.type) {
        case TaskType::Regression:
            return "regression";
        case TaskType::Binary:
            return "binary";
        case TaskType::Multiclass:
            return "multiclass(" + std::to_string(task.class_count) + ")";
    }
    return "unknown";
}

TaskKind parse_task(const std::string& name, int class_count) {
    if (name == "regression") return TaskKind::regression();
    if (name == "binary") return TaskKind::binary();
    if (name == "multiclass") {
        if (class_count == 0) return {TaskType::Multiclass, 0};
        return TaskKind::multiclass(class_count);
    }
    throw ConfigError("unknown task '" + name + "' (expected regression, binary or multiclass)");
}

Dataset::Dataset(std::vector<double> features, std::vector<double> labels, std::size_t feature_count,
                 TaskKind task, std::vector<std::string> feature_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      feature_count_(feature_count),
      task_(task),
      feature_names_(std::move(feature_names)) {
    if (feature_count_ == 0) throw DataError("dataset needs at least one feature");
    if (features_.size() != labels_.size() * feature_count_) {
        throw DataError("feature matrix size does not match row count x feature count");
    }
    if (!feature_names_.empty() && feature_names_.size() != feature_count_) {
        throw DataError("feature name count does not match feature count");
    }
    for (double v : features_) {
        if (!std::isfinite(v)) throw DataError("feature values must be finite");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        const double y = labels_[i];
        if (!std::isfinite(y)) throw DataError("label of row " + std::to_string(i) + " is not finite");
        if (task_.is_classification()) {
            if (y != std::floor(y) || y < 0 || y >= task_.class_count) {
                throw DataError("label of row " + std::to_string(i) + " is outside [0, " +
                                std::to_string(task_.class_count) + ")");
            }
        }
    }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    std::vector<double> features;
    std::vector<double> labels;
    features.reserve(rows.size() * feature_count_);
    labels.reserve(rows.size());
    for (std::size_t r : rows) {
        auto src = row(r);
        features.insert(features.end(), src.begin(), src.end());
        labels.push_back(labels_[r]);
    }
    return Dataset(std::move(features), std::move(labels), feature_count_, task_, feature_names_);
}

LabelColumn LabelColumn::parse(const std::string& spec) {
    long index = 0;
    auto [ptr, ec] = std::from_chars(spec.data(), spec.data() + spec.size(), index);
    if (ec == std::errc() && ptr == spec.data() + spec.size() && index >= 0) return by_index(index);
    return by_name(spec);
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

bool parse_number(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size();
}

}  // namespace

Dataset parse_csv(const std::string& text, const LabelColumn& label, TaskKind task,
                  const std::string& source) {
    std::vector<std::string_view> lines;
    {
        std::string_view rest = text;
        if (rest.size() >= 3 && rest.substr(0, 3) == "\xEF\xBB\xBF") rest.remove_prefix(3);
        while (!rest.empty()) {
            auto nl = rest.find('\n');
            auto line = rest.substr(0, nl);
            if (!trim(line).empty()) lines.push_back(line);
            if (nl == std::string_view::npos) break;
            rest.remove_prefix(nl + 1);
        }
    }
    if (lines.empty()) throw DataError(source + ": file is empty");

    auto first = split_line(lines.front());
    const std::size_t columns = first.size();
    if (columns < (label.is_none() ? 1u : 2u)) {
        throw DataError(source + ": need at least one feature column and a label column");
    }

    bool has_header = false;
    for (auto cell : first) {
        double v;
        if (!cell.empty() && !parse_number(cell, v)) has_header = true;
    }
    std::vector<std::string> names;
    if (has_header) {
        for (auto cell : first) names.emplace_back(cell);
    }

    const bool unlabeled = label.is_none();
    if (unlabeled) task = TaskKind::regression();
    std::size_t label_col = columns;  // no label column
    if (label.index >= 0) {
        label_col = static_cast<std::size_t>(label.index);
        if (label_col >= columns) {
            throw DataError(source + ": label column index " + std::to_string(label.index) +
                            " out of range (" + std::to_string(columns) + " columns)");
        }
    } else if (!unlabeled) {
        if (!has_header) throw DataError(source + ": label column '" + label.name + "' requested but file has no header");
        auto it = std::find(names.begin(), names.end(), label.name);
        if (it == names.end()) throw DataError(source + ": no column named '" + label.name + "'");
        label_col = static_cast<std::size_t>(it - names.begin());
    }

    std::vector<std::string> feature_names;
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (c != label_col) feature_names.push_back(names[c]);
    }

    std::vector<double> features;
    std::vector<double> labels;
    const std::size_t first_data = has_header ? 1 : 0;
    for (std::size_t li = first_data; li < lines.size(); ++li) {
        auto cells = split_line(lines[li]);
        const std::size_t row_number = li + 1;  // 1-based line number in the file
        if (cells.size() != columns) {
            throw DataError(source + ": row " + std::to_string(row_number) + " has " +
                            std::to_string(cells.size()) + " columns, expected " + std::to_string(columns));
        }
        for (std::size_t c = 0; c < columns; ++c) {
            if (cells[c].empty()) {
                throw DataError(source + ": missing value at row " + std::to_string(row_number) +
                                ", column " + std::to_string(c));
            }
            double v;
            if (!parse_number(cells[c], v) || !std::isfinite(v)) {
                throw DataError(source + ": cannot parse '" + std::string(cells[c]) + "' at row " +
                                std::to_string(row_number) + ", column " + std::to_string(c));
            }
            if (c == label_col) {
                if (task.is_classification() && (v != std::floor(v) || v < 0 ||
                                                  (task.class_count > 0 && v >= task.class_count))) {
                    throw DataError(source + ": label '" + std::string(cells[c]) + "' at row " +
                                    std::to_string(row_number) + " is not a class index in [0, " +
                                    std::to_string(task.class_count) + ")");
                }
                labels.push_back(v);
            } else {
                features.push_back(v);
            }
        }
    }
    if (unlabeled) labels.assign(features.size() / columns, 0.0);
    if (labels.empty()) throw DataError(source + ": no data rows");

    if (task.type == TaskType::Multiclass && task.class_count == 0) {
        const double max_label = *std::max_element(labels.begin(), labels.end());
        task = TaskKind::multiclass(static_cast<int>(max_label) + 1);
    }
    return Dataset(std::move(features), std::move(labels), unlabeled ? columns : columns - 1, task,
                   std::move(feature_names));
}

Dataset load_csv(const std::filesystem::path& path, const LabelColumn& label, TaskKind task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), label, task, path.string());
}

namespace {

void append_number(std::string& out, double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

}  // namespace

std::string format_csv(const Dataset& ds) {
    std::string out;
    for (std::size_t f = 0; f < ds.feature_count(); ++f) {
        out += ds.feature_names().empty() ? "f" + std::to_string(f) : ds.feature_names()[f];
        out += ',';
    }
    out += "y\n";
    for (std::size_t r = 0; r < ds.row_count(); ++r) {
        for (double v : ds.row(r)) {
            append_number(out, v);
            out += ',';
        }
        append_number(out, ds.label(r));
        out += '\n';
    }
    return out;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << format_csv(ds);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t row_count,
                                                                            double test_fraction,
                                                                            std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw DataError("test fraction must lie in (0, 1)");
    }
    const auto test_size = static_cast<std::size_t>(std::floor(static_cast<double>(row_count) * test_fraction));
    if (test_size < 1 || row_count - test_size < 1) {
        throw DataError("dataset with " + std::to_string(row_count) + " rows is too small for test fraction " +
                        std::to_string(test_fraction));
    }
    std::vector<std::size_t> perm(row_count);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(test_size));
    std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(test_size), perm.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    auto [train, test] = split_indices(ds.row_count(), test_fraction, seed);
    return {ds.subset(train), ds.subset(test)};
}

namespace {

// Strictly between lo and hi when the doubles allow it; otherwise lo, which
// still separates the two values under the x <= threshold rule.
double midpoint(double lo, double hi) {
    double mid = lo + (hi - lo) * 0.5;
    if (!(mid < hi) || !(mid >= lo)) mid = lo;
    return mid;
}

}  // namespace

CandidateSet candidate_thresholds(const Dataset& ds, int max_bins) {
    if (max_bins < 1) throw ConfigError("max_bins must be at least 1");
    const std::size_t n = ds.row_count();
    CandidateSet out;
    out.thresholds.resize(ds.feature_count());
    out.is_integer_valued.resize(ds.feature_count());

    std::vector<double> values(n);
    for (std::size_t f = 0; f < ds.feature_count(); ++f) {
        for (std::size_t r = 0; r < n; ++r) values[r] = ds.value(r, f);
        std::sort(values.begin(), values.end());
        out.is_integer_valued[f] =
            std::all_of(values.begin(), values.end(), [](double v) { return v == std::floor(v); });

        std::vector<double> distinct;
        std::vector<std::size_t> cumulative;  // rows with value <= distinct[j]
        for (std::size_t r = 0; r < n; ++r) {
            if (distinct.empty() || values[r] != distinct.back()) {
                distinct.push_back(values[r]);
                cumulative.push_back(0);
            }
            cumulative.back() = r + 1;
        }
        const std::size_t gaps = distinct.size() - 1;
        auto& cands = out.thresholds[f];
        if (gaps <= static_cast<std::size_t>(max_bins)) {
            for (std::size_t j = 0; j < gaps; ++j) cands.push_back(midpoint(distinct[j], distinct[j + 1]));
            continue;
        }
        std::set<std::size_t> chosen;
        for (int k = 1; k <= max_bins; ++k) {
            const double rank = static_cast<double>(k) * static_cast<double>(n) / (max_bins + 1);
            auto it = std::lower_bound(cumulative.begin(), cumulative.end(), rank,
                                       [](std::size_t c, double r) { return static_cast<double>(c) < r; });
            auto j = static_cast<std::size_t>(it - cumulative.begin());
            chosen.insert(std::min(j, gaps - 1));
        }
        for (std::size_t j : chosen) cands.push_back(midpoint(distinct[j], distinct[j + 1]));
    }
    return out;
}

}  // namespace toad
