#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace toad {

enum class TaskType : std::uint8_t { Regression = 0, Binary = 1, Multiclass = 2 };

/// Learning task. class_count is 1 for regression, 2 for binary and >= 3 for
/// multiclass.
struct TaskKind {
    TaskType type = TaskType::Regression;
    int class_count = 1;

    static TaskKind regression() { return {TaskType::Regression, 1}; }
    static TaskKind binary() { return {TaskType::Binary, 2}; }
    /// Throws ConfigError for fewer than 3 classes.
    static TaskKind multiclass(int classes);

    bool is_classification() const { return type != TaskType::Regression; }
    /// Number of raw scores (and trees per boosting round).
    int score_count() const { return type == TaskType::Multiclass ? class_count : 1; }

    friend bool operator==(const TaskKind&, const TaskKind&) = default;
};

std::string to_string(const TaskKind& task);
/// Parses "regression", "binary" or "multiclass"; multiclass takes the
/// class count separately (0 means infer from labels when loading).
TaskKind parse_task(const std::string& name, int class_count = 0);

/// Dense row-major feature matrix with labels.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<double> features, std::vector<double> labels, std::size_t feature_count,
            TaskKind task, std::vector<std::string> feature_names = {});

    std::size_t row_count() const { return labels_.size(); }
    std::size_t feature_count() const { return feature_count_; }
    const TaskKind& task() const { return task_; }

    std::span<const double> row(std::size_t i) const {
        return {features_.data() + i * feature_count_, feature_count_};
    }
    double value(std::size_t row, std::size_t feature) const {
        return features_[row * feature_count_ + feature];
    }
    double label(std::size_t i) const { return labels_[i]; }
    const std::vector<double>& labels() const { return labels_; }
    const std::vector<double>& features() const { return features_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }

    /// Copies the given rows, in the given order.
    Dataset subset(std::span<const std::size_t> rows) const;

private:
    std::vector<double> features_;
    std::vector<double> labels_;
    std::size_t feature_count_ = 0;
    TaskKind task_;
    std::vector<std::string> feature_names_;
};

/// Label column selector: either a header name or a zero-based index.
struct LabelColumn {
    std::string name;
    long index = -1;

    static LabelColumn by_name(std::string n) { return {std::move(n), -1}; }
    static LabelColumn by_index(long i) { return {{}, i}; }
    /// Every column is a feature; labels are left at 0.
    static LabelColumn none() { return {{}, -2}; }
    bool is_none() const { return index == -2; }
    /// Integers select by index, anything else by name.
    static LabelColumn parse(const std::string& spec);
};

/// Reads a comma-separated file. The first row is treated as a header when
/// any of its cells is not numeric. With LabelColumn::none() the task is
/// ignored and every column becomes a feature. For a multiclass task with
/// class_count == 0 the count is inferred as max label + 1.
Dataset load_csv(const std::filesystem::path& path, const LabelColumn& label, TaskKind task);
Dataset parse_csv(const std::string& text, const LabelColumn& label, TaskKind task,
                  const std::string& source = "<memory>");

/// Writes features then a trailing label column named "y", with a header.
/// Values use shortest round-trip formatting, so load_csv restores them
/// bit for bit.
void write_csv(const Dataset& ds, const std::filesystem::path& path);
std::string format_csv(const Dataset& ds);

/// Seeded shuffle into (train, test). The test part holds
/// floor(n * test_fraction) rows; both parts keep the original row order.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed);
/// Same partition as split_train_test, as row indices.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t row_count, double test_fraction, std::uint64_t seed);

/// Split thresholds per feature.
struct CandidateSet {
    std::vector<std::vector<double>> thresholds;  // strictly increasing per feature
    std::vector<bool> is_integer_valued;

    std::size_t feature_count() const { return thresholds.size(); }
};

inline constexpr int kDefaultMaxBins = 255;

/// Midpoints between adjacent distinct values of each feature. Features with
/// more than max_bins gaps keep the gaps at evenly spaced quantile ranks of
/// the data.
CandidateSet candidate_thresholds(const Dataset& ds, int max_bins = kDefaultMaxBins);

}  // namespace toad
