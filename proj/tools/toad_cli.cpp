// Command-line front end: train, predict, encode, inspect, eval and grid.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "toad/codec.hpp"
#include "toad/dataset.hpp"
#include "toad/error.hpp"
#include "toad/eval.hpp"
#include "toad/model_json.hpp"
#include "toad/trainer.hpp"

namespace fs = std::filesystem;
using namespace toad;

namespace {

constexpr int kExitError = 1;
constexpr int kExitIo = 2;

/// Raised for unreadable inputs or unwritable outputs.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw IoError("input file not found: " + path);
}

struct DataOptions {
    std::string path;
    std::string label = "y";
    std::string task = "regression";
    int classes = 0;

    void add(CLI::App* cmd, bool need_task = true) {
        cmd->add_option("--data", path, "CSV input")->required();
        cmd->add_option("--label", label, "label column: header name or zero-based index")->capture_default_str();
        if (need_task) {
            cmd->add_option("--task", task, "regression, binary or multiclass")
                ->check(CLI::IsMember({"regression", "binary", "multiclass"}))
                ->capture_default_str();
            cmd->add_option("--classes", classes, "class count for multiclass (0 infers from labels)");
        }
    }

    Dataset load() const {
        require_file(path);
        return load_csv(path, LabelColumn::parse(label), parse_task(task, classes));
    }
};

struct ConfigOptions {
    TrainConfig config;
    std::size_t forestsize = 0;

    void add(CLI::App* cmd, bool penalties = true) {
        if (penalties) {
            cmd->add_option("--tinygbdt-penalty-feature", config.penalty_feature, "iota: cost of a new feature")
                ->capture_default_str();
            cmd->add_option("--tinygbdt-penalty-threshold", config.penalty_threshold, "xi: cost of a new threshold")
                ->capture_default_str();
            cmd->add_option("--tinygbdt-forestsize", forestsize, "encoded size budget in bytes (0 = none)");
            cmd->add_option("--max-iterations", config.max_iterations, "boosting rounds")->capture_default_str();
            cmd->add_option("--max-depth", config.max_depth, "maximum tree depth")->capture_default_str();
        }
        cmd->add_option("--learning-rate", config.learning_rate)->capture_default_str();
        cmd->add_option("--lambda", config.lambda, "L2 penalty on leaf values")->capture_default_str();
        cmd->add_option("--gamma", config.gamma, "penalty per leaf")->capture_default_str();
        cmd->add_option("--min-gain", config.min_gain)->capture_default_str();
        cmd->add_option("--max-bins", config.max_bins, "split candidates per feature")->capture_default_str();
        cmd->add_option("--seed", config.seed)->capture_default_str();
    }

    TrainConfig resolve() const {
        TrainConfig c = config;
        if (forestsize > 0) c.forestsize_budget = forestsize;
        c.validate();
        return c;
    }
};

std::string fixed(double v, int digits = 6) {
    std::ostringstream out;
    out << std::setprecision(digits) << v;
    return out.str();
}

void print_size_report(const SizeReport& r, std::ostream& out) {
    out << "size: metadata=" << r.metadata_bits << "b feature_map=" << r.feature_map_bits
        << "b thresholds=" << r.thresholds_bits << "b leaf_values=" << r.leaf_values_bits << "b trees=" << r.trees_bits
        << "b total=" << r.total_bits << "b (" << r.total_bytes << " bytes)\n";
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
    require_file(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("failed writing " + path);
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path);
}

std::string count_word(std::size_t n) {
    static const char* const words[] = {"zero", "one", "two",   "three", "four", "five",
                                        "six",  "seven", "eight", "nine",  "ten"};
    return n <= 10 ? words[n] : std::to_string(n);
}

Ensemble load_model(const std::string& path) { return decode(read_bytes(path)); }

// ---------------------------------------------------------------------------

int run_train(const DataOptions& data, const ConfigOptions& opts, const std::string& output) {
    const TrainConfig config = opts.resolve();
    std::cout << "config: " << config.describe() << '\n';
    const Dataset ds = data.load();
    TrainSummary summary;
    const Ensemble e = train(ds, config, &summary);
    const auto encoded = encode(e);
    write_bytes(output, encoded.bytes);

    std::cout << "data: " << data.path << " rows=" << ds.row_count() << " features=" << ds.feature_count()
              << " task=" << to_string(ds.task()) << '\n';
    std::cout << "trained: rounds=" << summary.rounds << " trees=" << e.trees.size()
              << " internal_nodes=" << e.internal_count() << " leaves=" << e.leaf_count()
              << " used_features=" << e.tables.features().size() << " thresholds=" << e.tables.threshold_count()
              << " leaf_values=" << e.tables.leaf_values().size() << " stop=\"" << to_string(summary.stop) << "\"\n";
    std::cout << "train " << to_string(metric_for(e.task)) << ": " << fixed(score(e, ds)) << '\n';
    print_size_report(size_report(e), std::cout);
    std::cout << "wrote " << output << " (" << encoded.bytes.size() << " bytes)\n";
    return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path, const std::string& label,
                const std::string& output) {
    const Ensemble e = load_model(model_path);
    require_file(data_path);
    const Dataset ds = load_csv(data_path, label.empty() ? LabelColumn::none() : LabelColumn::parse(label),
                                TaskKind::regression());
    if (ds.feature_count() != e.feature_count) {
        throw ConfigError("model expects d=" + std::to_string(e.feature_count) + " features, data has d=" +
                          std::to_string(ds.feature_count()));
    }
    std::ostringstream out;
    out << "prediction";
    const int probability_columns = e.task.type == TaskType::Regression ? 0 : std::max(2, e.class_count());
    for (int c = 0; c < probability_columns; ++c) out << ",p" << c;
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t i = 0; i < ds.row_count(); ++i) {
        const Prediction p = predict(e, ds.row(i));
        out << p.value;
        for (double prob : p.probabilities) out << ',' << prob;
        out << '\n';
    }
    write_text(output, out.str());
    std::cout << "wrote " << ds.row_count() << " predictions to " << output << '\n';
    return 0;
}

int run_encode(const std::string& json_path, const std::string& output) {
    require_file(json_path);
    std::ifstream in(json_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& err) {
        throw ConfigError(json_path + ": " + err.what());
    }
    const Ensemble e = model_from_json(j);
    const auto encoded = encode(e);
    write_bytes(output, encoded.bytes);
    print_size_report(size_report(e), std::cout);
    std::cout << "wrote " << output << " (" << encoded.bytes.size() << " bytes)\n";
    return 0;
}

int run_inspect(const std::string& model_path, const std::string& json_out) {
    const Ensemble e = load_model(model_path);
    const auto& tables = e.tables;
    std::cout << "task: " << to_string(e.task) << '\n'
              << "K (trees): " << e.trees.size() << '\n'
              << "max_depth: " << e.max_depth << '\n'
              << "input features (d): " << e.feature_count << '\n'
              << "used features |F_U|: " << tables.features().size() << '\n'
              << "max thresholds per feature: " << tables.max_threshold_count() << '\n'
              << "global thresholds: " << tables.threshold_count() << '\n'
              << "global leaf values: " << tables.leaf_values().size() << '\n';
    std::cout << "feature & threshold map:\n";
    for (std::size_t ref = 0; ref < tables.features().size(); ++ref) {
        const auto& f = tables.feature(ref);
        const std::size_t count = f.thresholds.size();
        std::cout << "  [" << ref << "] input feature " << f.input_index << ": " << count_word(count) << ' '
                  << f.width_bits() << "-bit " << (count == 1 ? "threshold" : "thresholds") << ", "
                  << (f.numeric_type == NumericType::Integer ? "integer" : "float") << " {";
        for (std::size_t t = 0; t < count; ++t) std::cout << (t ? ", " : "") << f.thresholds[t];
        std::cout << "}\n";
    }
    print_size_report(size_report(e), std::cout);
    if (e.trees.empty()) {
        std::cout << "reuse factor: n/a (empty model)\n";
    } else {
        std::cout << "reuse factor: " << fixed(reuse_factor(e)) << '\n';
    }
    for (std::size_t k = 0; k < e.trees.size(); ++k) {
        const auto& t = e.trees[k];
        std::cout << "tree " << k << ": internal=" << t.internal_count() << " leaves=" << t.leaf_count()
                  << " depth=" << t.depth() << '\n';
    }
    if (!json_out.empty()) write_text(json_out, model_to_json(e).dump(2) + "\n");
    return 0;
}

int run_eval(const std::string& model_path, const DataOptions& data) {
    const Ensemble e = load_model(model_path);
    DataOptions d = data;
    switch (e.task.type) {
        case TaskType::Regression:
            d.task = "regression";
            break;
        case TaskType::Binary:
            d.task = "binary";
            break;
        case TaskType::Multiclass:
            d.task = "multiclass";
            d.classes = e.class_count();
            break;
    }
    const Dataset ds = d.load();
    if (ds.feature_count() != e.feature_count) {
        throw ConfigError("model expects d=" + std::to_string(e.feature_count) + " features, data has d=" +
                          std::to_string(ds.feature_count()));
    }
    TrainConfig unknown;
    unknown.max_depth = e.max_depth;
    unknown.max_iterations = static_cast<int>(e.trees.size() / static_cast<std::size_t>(e.class_count()));
    const EvalReport report = evaluate(e, ds, unknown);
    auto j = to_json(report);
    j.erase("config");
    std::cout << j.dump(2) << '\n';
    return 0;
}

struct GridOptions {
    std::vector<double> iota;
    std::vector<double> xi;
    std::vector<int> iterations{256};
    std::vector<int> depths{2};
    std::size_t budget = 0;
    bool pareto = false;
    std::string csv;
    std::string json;
    int jobs = 1;
    double test_fraction = 0.2;
};

int run_grid(const DataOptions& data, const ConfigOptions& opts, GridOptions g) {
    TrainConfig base = opts.resolve();
    if (g.iota.empty()) g.iota = penalty_grid(-10, 15);
    if (g.xi.empty()) g.xi = penalty_grid(-10, 15);
    std::cout << "config: " << base.describe() << " test_fraction=" << g.test_fraction
              << " budget=" << (g.budget ? std::to_string(g.budget) : std::string("none")) << " jobs=" << g.jobs << '\n';
    const Dataset ds = data.load();
    auto [train_ds, test] = split_train_test(ds, g.test_fraction, base.seed);
    GridSpec spec{g.iota, g.xi, g.iterations, g.depths};
    std::cout << "grid: " << spec.size() << " configurations, train rows=" << train_ds.row_count()
              << " test rows=" << test.row_count() << '\n';
    auto rows = grid_search(train_ds, test, spec, base,
                            g.budget ? std::optional<std::size_t>(g.budget) : std::nullopt, g.jobs);
    if (g.pareto) rows = pareto_filter(rows);
    if (!g.csv.empty()) write_text(g.csv, grid_csv(rows));
    if (!g.json.empty()) write_text(g.json, grid_json(rows).dump(2) + "\n");
    std::cout << "rows: " << rows.size() << '\n';
    if (!rows.empty()) {
        const GridRow* best = &rows.front();
        for (const auto& r : rows) {
            if (r.report.metric_value > best->report.metric_value) best = &r;
        }
        std::cout << "best: " << to_string(best->report.metric) << '=' << fixed(best->report.metric_value)
                  << " toad_bytes=" << best->report.toad_bytes << " iota=" << best->penalty_feature
                  << " xi=" << best->penalty_threshold << " max_iterations=" << best->max_iterations
                  << " max_depth=" << best->max_depth << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trains boosted tree ensembles that reuse features and thresholds, and packs them into a "
                 "compact bit-level format"};
    app.require_subcommand(1);

    DataOptions train_data;
    ConfigOptions train_config;
    std::string train_output;
    auto* train_cmd = app.add_subcommand("train", "train an ensemble and write a .toad model");
    train_data.add(train_cmd);
    train_config.add(train_cmd);
    train_cmd->add_option("-o,--output", train_output, "output .toad file")->required();

    std::string predict_model, predict_data, predict_label, predict_output;
    auto* predict_cmd = app.add_subcommand("predict", "write per-row predictions as CSV");
    predict_cmd->add_option("--model", predict_model)->required();
    predict_cmd->add_option("--data", predict_data)->required();
    predict_cmd->add_option("--label", predict_label, "label column to drop, if the file has one");
    predict_cmd->add_option("-o,--output", predict_output)->required();

    std::string encode_json, encode_output;
    auto* encode_cmd = app.add_subcommand("encode", "pack a JSON model description into a .toad file");
    encode_cmd->add_option("--json", encode_json, "model description")->required();
    encode_cmd->add_option("-o,--output", encode_output)->required();

    std::string inspect_model, inspect_json;
    auto* inspect_cmd = app.add_subcommand("inspect", "print the layout of a .toad file");
    inspect_cmd->add_option("model", inspect_model)->required();
    inspect_cmd->add_option("--json", inspect_json, "also write the model as JSON");

    std::string eval_model;
    DataOptions eval_data;
    auto* eval_cmd = app.add_subcommand("eval", "score a .toad model and report its memory footprint");
    eval_cmd->add_option("--model", eval_model)->required();
    eval_data.add(eval_cmd, false);

    DataOptions grid_data;
    ConfigOptions grid_config;
    GridOptions grid;
    auto* grid_cmd = app.add_subcommand("grid", "penalty grid search with CSV/JSON reports");
    grid_data.add(grid_cmd);
    grid_config.add(grid_cmd, false);
    grid_cmd->add_option("--iota", grid.iota, "feature penalties (default 0 and 2^-10..2^15)")->delimiter(',');
    grid_cmd->add_option("--xi", grid.xi, "threshold penalties (default 0 and 2^-10..2^15)")->delimiter(',');
    grid_cmd->add_option("--iterations", grid.iterations, "max_iterations values")->delimiter(',')->capture_default_str();
    grid_cmd->add_option("--depths", grid.depths, "max_depth values")->delimiter(',')->capture_default_str();
    grid_cmd->add_option("--budget", grid.budget, "encoded size budget in bytes (0 = none)");
    grid_cmd->add_flag("--pareto", grid.pareto, "keep only nondominated rows");
    grid_cmd->add_option("--csv", grid.csv, "CSV report path");
    grid_cmd->add_option("--json", grid.json, "JSON report path");
    grid_cmd->add_option("--jobs", grid.jobs, "parallel trainings")->capture_default_str();
    grid_cmd->add_option("--test-fraction", grid.test_fraction)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*train_cmd) return run_train(train_data, train_config, train_output);
        if (*predict_cmd) return run_predict(predict_model, predict_data, predict_label, predict_output);
        if (*encode_cmd) return run_encode(encode_json, encode_output);
        if (*inspect_cmd) return run_inspect(inspect_model, inspect_json);
        if (*eval_cmd) return run_eval(eval_model, eval_data);
        if (*grid_cmd) return run_grid(grid_data, grid_config, grid);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
