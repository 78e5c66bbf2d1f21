#pragma once

#include "dcilab/active.hpp"
#include "dcilab/common.hpp"
#include "dcilab/dataset.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>

namespace dcilab {

/// Flat `dotted.key = value` configuration. Later sources override earlier
/// ones key by key.
class Config {
public:
    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> keys = {
            "data.format",        "data.path",          "data.spec",           "data.test_path",
            "data.images",        "data.labels",        "data.test_images",    "data.test_labels",
            "data.test_size",     "data.pool_subsample", "data.test_subsample", "data.missing",
            "data.standardize",   "data.standardize_indicators",
            "schedule.initial",   "schedule.candidates", "schedule.additions",  "schedule.updates",
            "run.seed",           "run.seeds",          "run.strategies",      "run.metric",
            "dci.k",              "dci.alpha",          "dci.beta",            "dci.epsilon",
            "model.kind",         "model.trees",        "model.max_depth",     "model.min_leaf",
            "model.knn_k",
            "analyze.train_sizes", "analyze.splits",    "analyze.alphas",      "analyze.betas",
            "analyze.uncertainty",
        };
        return keys;
    }

    static bool is_path_key(const std::string& key) {
        return key == "data.path" || key == "data.spec" || key == "data.test_path" || key == "data.images" ||
               key == "data.labels" || key == "data.test_images" || key == "data.test_labels";
    }

    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against `base_dir` when it is non-empty.
    static Config parse(std::string_view text, const std::filesystem::path& base_dir = {}) {
        Config c;
        std::istringstream in{std::string(text)};
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string_view v = line;
            if (auto h = v.find('#'); h != std::string_view::npos) v = v.substr(0, h);
            v = trim(v);
            if (v.empty()) continue;
            const auto eq = v.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
            std::string key(trim(v.substr(0, eq)));
            std::string value(trim(v.substr(eq + 1)));
            if (!known_keys().count(key)) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
            if (is_path_key(key) && !base_dir.empty() && !value.empty() && std::filesystem::path(value).is_relative())
                value = (base_dir / value).lexically_normal().string();
            c.values_[key] = value;
        }
        return c;
    }

    static Config load(const std::string& path) {
        std::string text;
        try {
            text = read_text_file(path);
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
        return parse(text, std::filesystem::path(path).parent_path());
    }

    void merge(const Config& other) {
        for (const auto& [k, v] : other.values_) values_[k] = v;
    }
    void set(const std::string& key, const std::string& value) {
        if (!known_keys().count(key)) throw ConfigError("unknown key '" + key + "'");
        values_[key] = value;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::map<std::string, std::string>& values() const { return values_; }

    std::string str(const std::string& key, const std::string& fallback = {}) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }
    std::string required(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end() || it->second.empty()) throw ConfigError("missing required key '" + key + "'");
        return it->second;
    }
    double real(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        double v;
        if (!parse_double(str(key), v)) throw ConfigError("key '" + key + "': not a number");
        return v;
    }
    long integer(const std::string& key, long fallback) const {
        const double v = real(key, static_cast<double>(fallback));
        if (v != std::floor(v)) throw ConfigError("key '" + key + "': not an integer");
        return static_cast<long>(v);
    }
    std::size_t count(const std::string& key, std::size_t fallback) const {
        const long v = integer(key, static_cast<long>(fallback));
        if (v < 0) throw ConfigError("key '" + key + "': must be non-negative");
        return static_cast<std::size_t>(v);
    }
    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto v = str(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("key '" + key + "': expected true/false");
    }
    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        const std::string value = str(key);
        std::string_view s = value;
        while (!s.empty()) {
            const auto c = s.find(',');
            const auto item = trim(s.substr(0, c));
            if (!item.empty()) out.emplace_back(item);
            if (c == std::string_view::npos) break;
            s.remove_prefix(c + 1);
        }
        return out;
    }
    std::vector<double> reals(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : list(key)) {
            double v;
            if (!parse_double(item, v)) throw ConfigError("key '" + key + "': '" + item + "' is not a number");
            out.push_back(v);
        }
        return out;
    }

    /// Sorted `key = value` lines.
    std::string snapshot() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

private:
    std::map<std::string, std::string> values_;
};

/// Built-in experiment presets mirroring the published schedules. Data paths
/// are relative to the working directory.
inline Config preset(const std::string& name) {
    std::string text;
    if (name == "adult") {
        text = R"(
data.path = data/adult_train.csv
data.spec = data/adult.spec
data.test_path = data/adult_test.csv
schedule.initial = 1162
schedule.candidates = 5
schedule.additions = 200
schedule.updates = 29
run.seeds = 20
run.strategies = random, dci_high, model_eq3_binary, dci_low
run.metric = auroc
model.kind = trees
model.trees = 10
model.max_depth = 6
model.min_leaf = 5
dci.k = 20
dci.alpha = 1.5
dci.beta = 1.2
analyze.train_sizes = 10, 15, 20, 50
analyze.splits = 20
analyze.alphas = 1.0, 1.5, 2.0
analyze.betas = 0.9, 1.1, 1.3
analyze.uncertainty = eq3_binary
data.test_subsample = 2000
)";
    } else if (name == "wine-red" || name == "wine-white") {
        const bool red = name == "wine-red";
        text = std::string("data.path = data/winequality-") + (red ? "red" : "white") + ".csv\n" + R"(
data.spec = data/wine.spec
run.seeds = 30
run.strategies = random, dci_high, model_regression_std, dci_low
run.metric = rmse
model.kind = trees
model.trees = 100
model.max_depth = -1
model.min_leaf = 1
schedule.candidates = 5
dci.k = 20
dci.alpha = 1.5
dci.beta = 1.2
)" + (red ? "data.test_size = 599\nschedule.initial = 200\nschedule.additions = 10\nschedule.updates = 18\n"
          : "data.test_size = 1398\nschedule.initial = 500\nschedule.additions = 25\nschedule.updates = 24\n");
    } else if (name == "mnist-small") {
        text = R"(
data.format = idx
data.images = data/train-images-idx3-ubyte
data.labels = data/train-labels-idx1-ubyte
data.test_images = data/t10k-images-idx3-ubyte
data.test_labels = data/t10k-labels-idx1-ubyte
data.standardize = false
data.pool_subsample = 10000
data.test_subsample = 2000
schedule.initial = 10
schedule.candidates = 5
schedule.additions = 5
schedule.updates = 18
run.seeds = 30
run.strategies = random, dci_high, dci_low, model_max_prob, dci_high_pca10, dci_low_pca10
run.metric = accuracy
model.kind = trees
model.trees = 10
model.max_depth = -1
model.min_leaf = 1
dci.k = 10
dci.alpha = 1.5
dci.beta = 1.2
)";
    } else if (name == "mnist-pca") {
        text = R"(
data.format = idx
data.images = data/train-images-idx3-ubyte
data.labels = data/train-labels-idx1-ubyte
data.test_images = data/t10k-images-idx3-ubyte
data.test_labels = data/t10k-labels-idx1-ubyte
data.standardize = false
data.pool_subsample = 10000
data.test_subsample = 2000
schedule.initial = 500
schedule.candidates = 5
schedule.additions = 200
schedule.updates = 10
run.seeds = 20
run.strategies = random, dci_high, model_mean_std, dci_high_pca20
run.metric = accuracy
model.kind = trees
model.trees = 10
model.max_depth = -1
model.min_leaf = 1
dci.k = 20
dci.alpha = 1.5
dci.beta = 1.2
)";
    } else {
        throw ConfigError("unknown preset '" + name + "' (adult, wine-red, wine-white, mnist-small, mnist-pca)");
    }
    return Config::parse(text);
}

inline DciParams dci_params_from(const Config& c) {
    DciParams p;
    p.k = c.count("dci.k", p.k);
    p.alpha = c.real("dci.alpha", p.alpha);
    p.beta = c.real("dci.beta", p.beta);
    p.epsilon = c.real("dci.epsilon", p.epsilon);
    p.validate();
    return p;
}

inline Metric metric_from(const Config& c) {
    const auto m = c.str("run.metric", "accuracy");
    if (m == "auroc") return Metric::auroc;
    if (m == "accuracy") return Metric::accuracy;
    if (m == "rmse") return Metric::rmse;
    throw ConfigError("unknown metric '" + m + "'");
}

inline ModelConfig model_config_from(const Config& c) {
    ModelConfig m;
    const auto kind = c.str("model.kind", "trees");
    if (kind == "trees")
        m.kind = ModelKind::trees;
    else if (kind == "knn")
        m.kind = ModelKind::knn;
    else
        throw ConfigError("unknown model kind '" + kind + "'");
    m.ensemble.n_trees = c.count("model.trees", 10);
    m.ensemble.max_depth = static_cast<int>(c.integer("model.max_depth", -1));
    m.ensemble.min_leaf = std::max<std::size_t>(1, c.count("model.min_leaf", 1));
    m.knn_k = c.count("model.knn_k", 5);
    if (m.knn_k == 0) throw ConfigError("model.knn_k must be >= 1");
    return m;
}

inline Schedule schedule_from(const Config& c) {
    Schedule s;
    s.initial = c.count("schedule.initial", s.initial);
    s.candidates = c.count("schedule.candidates", s.candidates);
    s.additions = c.count("schedule.additions", s.additions);
    s.updates = c.count("schedule.updates", s.updates);
    return s;
}

inline std::vector<Strategy> strategies_from(const Config& c) {
    const auto dci = dci_params_from(c);
    std::vector<Strategy> out;
    for (const auto& name : c.list("run.strategies")) out.push_back(parse_strategy(name, dci));
    if (out.empty()) out.push_back(Strategy::random());
    return out;
}

struct LoadedData {
    DataSource source;
    /// Paths of every file read, in a fixed order.
    std::vector<std::string> files;
};

/// Loads, encodes and packages the configured dataset(s).
inline LoadedData load_data(const Config& c) {
    LoadedData out;
    auto& src = out.source;
    const auto format = c.str("data.format", "csv");
    if (format == "csv") {
        CsvOptions opts;
        if (c.has("data.missing")) {
            opts.missing_tokens = c.list("data.missing");
            opts.missing_tokens.push_back("");
        }
        const auto spec_path = c.required("data.spec");
        const auto path = c.required("data.path");
        auto specs = read_column_specs(spec_path);
        Dataset train = load_csv(path, specs, opts);
        out.files = {spec_path, path};
        if (c.has("data.test_path")) {
            const auto test_path = c.required("data.test_path");
            Dataset test = load_csv(test_path, learned_specs(train), opts);
            out.files.push_back(test_path);
            // The test file may add categories; widen the training encoding to match.
            for (auto& col : train.columns) {
                for (const auto& tc : test.columns) {
                    if (tc.name == col.name) col.categories = tc.categories;
                }
            }
            train.label = test.label;
            train.class_names = test.class_names;
            src.test = one_hot(test);
        }
        src.data = one_hot(train);
    } else if (format == "idx") {
        const auto images = c.required("data.images");
        const auto labels = c.required("data.labels");
        src.data = load_idx(images, labels);
        out.files = {images, labels};
        if (c.has("data.test_images")) {
            const auto ti = c.required("data.test_images");
            const auto tl = c.required("data.test_labels");
            src.test = load_idx(ti, tl);
            out.files.push_back(ti);
            out.files.push_back(tl);
            const auto n = std::max(src.data.class_names.size(), src.test->class_names.size());
            for (auto* ds : {&src.data, &*src.test}) {
                while (ds->class_names.size() < n) ds->class_names.push_back(std::to_string(ds->class_names.size()));
                ds->label.categories = ds->class_names;
            }
        }
    } else {
        throw ConfigError("unknown data.format '" + format + "'");
    }
    src.test_size = c.count("data.test_size", 0);
    src.pool_subsample = c.count("data.pool_subsample", 0);
    src.test_subsample = c.count("data.test_subsample", 0);
    src.standardize = c.flag("data.standardize", true);
    src.standardize_options.indicators = c.flag("data.standardize_indicators", false);
    if (!src.test && src.test_size == 0) throw ConfigError("data: need data.test_path or data.test_size");
    return out;
}

}  // namespace dcilab
