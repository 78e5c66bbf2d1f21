#pragma once

#include "dcilab/active.hpp"
#include "dcilab/config.hpp"
#include "dcilab/dci.hpp"
#include "dcilab/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dcilab {

inline constexpr std::string_view kToolVersion = "1.0.0";

struct DatasetFingerprint {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::uint64_t content_hash = 0;
};

/// Row/column counts of the encoded pool plus a hash over the raw bytes of
/// every input file.
inline DatasetFingerprint fingerprint(const LoadedData& data) {
    DatasetFingerprint fp;
    fp.rows = data.source.data.rows() + (data.source.test ? data.source.test->rows() : 0);
    fp.cols = data.source.data.dims();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& f : data.files) h = fnv1a(read_text_file(f), h);
    fp.content_hash = h;
    return fp;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void write_manifest(const std::filesystem::path& path, std::string_view command, const Config& cfg,
                           std::uint64_t seed, const DatasetFingerprint& fp,
                           const std::map<std::string, std::string>& outputs) {
    nlohmann::json j;
    j["tool"] = "dci_lab";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = cfg.values();
    j["dataset"] = {{"rows", fp.rows}, {"cols", fp.cols}, {"content_hash", hex64(fp.content_hash)}};
    j["outputs"] = outputs;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

// ---------------------------------------------------------------------------
// score

struct ScoreRequest {
    std::string data_path;
    std::string spec_path;
    std::string query_path;
    DciParams params;
    CsvOptions csv;
};

/// DCI of every query row against the labelled dataset. Both files share the
/// dataset's categorical encoding and standardization statistics.
inline std::vector<double> score_queries(const ScoreRequest& req) {
    req.params.validate();
    auto specs = read_column_specs(req.spec_path);
    Dataset data = load_csv(req.data_path, specs, req.csv);
    const std::string qtext = read_text_file(req.query_path);
    if (trim(qtext).empty()) return {};
    Dataset query = parse_csv(qtext, learned_specs(data), req.csv, /*require_label=*/false);
    for (auto& col : data.columns) {
        for (const auto& qc : query.columns) {
            if (qc.name == col.name) col.categories = qc.categories;
        }
    }
    if (query.columns.size() != data.columns.size()) throw DataError("score: query columns do not match the dataset");
    data = one_hot(data);
    query = one_hot(query);
    if (query.rows() == 0) return {};

    std::vector<std::size_t> all(data.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto st = Standardizer::fit(data, all);
    st.apply(data.features);
    st.apply(query.features);
    const auto classes = class_labels(data);
    return dci_scores(LabelledPool(data.features, classes.ids), query.features, req.params, classes.count);
}

inline void write_scores_csv(std::ostream& out, std::span<const double> scores) {
    out << "index,dci\n";
    for (std::size_t i = 0; i < scores.size(); ++i) out << i << ',' << format_real(scores[i]) << '\n';
}

// ---------------------------------------------------------------------------
// grid

struct GridRequest {
    std::string data_path;
    std::string spec_path;
    GridSpec grid;
    DciParams params;
};

/// DCI field over raw (unstandardized) 2D coordinates.
inline Matrix grid_field(const GridRequest& req) {
    auto specs = read_column_specs(req.spec_path);
    const Dataset data = one_hot(load_csv(req.data_path, specs));
    if (data.dims() != 2) throw DataError("grid: dataset must have exactly two feature columns");
    const auto classes = class_labels(data);
    return dci_field(LabelledPool(data.features, classes.ids), req.grid, req.params, classes.count);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulationResult {
    std::vector<std::string> strategies;
    std::vector<std::vector<LearningCurve>> curves;  // [strategy][seed]
};

/// Every configured strategy over seeds run.seed .. run.seed + run.seeds - 1.
/// All strategies see the same per-seed split and initial labelled set.
inline SimulationResult simulate(const Config& cfg, const DataSource& src, std::size_t threads) {
    const auto strategies = strategies_from(cfg);
    const std::size_t n_seeds = std::max<std::size_t>(1, cfg.count("run.seeds", 1));
    const auto master = static_cast<std::uint64_t>(cfg.count("run.seed", 0));

    ExperimentConfig base;
    base.schedule = schedule_from(cfg);
    base.model = model_config_from(cfg);
    base.metric = metric_from(cfg);
    for (const auto& s : strategies) {
        auto c = base;
        c.strategy = s;
        c.validate();
    }

    SimulationResult res;
    res.curves.assign(strategies.size(), std::vector<LearningCurve>(n_seeds));
    for (const auto& s : strategies) res.strategies.push_back(s.name());
    std::vector<PreparedSplit> splits(n_seeds);
    parallel_for(n_seeds, threads, [&](std::size_t i) { splits[i] = prepare_split(src, master + i); });
    for (const auto& sp : splits) {
        if (base.schedule.final_train_size() > sp.pool.rows())
            throw ConfigError("schedule needs " + std::to_string(base.schedule.final_train_size()) +
                              " points but the pool has " + std::to_string(sp.pool.rows()));
    }
    const std::size_t jobs = strategies.size() * n_seeds;
    parallel_for(jobs, threads, [&](std::size_t job) {
        const std::size_t s = job / n_seeds;
        const std::size_t i = job % n_seeds;
        auto c = base;
        c.strategy = strategies[s];
        res.curves[s][i] = run_experiment(c, splits[i], master + i);
    });
    return res;
}

/// Runs `simulate` and writes curves.csv, summary.csv and manifest.json
/// into `out_dir`.
inline SimulationResult cmd_simulate(const Config& cfg, const std::filesystem::path& out_dir, std::size_t threads) {
    const auto data = load_data(cfg);
    auto res = simulate(cfg, data.source, threads);
    std::filesystem::create_directories(out_dir);
    {
        auto out = open_output(out_dir / "curves.csv");
        write_curves_header(out);
        for (const auto& per_seed : res.curves) {
            for (const auto& c : per_seed) write_curve_rows(out, c);
        }
    }
    {
        auto out = open_output(out_dir / "summary.csv");
        write_summary_header(out);
        for (std::size_t s = 0; s < res.strategies.size(); ++s) {
            const auto rows = aggregate(res.curves[s]);
            write_summary_rows(out, res.strategies[s], rows);
        }
    }
    write_manifest(out_dir / "manifest.json", "simulate", cfg, cfg.count("run.seed", 0), fingerprint(data),
                   {{"curves", "curves.csv"}, {"summary", "summary.csv"}});
    return res;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeCell {
    std::size_t train_size = 0;
    /// "model_<kind>" or "dci_a<alpha>_b<beta>".
    std::string name;
    std::optional<DciParams> dci;
    std::vector<DecileReport> per_split;
    DecileReport averaged;

    std::string file_name() const { return "analyze_n" + std::to_string(train_size) + "_" + name + ".csv"; }
};

/// DCI settings of the analysis grid: the alpha sweep at the configured
/// beta followed by the beta sweep at the configured alpha, deduplicated.
inline std::vector<DciParams> analysis_params(const Config& cfg) {
    const auto base = dci_params_from(cfg);
    std::vector<DciParams> out;
    auto add = [&](double a, double b) {
        for (const auto& p : out) {
            if (p.alpha == a && p.beta == b) return;
        }
        DciParams p = base;
        p.alpha = a;
        p.beta = b;
        p.validate();
        out.push_back(p);
    };
    for (double a : cfg.reals("analyze.alphas")) add(a, base.beta);
    for (double b : cfg.reals("analyze.betas")) add(base.alpha, b);
    if (out.empty()) add(base.alpha, base.beta);
    return out;
}

/// Uncertainty-versus-accuracy study: for every training size and split,
/// train on a random subset of the pool, then bucket the test set by model
/// uncertainty and by DCI under each parameter setting.
inline std::vector<AnalyzeCell> analyze(const Config& cfg, const DataSource& src, std::size_t threads) {
    std::vector<std::size_t> sizes;
    for (double v : cfg.reals("analyze.train_sizes")) {
        if (v < 1 || v != std::floor(v)) throw ConfigError("analyze.train_sizes: expected positive integers");
        sizes.push_back(static_cast<std::size_t>(v));
    }
    if (sizes.empty()) throw ConfigError("analyze.train_sizes is empty");
    const std::size_t splits = std::max<std::size_t>(1, cfg.count("analyze.splits", 1));
    const auto master = static_cast<std::uint64_t>(cfg.count("run.seed", 0));
    const auto model_cfg = model_config_from(cfg);
    const auto params = analysis_params(cfg);
    const bool binary = src.data.is_classification() && src.data.class_names.size() == 2;
    if (!src.data.is_classification()) throw ConfigError("analyze: needs a classification dataset");
    // "none" drops the model-uncertainty cell and keeps only the DCI cells.
    const auto kind_name = cfg.str("analyze.uncertainty", binary ? "eq3_binary" : "max_prob");
    std::optional<UncertaintyKind> kind;
    if (kind_name != "none") kind = parse_uncertainty_kind(kind_name);

    std::vector<AnalyzeCell> cells;
    for (auto n : sizes) {
        if (kind) {
            cells.push_back(
                {n, "model_" + std::string(to_string(*kind)), std::nullopt, std::vector<DecileReport>(splits), {}});
        }
        for (const auto& p : params) {
            cells.push_back({n, "dci_a" + format_real(p.alpha) + "_b" + format_real(p.beta), p,
                             std::vector<DecileReport>(splits), {}});
        }
    }
    const std::size_t model_cells = kind ? 1 : 0;
    const std::size_t per_size = model_cells + params.size();

    parallel_for(splits, threads, [&](std::size_t s) {
        const std::uint64_t seed = master + s;
        const auto split = prepare_split(src, seed);
        for (std::size_t si = 0; si < sizes.size(); ++si) {
            const std::size_t n = sizes[si];
            if (n > split.pool.rows()) throw ConfigError("analyze: training size exceeds the pool");
            std::mt19937_64 rng(mix_seed(seed, 10 + n));
            const auto rows = detail::sample_without_replacement(split.pool.rows(), n, rng);
            const Dataset train = split.pool.subset(rows);
            const auto model = FittedModel::fit(train, model_cfg, mix_seed(seed, 3) + n);

            const auto m = split.test.rows();
            std::vector<int> correct(m);
            std::vector<double> unc(m);
            for (std::size_t i = 0; i < m; ++i) {
                const auto pred = model.predict_row(row_span(split.test.features, static_cast<Eigen::Index>(i)));
                Eigen::Index arg = 0;
                pred.aggregate.maxCoeff(&arg);
                correct[i] = static_cast<int>(arg) == static_cast<int>(split.test.labels[i]);
                if (kind) unc[i] = model_uncertainty(*kind, pred);
            }
            if (kind) cells[si * per_size].per_split[s] = decile_analysis(unc, correct);

            std::vector<int> ids;
            for (auto r : rows) ids.push_back(split.pool_classes.ids[r]);
            const LabelledPool lp(train.features, ids);
            for (std::size_t p = 0; p < params.size(); ++p) {
                const auto scores = dci_scores(lp, split.test.features, params[p], split.pool_classes.count);
                cells[si * per_size + model_cells + p].per_split[s] = decile_analysis(scores, correct);
            }
        }
    });
    for (auto& c : cells) c.averaged = average_reports(c.per_split);
    return cells;
}

inline std::vector<AnalyzeCell> cmd_analyze(const Config& cfg, const std::filesystem::path& out_dir,
                                            std::size_t threads) {
    const auto data = load_data(cfg);
    auto cells = analyze(cfg, data.source, threads);
    std::filesystem::create_directories(out_dir);
    std::map<std::string, std::string> outputs;
    for (const auto& c : cells) {
        auto out = open_output(out_dir / c.file_name());
        write_decile_csv(out, c.averaged);
        outputs[c.file_name().substr(0, c.file_name().size() - 4)] = c.file_name();
    }
    write_manifest(out_dir / "manifest.json", "analyze", cfg, cfg.count("run.seed", 0), fingerprint(data), outputs);
    return cells;
}

}  // namespace dcilab
