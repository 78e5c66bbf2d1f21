// dci_lab: distance-weighted class impurity scoring and active-learning
// simulation from the command line.

#include "dcilab/commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct CommonFlags {
    std::string config;
    std::string preset;
    std::string out;
    std::optional<long> seed;
    long threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "Key-value configuration file");
    cmd->add_option("--preset", f.preset, "Built-in experiment preset (adult, wine-red, wine-white, mnist-small, mnist-pca)");
    cmd->add_option("--out", f.out, "Output directory (stdout when omitted for score/grid)");
    cmd->add_option("--seed", f.seed, "Master seed (overrides run.seed)");
    cmd->add_option("--threads", f.threads, "Worker threads (fallback: DCI_LAB_THREADS)");
}

dcilab::Config resolve_config(const CommonFlags& f) {
    dcilab::Config cfg;
    if (!f.preset.empty()) cfg.merge(dcilab::preset(f.preset));
    if (!f.config.empty()) cfg.merge(dcilab::Config::load(f.config));
    if (f.seed) {
        if (*f.seed < 0) throw dcilab::ConfigError("--seed must be non-negative");
        cfg.set("run.seed", std::to_string(*f.seed));
    }
    return cfg;
}

struct DciFlags {
    std::optional<std::size_t> k;
    std::optional<double> alpha, beta, epsilon;
};

void add_dci(CLI::App* cmd, DciFlags& d) {
    cmd->add_option("--k", d.k, "Neighbourhood size K");
    cmd->add_option("--alpha", d.alpha, "Distance exponent");
    cmd->add_option("--beta", d.beta, "Normaliser exponent");
    cmd->add_option("--epsilon", d.epsilon, "Additive distance offset");
}

dcilab::DciParams resolve_dci(const dcilab::Config& cfg, const DciFlags& d) {
    auto p = dcilab::dci_params_from(cfg);
    if (d.k) p.k = *d.k;
    if (d.alpha) p.alpha = *d.alpha;
    if (d.beta) p.beta = *d.beta;
    if (d.epsilon) p.epsilon = *d.epsilon;
    p.validate();
    return p;
}

std::pair<double, double> parse_range(const std::string& s, const char* what) {
    const auto comma = s.find(',');
    double a, b;
    if (comma == std::string::npos || !dcilab::parse_double(s.substr(0, comma), a) ||
        !dcilab::parse_double(s.substr(comma + 1), b))
        throw dcilab::ConfigError(std::string(what) + ": expected 'lo,hi'");
    return {a, b};
}

template <class WriteFn>
void emit(const std::string& out_dir, const std::string& file, WriteFn&& write) {
    if (out_dir.empty()) {
        write(std::cout);
        return;
    }
    std::filesystem::create_directories(out_dir);
    auto out = dcilab::open_output(std::filesystem::path(out_dir) / file);
    write(out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distance-weighted class impurity and pool-based active-learning simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dcilab::kToolVersion));

    CommonFlags common;
    DciFlags dci;
    std::string data, spec, query, x_range = "0,1", y_range = "0,1";
    std::size_t resolution = 100;

    auto* score = app.add_subcommand("score", "DCI of each query row against a labelled dataset");
    add_common(score, common);
    add_dci(score, dci);
    score->add_option("--data", data, "Labelled CSV dataset")->required();
    score->add_option("--spec", spec, "Column spec file")->required();
    score->add_option("--query", query, "CSV of query rows (feature columns only)")->required();

    auto* grid = app.add_subcommand("grid", "DCI field over a 2D grid");
    add_common(grid, common);
    add_dci(grid, dci);
    grid->add_option("--data", data, "Labelled 2D CSV dataset")->required();
    grid->add_option("--spec", spec, "Column spec file")->required();
    grid->add_option("--x-range", x_range, "x interval as lo,hi");
    grid->add_option("--y-range", y_range, "y interval as lo,hi");
    grid->add_option("--resolution", resolution, "Grid points per axis");

    auto* simulate = app.add_subcommand("simulate", "Run the active-learning simulation");
    add_common(simulate, common);

    auto* analyze = app.add_subcommand("analyze", "Accuracy per uncertainty decile");
    add_common(analyze, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        const auto cfg = resolve_config(common);
        const auto threads = dcilab::resolve_threads(common.threads);
        if (score->parsed()) {
            dcilab::ScoreRequest req{data, spec, query, resolve_dci(cfg, dci), {}};
            const auto scores = dcilab::score_queries(req);
            emit(common.out, "scores.csv", [&](std::ostream& os) { dcilab::write_scores_csv(os, scores); });
        } else if (grid->parsed()) {
            dcilab::GridRequest req{data, spec, {}, resolve_dci(cfg, dci)};
            std::tie(req.grid.x_min, req.grid.x_max) = parse_range(x_range, "--x-range");
            std::tie(req.grid.y_min, req.grid.y_max) = parse_range(y_range, "--y-range");
            req.grid.resolution = resolution;
            req.grid.validate();
            const auto field = dcilab::grid_field(req);
            emit(common.out, "field.csv", [&](std::ostream& os) { dcilab::write_field_csv(os, req.grid, field); });
        } else if (simulate->parsed()) {
            const auto res = dcilab::cmd_simulate(cfg, common.out.empty() ? "." : common.out, threads);
            std::cerr << "simulated " << res.strategies.size() << " strategies x " << res.curves.front().size()
                      << " seeds\n";
        } else if (analyze->parsed()) {
            const auto cells = dcilab::cmd_analyze(cfg, common.out.empty() ? "." : common.out, threads);
            std::cerr << "wrote " << cells.size() << " decile reports\n";
        }
    } catch (const dcilab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const dcilab::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
