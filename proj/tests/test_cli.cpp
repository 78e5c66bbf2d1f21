#include "dcilab/commands.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <random>
#include <sstream>

using namespace dcilab;
using dcilab::testing::slurp;
using dcilab::testing::TempDir;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run_cli(const TempDir& dir, const std::string& args) {
    const auto out = dir.file("stdout.txt"), err = dir.file("stderr.txt");
    const std::string cmd = std::string(DCILAB_CLI) + " " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

/// Three noisy 2D clusters, one per class, with a numeric feature pair.
std::string toy_csv(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.5);
    const double cx[3] = {0.0, 4.0, 2.0}, cy[3] = {0.0, 0.0, 3.0};
    std::ostringstream os;
    os << "x,y,label\n";
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = i % 3;
        os << format_real(cx[c] + nd(rng)) << ',' << format_real(cy[c] + nd(rng)) << ",c" << c << '\n';
    }
    return os.str();
}

constexpr const char* kToySpec = "x = numeric\ny = numeric\nlabel = label_class\n";

struct Toy {
    TempDir dir{"cli"};
    std::string data, spec;
    Toy(std::size_t n = 150) {
        data = dir.write("toy.csv", toy_csv(n, 1));
        spec = dir.write("toy.spec", kToySpec);
    }
    std::string sim_config(std::size_t seeds, std::size_t updates) const {
        std::ostringstream os;
        os << "data.path = toy.csv\ndata.spec = toy.spec\ndata.test_size = 40\n"
           << "schedule.initial = 10\nschedule.additions = 5\nschedule.updates = " << updates << "\n"
           << "run.seeds = " << seeds << "\nrun.strategies = random, dci_high, dci_low, model_max_prob\n"
           << "run.metric = accuracy\nmodel.trees = 5\ndci.k = 5\n";
        return dir.write("sim.conf", os.str());
    }
};

}  // namespace

TEST(Config, ParsesAndResolvesPaths) {
    const auto c = Config::parse("# header\nrun.seeds = 4  # trailing\ndata.path = sub/file.csv\ndci.alpha=2\n"
                                 "run.strategies = random, dci_high\n",
                                 "/base");
    EXPECT_EQ(c.count("run.seeds", 0), 4u);
    EXPECT_EQ(c.str("data.path"), "/base/sub/file.csv");
    EXPECT_EQ(c.real("dci.alpha", 0), 2.0);
    EXPECT_EQ(c.list("run.strategies"), (std::vector<std::string>{"random", "dci_high"}));
    EXPECT_EQ(c.real("dci.beta", 1.2), 1.2);
}

TEST(Config, Errors) {
    EXPECT_THROW(Config::parse("run.nope = 1\n"), ConfigError);
    EXPECT_THROW(Config::parse("run.seeds\n"), ConfigError);
    EXPECT_THROW(Config::parse("run.seeds = many\n").count("run.seeds", 0), ConfigError);
    EXPECT_THROW(Config::parse("run.seeds = -3\n").count("run.seeds", 0), ConfigError);
    EXPECT_THROW(Config::parse("").required("data.path"), ConfigError);
    EXPECT_THROW(preset("imagenet"), ConfigError);
    EXPECT_THROW(metric_from(Config::parse("run.metric = f1\n")), ConfigError);
    EXPECT_THROW(model_config_from(Config::parse("model.kind = svm\n")), ConfigError);
    EXPECT_THROW(dci_params_from(Config::parse("dci.alpha = 0\n")), ConfigError);
    EXPECT_THROW(Config::load("/nonexistent/x.conf"), ConfigError);
}

TEST(Config, MergeOverrides) {
    auto c = preset("adult");
    c.merge(Config::parse("run.seeds = 2\n"));
    EXPECT_EQ(c.count("run.seeds", 0), 2u);
    EXPECT_EQ(c.count("schedule.initial", 0), 1162u);
}

TEST(CliScore, PureClusterPointScoresZero) {
    Toy toy;
    const auto q = toy.dir.write("q.csv", "x,y\n0,0\n");
    const auto r = run_cli(toy.dir, "score --data " + toy.data + " --spec " + toy.spec + " --query " + q + " --k 5");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "index,dci\n0,0\n");
}

TEST(CliScore, EmptyQueryGivesHeaderOnly) {
    Toy toy;
    const auto q = toy.dir.write("q.csv", "");
    const auto r = run_cli(toy.dir, "score --data " + toy.data + " --spec " + toy.spec + " --query " + q);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "index,dci\n");
}

TEST(CliScore, MatchesLibraryRowForRow) {
    Toy toy;
    const auto q = toy.dir.write("q.csv", toy_csv(30, 2));  // label column is ignored for queries
    const auto r = run_cli(toy.dir, "score --data " + toy.data + " --spec " + toy.spec + " --query " + q +
                                        " --k 7 --alpha 1.3 --beta 1.1 --out " + toy.dir.file("o"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto written = slurp(toy.dir.file("o/scores.csv"));

    // Oracle: standardize with whole-dataset stats by hand, then knn + dci_score.
    const auto specs = read_column_specs(toy.spec);
    const auto data = load_csv(toy.data, specs);
    const auto query = load_csv(q, learned_specs(data));
    Matrix xd = data.features, xq = query.features;
    for (Eigen::Index c = 0; c < 2; ++c) {
        const double mean = xd.col(c).mean();
        const double sd = std::sqrt((xd.col(c).array() - mean).square().mean());
        xd.col(c) = (xd.col(c).array() - mean) / sd;
        xq.col(c) = (xq.col(c).array() - mean) / sd;
    }
    const auto cl = class_labels(data);
    const DciParams p{7, 1.3, 1.1, 1e-12};
    std::ostringstream expected;
    expected << "index,dci\n";
    for (Eigen::Index i = 0; i < xq.rows(); ++i)
        expected << i << ',' << format_real(dci_score(knn(LabelledPool(xd, cl.ids), row_span(xq, i), 7), p, cl.count)) << '\n';
    EXPECT_EQ(written, expected.str());
}

TEST(CliScore, DimensionMismatchIsDataError) {
    Toy toy;
    const auto q = toy.dir.write("q.csv", "x,z\n0,0\n");
    EXPECT_EQ(run_cli(toy.dir, "score --data " + toy.data + " --spec " + toy.spec + " --query " + q).code, 3);
}

TEST(CliGrid, ResolutionTwoAndReplay) {
    Toy toy;
    const std::string args = "grid --data " + toy.data + " --spec " + toy.spec +
                             " --x-range -1,5 --y-range -1,4 --resolution 2 --k 5";
    const auto a = run_cli(toy.dir, args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(count_lines(a.out), 5u);
    EXPECT_EQ(a.out.substr(0, 8), "x,y,dci\n");
    EXPECT_EQ(run_cli(toy.dir, args).out, a.out);
}

TEST(CliGrid, MatchesLibraryField) {
    Toy toy;
    const auto r = run_cli(toy.dir, "grid --data " + toy.data + " --spec " + toy.spec +
                                        " --x-range -2,6 --y-range -2,5 --resolution 17 --out " + toy.dir.file("g"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto data = load_csv(toy.data, read_column_specs(toy.spec));
    const auto cl = class_labels(data);
    const GridSpec g{-2, 6, -2, 5, 17};
    std::ostringstream expected;
    write_field_csv(expected, g, dci_field(LabelledPool(data.features, cl.ids), g, DciParams{}, cl.count));
    EXPECT_EQ(slurp(toy.dir.file("g/field.csv")), expected.str());
}

TEST(CliGrid, RejectsNon2dData) {
    TempDir dir("cli");
    const auto data = dir.write("d.csv", "a,b,c,y\n1,2,3,p\n4,5,6,q\n");
    const auto spec = dir.write("d.spec", "a = numeric\nb = numeric\nc = numeric\ny = label_class\n");
    EXPECT_EQ(run_cli(dir, "grid --data " + data + " --spec " + spec).code, 3);
    EXPECT_EQ(run_cli(dir, "grid --data " + data + " --spec " + spec + " --resolution 1").code, 2);
}

TEST(CliSimulate, OneSeedNoUpdates) {
    Toy toy;
    const auto conf = toy.sim_config(1, 0);
    const auto r = run_cli(toy.dir, "simulate --config " + conf + " --out " + toy.dir.file("s"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto curves = slurp(toy.dir.file("s/curves.csv"));
    EXPECT_EQ(count_lines(curves), 5u);  // header + 4 strategies
    EXPECT_EQ(curves.substr(0, curves.find('\n')), "strategy,seed,train_size,metric,value");
}

TEST(CliSimulate, ReplayAndManifest) {
    Toy toy;
    const auto conf = toy.sim_config(3, 2);
    ASSERT_EQ(run_cli(toy.dir, "simulate --config " + conf + " --out " + toy.dir.file("a") + " --threads 2").code, 0);
    ASSERT_EQ(run_cli(toy.dir, "simulate --config " + conf + " --out " + toy.dir.file("b") + " --threads 1").code, 0);
    for (const char* f : {"curves.csv", "summary.csv", "manifest.json"})
        EXPECT_EQ(slurp(toy.dir.file(std::string("a/") + f)), slurp(toy.dir.file(std::string("b/") + f))) << f;

    const auto summary = slurp(toy.dir.file("a/summary.csv"));
    EXPECT_EQ(count_lines(summary), 1u + 4u * 3u);
    const auto m = nlohmann::json::parse(slurp(toy.dir.file("a/manifest.json")));
    EXPECT_EQ(m["command"], "simulate");
    EXPECT_EQ(m["version"], std::string(kToolVersion));
    EXPECT_EQ(m["seed"], 0);
    EXPECT_EQ(m["dataset"]["rows"], 150);
    EXPECT_EQ(m["dataset"]["cols"], 2);
    EXPECT_EQ(m["outputs"]["curves"], "curves.csv");
    EXPECT_EQ(m["config"]["run.seeds"], "3");

    // --seed overrides run.seed and is recorded.
    ASSERT_EQ(run_cli(toy.dir, "simulate --config " + conf + " --seed 9 --out " + toy.dir.file("c")).code, 0);
    EXPECT_EQ(nlohmann::json::parse(slurp(toy.dir.file("c/manifest.json")))["seed"], 9);
    EXPECT_NE(slurp(toy.dir.file("c/curves.csv")), slurp(toy.dir.file("a/curves.csv")));
}

TEST(CliSimulate, InputsAreNotModified) {
    Toy toy;
    const auto before = slurp(toy.data);
    const auto conf = toy.sim_config(1, 1);
    ASSERT_EQ(run_cli(toy.dir, "simulate --config " + conf + " --out " + toy.dir.file("s")).code, 0);
    EXPECT_EQ(slurp(toy.data), before);
}

TEST(Fingerprint, ChangesIffContentChanges) {
    Toy toy;
    auto cfg = Config::load(toy.sim_config(1, 0));
    const auto a = fingerprint(load_data(cfg));
    const auto b = fingerprint(load_data(cfg));
    EXPECT_EQ(a.content_hash, b.content_hash);
    // Same rows and columns, one value nudged.
    auto text = slurp(toy.data);
    text.insert(text.find(",c0"), "1");
    std::ofstream(toy.data, std::ios::binary) << text;
    const auto c = fingerprint(load_data(cfg));
    EXPECT_NE(a.content_hash, c.content_hash);
}

TEST(CliAnalyze, SingleCellSingleSplit) {
    Toy toy(300);
    const auto conf = toy.dir.write("an.conf",
                                    "data.path = toy.csv\ndata.spec = toy.spec\ndata.test_size = 100\n"
                                    "analyze.train_sizes = 20\nanalyze.splits = 1\nanalyze.uncertainty = none\n"
                                    "model.trees = 5\ndci.k = 5\n");
    const auto r = run_cli(toy.dir, "analyze --config " + conf + " --out " + toy.dir.file("an"));
    ASSERT_EQ(r.code, 0) << r.err;
    std::vector<std::string> csvs;
    for (const auto& e : std::filesystem::directory_iterator(toy.dir.file("an")))
        if (e.path().extension() == ".csv") csvs.push_back(e.path().filename().string());
    ASSERT_EQ(csvs.size(), 1u);
    EXPECT_EQ(csvs[0], "analyze_n20_dci_a1.5_b1.2.csv");
    EXPECT_EQ(count_lines(slurp(toy.dir.file("an/" + csvs[0]))), 11u);
}

TEST(CliAnalyze, GridFileCountAndAveraging) {
    Toy toy(300);
    auto cfg = Config::parse("data.path = toy.csv\ndata.spec = toy.spec\ndata.test_size = 100\n"
                             "analyze.train_sizes = 10, 15, 20, 50\nanalyze.splits = 3\n"
                             "analyze.alphas = 1.0, 1.5, 2.0\nanalyze.betas = 0.9, 1.1, 1.3\n"
                             "model.trees = 5\ndci.k = 5\n",
                             toy.dir.path());
    const auto cells = cmd_analyze(cfg, toy.dir.file("grid"), 2);
    // Per size: the model cell plus alphas {1, 1.5, 2} at beta 1.2 and betas {0.9, 1.1, 1.3} at alpha 1.5.
    EXPECT_EQ(cells.size(), 4u * 7u);
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(toy.dir.file("grid"))) files += e.path().extension() == ".csv";
    EXPECT_EQ(files, cells.size());
    for (const auto& c : cells) {
        ASSERT_EQ(c.per_split.size(), 3u);
        for (std::size_t b = 0; b < 10; ++b) {
            const double mean =
                (c.per_split[0].buckets[b].accuracy + c.per_split[1].buckets[b].accuracy + c.per_split[2].buckets[b].accuracy) / 3.0;
            EXPECT_NEAR(c.averaged.buckets[b].accuracy, mean, 1e-15);
        }
    }
    // Oversized training set.
    cfg.set("analyze.train_sizes", "500");
    EXPECT_THROW(cmd_analyze(cfg, toy.dir.file("big"), 1), ConfigError);
}

TEST(CliExitCodes, Mapping) {
    Toy toy;
    EXPECT_EQ(run_cli(toy.dir, "--version").code, 0);
    EXPECT_EQ(run_cli(toy.dir, "").code, 2);
    EXPECT_EQ(run_cli(toy.dir, "simulate --bogus").code, 2);
    EXPECT_EQ(run_cli(toy.dir, "simulate --preset nope").code, 2);
    const auto unknown = toy.dir.write("u.conf", "run.whatever = 1\n");
    EXPECT_EQ(run_cli(toy.dir, "simulate --config " + unknown).code, 2);
    const auto missing = toy.dir.write("m.conf", "data.path = absent.csv\ndata.spec = toy.spec\ndata.test_size = 5\n");
    EXPECT_EQ(run_cli(toy.dir, "simulate --config " + missing + " --out " + toy.dir.file("x")).code, 3);
    const auto too_big = toy.dir.write("b.conf",
                                       "data.path = toy.csv\ndata.spec = toy.spec\ndata.test_size = 40\n"
                                       "schedule.initial = 100\nschedule.additions = 50\nschedule.updates = 2\n");
    EXPECT_EQ(run_cli(toy.dir, "simulate --config " + too_big + " --out " + toy.dir.file("y")).code, 2);
}
