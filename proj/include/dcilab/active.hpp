#pragma once

#include "dcilab/common.hpp"
#include "dcilab/dataset.hpp"
#include "dcilab/dci.hpp"
#include "dcilab/metrics.hpp"
#include "dcilab/models.hpp"
#include "dcilab/neighbors.hpp"
#include "dcilab/parallel.hpp"
#include "dcilab/pca.hpp"

#include <algorithm>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <variant>

namespace dcilab {

enum class StrategyTag { random, dci_high, dci_low, model_uncertainty };
enum class UncertaintyKind { eq3_binary, regression_std, max_prob, mean_std };

inline std::string_view to_string(UncertaintyKind k) {
    switch (k) {
        case UncertaintyKind::eq3_binary: return "eq3_binary";
        case UncertaintyKind::regression_std: return "regression_std";
        case UncertaintyKind::max_prob: return "max_prob";
        case UncertaintyKind::mean_std: return "mean_std";
    }
    return "?";
}

inline UncertaintyKind parse_uncertainty_kind(std::string_view s) {
    if (s == "eq3_binary") return UncertaintyKind::eq3_binary;
    if (s == "regression_std") return UncertaintyKind::regression_std;
    if (s == "max_prob") return UncertaintyKind::max_prob;
    if (s == "mean_std") return UncertaintyKind::mean_std;
    throw ConfigError("unknown uncertainty kind '" + std::string(s) + "'");
}

inline double model_uncertainty(UncertaintyKind kind, const EnsemblePrediction& pred) {
    switch (kind) {
        case UncertaintyKind::eq3_binary: return ensemble_binary_uncertainty(pred);
        case UncertaintyKind::regression_std: return regression_std_uncertainty(pred);
        case UncertaintyKind::max_prob: return max_prob_uncertainty(pred);
        case UncertaintyKind::mean_std: return mean_std_uncertainty(pred);
    }
    return 0.0;
}

/// Selection policy. `kind` is set only for model-uncertainty strategies and
/// `dci` only for the two DCI strategies; `pca_components` > 0 scores DCI
/// in a weighted principal-component space instead of the raw features.
struct Strategy {
    StrategyTag tag = StrategyTag::random;
    std::optional<UncertaintyKind> kind;
    std::optional<DciParams> dci;
    std::size_t pca_components = 0;

    static Strategy random() { return {}; }
    static Strategy dci_high(DciParams p = {}, std::size_t pcs = 0) { return {StrategyTag::dci_high, {}, p, pcs}; }
    static Strategy dci_low(DciParams p = {}, std::size_t pcs = 0) { return {StrategyTag::dci_low, {}, p, pcs}; }
    static Strategy model(UncertaintyKind k) { return {StrategyTag::model_uncertainty, k, {}, 0}; }

    bool uses_dci() const { return tag == StrategyTag::dci_high || tag == StrategyTag::dci_low; }

    void validate() const {
        if (kind.has_value() != (tag == StrategyTag::model_uncertainty))
            throw ConfigError("strategy: uncertainty kind must be set iff the strategy is model-based");
        if (dci.has_value() != uses_dci()) throw ConfigError("strategy: DCI parameters must be set iff DCI-based");
        if (pca_components > 0 && !uses_dci()) throw ConfigError("strategy: PCA feature space applies to DCI only");
        if (dci) dci->validate();
    }

    std::string name() const {
        switch (tag) {
            case StrategyTag::random: return "random";
            case StrategyTag::dci_high:
            case StrategyTag::dci_low: {
                std::string n = tag == StrategyTag::dci_high ? "dci_high" : "dci_low";
                if (pca_components > 0) n += "_pca" + std::to_string(pca_components);
                return n;
            }
            case StrategyTag::model_uncertainty: return "model_" + std::string(to_string(*kind));
        }
        return "?";
    }
};

/// Inverse of Strategy::name(): random, dci_high, dci_low, dci_high_pca<n>,
/// dci_low_pca<n>, model_<kind>.
inline Strategy parse_strategy(std::string_view s, const DciParams& dci) {
    s = trim(s);
    if (s == "random") return Strategy::random();
    if (s.starts_with("model_")) return Strategy::model(parse_uncertainty_kind(s.substr(6)));
    for (auto [prefix, tag] : {std::pair{std::string_view("dci_high"), StrategyTag::dci_high},
                               std::pair{std::string_view("dci_low"), StrategyTag::dci_low}}) {
        if (!s.starts_with(prefix)) continue;
        auto rest = s.substr(prefix.size());
        Strategy st{tag, {}, dci, 0};
        if (rest.empty()) return st;
        if (rest.starts_with("_pca")) {
            double n;
            if (parse_double(rest.substr(4), n) && n >= 1 && n == std::floor(n)) {
                st.pca_components = static_cast<std::size_t>(n);
                return st;
            }
        }
        break;
    }
    throw ConfigError("unknown strategy '" + std::string(s) + "'");
}

enum class ModelKind { trees, knn };
enum class Metric { auroc, accuracy, rmse };

inline std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::auroc: return "auroc";
        case Metric::accuracy: return "accuracy";
        case Metric::rmse: return "rmse";
    }
    return "?";
}

struct ModelConfig {
    ModelKind kind = ModelKind::trees;
    EnsembleConfig ensemble;
    std::size_t knn_k = 5;
};

/// kNN stand-in with the ensemble prediction interface (a single member).
struct KnnModel {
    Matrix features;
    std::vector<int> ids;
    std::vector<double> targets;
    Task task = Task::classification;
    std::size_t n_classes = 1;
    std::size_t k = 5;
};

class FittedModel {
public:
    static FittedModel fit(const Dataset& train, const ModelConfig& cfg, std::uint64_t seed) {
        FittedModel m;
        if (cfg.kind == ModelKind::trees) {
            auto ec = cfg.ensemble;
            ec.seed = seed;
            m.impl_ = fit_ensemble(train, ec);
        } else {
            if (train.rows() == 0) throw std::invalid_argument("knn model: empty training set");
            KnnModel km;
            km.features = train.features;
            km.ids = class_labels(train).ids;
            km.targets = train.labels;
            km.task = task_of(train);
            km.n_classes = km.task == Task::classification ? train.class_names.size() : 1;
            km.k = cfg.knn_k;
            m.impl_ = std::move(km);
        }
        return m;
    }

    EnsemblePrediction predict_row(std::span<const double> x) const {
        if (const auto* ens = std::get_if<TreeEnsemble>(&impl_)) return dcilab::predict_row(*ens, x);
        const auto& km = std::get<KnnModel>(impl_);
        const auto nb = knn(LabelledPool(km.features, km.ids), x, km.k);
        EnsemblePrediction p;
        p.task = km.task;
        p.per_member = Matrix::Zero(1, static_cast<Eigen::Index>(km.n_classes));
        for (const auto& e : nb.entries) {
            if (km.task == Task::classification)
                p.per_member(0, e.label) += 1.0;
            else
                p.per_member(0, 0) += km.targets[e.pool_index];
        }
        p.per_member /= static_cast<double>(nb.size());
        p.aggregate = p.per_member.row(0).transpose();
        return p;
    }

private:
    std::variant<TreeEnsemble, KnnModel> impl_;
};

/// Scores a fitted model on a labelled test set.
inline double evaluate(const FittedModel& model, const Dataset& test, Metric metric) {
    const auto n = test.rows();
    std::vector<double> out(n);
    std::vector<int> pred_class(n), truth_class(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = model.predict_row(row_span(test.features, static_cast<Eigen::Index>(i)));
        Eigen::Index arg = 0;
        switch (metric) {
            case Metric::auroc:
                if (p.aggregate.size() != 2) throw ConfigError("auroc metric needs a binary classification task");
                out[i] = p.aggregate(1);
                break;
            case Metric::accuracy:
                p.aggregate.maxCoeff(&arg);
                pred_class[i] = static_cast<int>(arg);
                break;
            case Metric::rmse:
                out[i] = p.aggregate(0);
                break;
        }
        truth_class[i] = static_cast<int>(test.labels[i]);
    }
    switch (metric) {
        case Metric::auroc: return auroc(out, truth_class);
        case Metric::accuracy: return accuracy<int>(pred_class, truth_class);
        case Metric::rmse: return rmse(out, test.labels);
    }
    return 0.0;
}

struct Schedule {
    std::size_t initial = 1;
    /// Random unseen points scored per selection.
    std::size_t candidates = 5;
    /// Points added between consecutive model updates.
    std::size_t additions = 1;
    std::size_t updates = 0;

    std::size_t final_train_size() const { return initial + additions * updates; }
};

struct ExperimentConfig {
    Schedule schedule;
    Strategy strategy;
    ModelConfig model;
    Metric metric = Metric::accuracy;

    void validate() const {
        if (schedule.initial < 1) throw ConfigError("schedule: initial training size must be >= 1");
        if (schedule.candidates < 1) throw ConfigError("schedule: candidate batch size must be >= 1");
        if (schedule.updates > 0 && schedule.additions < 1)
            throw ConfigError("schedule: additions per update must be >= 1");
        strategy.validate();
        if (model.kind == ModelKind::trees && model.ensemble.n_trees < 1) throw ConfigError("model: need >= 1 tree");
    }
};

/// Where an experiment's pool and test set come from. `data` is already
/// encoded (one-hot) but not standardized. Without a separate `test` set,
/// each seed holds out `test_size` random rows.
struct DataSource {
    Dataset data;
    std::optional<Dataset> test;
    std::size_t test_size = 0;
    /// Random subsample sizes per seed; 0 keeps everything.
    std::size_t pool_subsample = 0;
    std::size_t test_subsample = 0;
    bool standardize = true;
    StandardizeOptions standardize_options;
};

struct PreparedSplit {
    Dataset pool;
    Dataset test;
    ClassLabels pool_classes;
};

namespace detail {

/// First `k` entries of a seeded Fisher-Yates shuffle of [0, n).
template <class Rng>
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, n);
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
    idx.resize(k);
    return idx;
}

}  // namespace detail

/// Draws the per-seed pool/test split and standardizes both with statistics
/// of the whole pool.
inline PreparedSplit prepare_split(const DataSource& src, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0));
    PreparedSplit out;
    if (src.test) {
        std::vector<std::size_t> pool_rows = src.pool_subsample > 0 && src.pool_subsample < src.data.rows()
                                                 ? detail::sample_without_replacement(src.data.rows(), src.pool_subsample, rng)
                                                 : detail::sample_without_replacement(src.data.rows(), src.data.rows(), rng);
        std::sort(pool_rows.begin(), pool_rows.end());
        out.pool = src.data.subset(pool_rows);
        std::vector<std::size_t> test_rows = detail::sample_without_replacement(
            src.test->rows(), src.test_subsample > 0 ? src.test_subsample : src.test->rows(), rng);
        std::sort(test_rows.begin(), test_rows.end());
        out.test = src.test->subset(test_rows);
    } else {
        if (src.test_size == 0 || src.test_size >= src.data.rows())
            throw ConfigError("data: test size must be in [1, rows)");
        auto perm = detail::sample_without_replacement(src.data.rows(), src.data.rows(), rng);
        std::vector<std::size_t> test_rows(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(src.test_size));
        std::vector<std::size_t> pool_rows(perm.begin() + static_cast<std::ptrdiff_t>(src.test_size), perm.end());
        if (src.pool_subsample > 0 && src.pool_subsample < pool_rows.size()) pool_rows.resize(src.pool_subsample);
        std::sort(test_rows.begin(), test_rows.end());
        std::sort(pool_rows.begin(), pool_rows.end());
        out.pool = src.data.subset(pool_rows);
        out.test = src.data.subset(test_rows);
    }
    if (src.standardize) {
        std::vector<std::size_t> all(out.pool.rows());
        std::iota(all.begin(), all.end(), std::size_t{0});
        const auto st = Standardizer::fit(out.pool, all, src.standardize_options);
        st.apply(out.pool.features);
        st.apply(out.test.features);
    }
    out.pool_classes = class_labels(out.pool);
    return out;
}

enum class Pick { first, highest, lowest };

inline Pick pick_of(const Strategy& s) {
    switch (s.tag) {
        case StrategyTag::random: return Pick::first;
        case StrategyTag::dci_low: return Pick::lowest;
        default: return Pick::highest;
    }
}

/// Draws min(batch, |unlabelled|) distinct candidates uniformly and returns
/// the pool index of the best one under `pick` (the first draw for
/// Pick::first). Equal scores resolve to the lowest pool index.
template <class Rng, class Scorer>
std::size_t select_next(std::span<const std::size_t> unlabelled, std::size_t batch, Pick pick, Scorer&& score,
                        Rng& rng) {
    if (unlabelled.empty()) throw std::invalid_argument("select_next: no unlabelled points left");
    const std::size_t m = std::min(std::max<std::size_t>(batch, 1), unlabelled.size());
    std::vector<std::size_t> positions;
    positions.reserve(m);
    while (positions.size() < m) {
        const auto p = uniform_index(rng, unlabelled.size());
        if (std::find(positions.begin(), positions.end(), p) == positions.end()) positions.push_back(p);
    }
    if (pick == Pick::first) return unlabelled[positions.front()];

    std::size_t best = unlabelled[positions.front()];
    double best_score = score(best);
    for (std::size_t i = 1; i < m; ++i) {
        const std::size_t cand = unlabelled[positions[i]];
        const double s = score(cand);
        const bool better = pick == Pick::highest ? s > best_score : s < best_score;
        if (better || (s == best_score && cand < best)) {
            best = cand;
            best_score = s;
        }
    }
    return best;
}

struct CurvePoint {
    std::size_t train_size = 0;
    double value = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct LearningCurve {
    std::string strategy;
    std::uint64_t seed = 0;
    Metric metric = Metric::accuracy;
    std::vector<CurvePoint> points;
    /// Pool indices in the order they were labelled (initial draw first).
    std::vector<std::size_t> labelled_order;
};

/// One seeded pool-based run: random initial set, then `updates` rounds of
/// `additions` single-point selections, each round followed by a retrain
/// and an evaluation on the held-out test set.
///
/// Model-uncertainty strategies score candidates with the model of the last
/// update; DCI strategies score against the current labelled set, including
/// points added since that update. RNG sub-streams: 0 split, 1 initial draw,
/// 2 candidate draws, 3 model seeds.
inline LearningCurve run_experiment(const ExperimentConfig& cfg, const PreparedSplit& split, std::uint64_t seed) {
    cfg.validate();
    const auto& pool = split.pool;
    const auto& sched = cfg.schedule;
    if (sched.final_train_size() > pool.rows())
        throw ConfigError("schedule needs " + std::to_string(sched.final_train_size()) + " points but the pool has " +
                          std::to_string(pool.rows()));

    std::mt19937_64 init_rng(mix_seed(seed, 1));
    std::mt19937_64 cand_rng(mix_seed(seed, 2));
    const std::uint64_t model_seed = mix_seed(seed, 3);

    LearningCurve curve;
    curve.strategy = cfg.strategy.name();
    curve.seed = seed;
    curve.metric = cfg.metric;

    std::vector<std::size_t> labelled = detail::sample_without_replacement(pool.rows(), sched.initial, init_rng);
    std::vector<char> is_labelled(pool.rows(), 0);
    for (auto i : labelled) is_labelled[i] = 1;
    std::vector<std::size_t> unlabelled;
    for (std::size_t i = 0; i < pool.rows(); ++i) {
        if (!is_labelled[i]) unlabelled.push_back(i);
    }

    const auto& ids = split.pool_classes.ids;
    const std::size_t n_classes = split.pool_classes.count;
    const Pick pick = pick_of(cfg.strategy);

    for (std::size_t u = 0;; ++u) {
        const Dataset train = pool.subset(labelled);
        const auto model = FittedModel::fit(train, cfg.model, model_seed + u);
        curve.points.push_back({labelled.size(), evaluate(model, split.test, cfg.metric)});
        if (u == sched.updates) break;

        // DCI feature space and the labelled rows in it.
        Matrix space;
        const Matrix* dci_space = &pool.features;
        if (cfg.strategy.uses_dci() && cfg.strategy.pca_components > 0) {
            const auto pcs = std::min({cfg.strategy.pca_components, train.rows(), train.dims()});
            space = pca_project(pca_fit(train.features, pcs), pool.features);
            dci_space = &space;
        }
        const auto dims = static_cast<std::size_t>(dci_space->cols());
        std::vector<double> lab_rows;
        std::vector<int> lab_ids;
        lab_rows.reserve(sched.final_train_size() * dims);
        auto push_labelled = [&](std::size_t i) {
            const auto r = row_span(*dci_space, static_cast<Eigen::Index>(i));
            lab_rows.insert(lab_rows.end(), r.begin(), r.end());
            lab_ids.push_back(ids[i]);
        };
        if (cfg.strategy.uses_dci()) {
            for (auto i : labelled) push_labelled(i);
        }

        for (std::size_t a = 0; a < sched.additions; ++a) {
            auto score = [&](std::size_t i) -> double {
                if (cfg.strategy.uses_dci()) {
                    const LabelledPool lp(lab_rows, dims, lab_ids);
                    const auto nb = knn(lp, row_span(*dci_space, static_cast<Eigen::Index>(i)), cfg.strategy.dci->k);
                    return dci_score(nb, *cfg.strategy.dci, n_classes);
                }
                if (cfg.strategy.tag == StrategyTag::model_uncertainty) {
                    return model_uncertainty(*cfg.strategy.kind,
                                             model.predict_row(row_span(pool.features, static_cast<Eigen::Index>(i))));
                }
                return 0.0;
            };
            const std::size_t chosen = select_next(unlabelled, sched.candidates, pick, score, cand_rng);
            unlabelled.erase(std::lower_bound(unlabelled.begin(), unlabelled.end(), chosen));
            labelled.push_back(chosen);
            if (cfg.strategy.uses_dci()) push_labelled(chosen);
        }
    }
    curve.labelled_order = std::move(labelled);
    return curve;
}

inline LearningCurve run_experiment(const ExperimentConfig& cfg, const DataSource& src, std::uint64_t seed) {
    return run_experiment(cfg, prepare_split(src, seed), seed);
}

/// Runs seeds master_seed, master_seed + 1, ... in parallel; the result
/// order follows the seed order.
inline std::vector<LearningCurve> run_seeds(const ExperimentConfig& cfg, const DataSource& src,
                                            std::uint64_t master_seed, std::size_t n_seeds, std::size_t threads) {
    std::vector<LearningCurve> curves(n_seeds);
    parallel_for(n_seeds, threads, [&](std::size_t i) { curves[i] = run_experiment(cfg, src, master_seed + i); });
    return curves;
}

struct SummaryRow {
    std::size_t train_size = 0;
    double mean = 0.0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

/// Quantile by linear interpolation between order statistics at position
/// (n - 1) * q of the sorted sample.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Per-train-size mean, median and quartiles across curves sharing one
/// schedule.
inline std::vector<SummaryRow> aggregate(std::span<const LearningCurve> curves) {
    if (curves.empty()) throw std::invalid_argument("aggregate: no curves");
    const auto& ref = curves.front().points;
    for (const auto& c : curves) {
        if (c.points.size() != ref.size()) throw std::invalid_argument("aggregate: mismatched schedules");
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (c.points[i].train_size != ref[i].train_size)
                throw std::invalid_argument("aggregate: mismatched schedules");
        }
    }
    std::vector<SummaryRow> out;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        std::vector<double> v;
        for (const auto& c : curves) v.push_back(c.points[i].value);
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        out.push_back({ref[i].train_size, mean, quantile(v, 0.5), quantile(v, 0.25), quantile(v, 0.75)});
    }
    return out;
}

inline void write_curves_header(std::ostream& out) { out << "strategy,seed,train_size,metric,value\n"; }

inline void write_curve_rows(std::ostream& out, const LearningCurve& c) {
    for (const auto& p : c.points) {
        out << c.strategy << ',' << c.seed << ',' << p.train_size << ',' << to_string(c.metric) << ','
            << format_real(p.value) << '\n';
    }
}

inline void write_summary_header(std::ostream& out) { out << "strategy,train_size,mean,median,q25,q75\n"; }

inline void write_summary_rows(std::ostream& out, std::string_view strategy, std::span<const SummaryRow> rows) {
    for (const auto& r : rows) {
        out << strategy << ',' << r.train_size << ',' << format_real(r.mean) << ',' << format_real(r.median) << ','
            << format_real(r.q25) << ',' << format_real(r.q75) << '\n';
    }
}

}  // namespace dcilab
