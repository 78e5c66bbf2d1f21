#pragma once

#include "dcilab/common.hpp"
#include "dcilab/dataset.hpp"
#include "dcilab/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dcilab {

enum class Task { classification, regression };

inline Task task_of(const Dataset& ds) {
    return ds.is_classification() ? Task::classification : Task::regression;
}

struct EnsembleConfig {
    std::size_t n_trees = 10;
    /// Maximum tree depth; negative means unlimited. Depth 0 is a single leaf.
    int max_depth = -1;
    /// Minimum number of bootstrap samples on each side of a split.
    std::size_t min_leaf = 1;
    std::uint64_t seed = 0;
};

/// Axis-aligned binary tree. Classification leaves hold a class-probability
/// vector, regression leaves a single value.
class DecisionTree {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        std::uint32_t leaf = 0;  // offset into leaf_values_
    };

    std::span<const double> predict(std::span<const double> x) const {
        std::uint32_t id = 0;
        while (nodes_[id].feature >= 0) {
            const auto& n = nodes_[id];
            id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return {leaf_values_.data() + nodes_[id].leaf, width_};
    }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t depth() const {
        std::size_t best = 0;
        std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [id, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            if (nodes_[id].feature >= 0) {
                stack.push_back({nodes_[id].left, d + 1});
                stack.push_back({nodes_[id].right, d + 1});
            }
        }
        return best;
    }

private:
    friend class TreeBuilder;
    std::vector<Node> nodes_;
    std::vector<double> leaf_values_;
    std::size_t width_ = 1;
};

/// Grows weighted CART trees over a fixed training set. Duplicated bootstrap
/// draws become integer row weights, and the per-feature sort order of the
/// training rows is computed once and filtered per tree.
class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, std::span<const double> y, Task task, std::size_t n_classes)
        : x_(x), y_(y), task_(task), n_classes_(task == Task::classification ? n_classes : 1) {
        const auto n = static_cast<std::size_t>(x.rows());
        const auto d = static_cast<std::size_t>(x.cols());
        sorted_.assign(d, {});
        for (std::size_t f = 0; f < d; ++f) {
            auto& order = sorted_[f];
            order.resize(n);
            std::iota(order.begin(), order.end(), 0u);
            const auto col = static_cast<Eigen::Index>(f);
            std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
                return x(a, col) < x(b, col);
            });
        }
    }

    /// Builds one tree; `weight[r]` is how many times row r was drawn.
    DecisionTree build(std::span<const std::uint32_t> weight, int max_depth, std::size_t min_leaf) {
        const std::size_t d = sorted_.size();
        std::size_t m = 0;
        for (auto w : weight) m += w > 0;
        order_.assign(d, std::vector<std::uint32_t>(m));
        for (std::size_t f = 0; f < d; ++f) {
            std::size_t k = 0;
            for (auto r : sorted_[f]) {
                if (weight[r] > 0) order_[f][k++] = r;
            }
        }
        weight_ = weight;
        goes_left_.assign(weight.size(), 0);
        scratch_.resize(m);

        DecisionTree tree;
        tree.width_ = n_classes_;
        tree.nodes_.emplace_back();
        struct Work {
            std::uint32_t node;
            std::size_t begin, end;
            int depth;
        };
        std::vector<Work> stack{{0, 0, m, 0}};
        while (!stack.empty()) {
            const Work w = stack.back();
            stack.pop_back();
            Split s{};
            const bool can_split = max_depth < 0 || w.depth < max_depth;
            if (can_split && d > 0) s = best_split(w.begin, w.end, min_leaf);
            if (!s.found) {
                make_leaf(tree, w.node, w.begin, w.end);
                continue;
            }
            const std::size_t mid = partition(w.begin, w.end, s);
            const auto left = static_cast<std::uint32_t>(tree.nodes_.size());
            tree.nodes_.emplace_back();
            tree.nodes_.emplace_back();
            auto& node = tree.nodes_[w.node];
            node.feature = static_cast<int>(s.feature);
            node.threshold = s.threshold;
            node.left = left;
            node.right = left + 1;
            // Right pushed first so the left subtree is laid out first.
            stack.push_back({left + 1, mid, w.end, w.depth + 1});
            stack.push_back({left, w.begin, mid, w.depth + 1});
        }
        return tree;
    }

private:
    struct Split {
        bool found = false;
        std::size_t feature = 0;
        double threshold = 0.0;
    };

    double value(std::uint32_t r, std::size_t f) const {
        return x_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f));
    }

    // Split quality: sum_c count_c^2 / n per side (Gini) or sum^2 / n per
    // side (variance). Larger is better; the parent value is the baseline.
    Split best_split(std::size_t begin, std::size_t end, std::size_t min_leaf) {
        const auto& any = order_[0];
        double total_w = 0.0;
        double total_s = 0.0;
        std::vector<double> total_c(n_classes_, 0.0);
        for (std::size_t i = begin; i < end; ++i) {
            const auto r = any[i];
            const double w = weight_[r];
            total_w += w;
            if (task_ == Task::classification)
                total_c[static_cast<std::size_t>(y_[r])] += w;
            else
                total_s += w * y_[r];
        }
        if (total_w < 2.0 * static_cast<double>(min_leaf)) return {};

        double parent = 0.0;
        if (task_ == Task::classification) {
            double sq = 0.0;
            for (double c : total_c) sq += c * c;
            parent = sq / total_w;
        } else {
            parent = total_s * total_s / total_w;
        }

        Split best;
        double best_score = parent + 1e-12 * std::max(1.0, std::abs(parent));
        std::vector<double> left_c(n_classes_);
        for (std::size_t f = 0; f < order_.size(); ++f) {
            const auto& ord = order_[f];
            if (value(ord[begin], f) == value(ord[end - 1], f)) continue;
            std::fill(left_c.begin(), left_c.end(), 0.0);
            double lw = 0.0, ls = 0.0, lsq = 0.0;
            double rsq = 0.0;
            if (task_ == Task::classification) {
                for (double c : total_c) rsq += c * c;
            }
            for (std::size_t i = begin; i + 1 < end; ++i) {
                const auto r = ord[i];
                const double w = weight_[r];
                lw += w;
                if (task_ == Task::classification) {
                    const auto c = static_cast<std::size_t>(y_[r]);
                    const double lc = left_c[c];
                    const double rc = total_c[c] - lc;
                    lsq += w * (2.0 * lc + w);
                    rsq -= w * (2.0 * rc - w);
                    left_c[c] = lc + w;
                } else {
                    ls += w * y_[r];
                }
                const double xv = value(r, f);
                const double xn = value(ord[i + 1], f);
                if (xv == xn) continue;
                const double rw = total_w - lw;
                if (lw < static_cast<double>(min_leaf) || rw < static_cast<double>(min_leaf)) continue;
                double score;
                if (task_ == Task::classification) {
                    score = lsq / lw + rsq / rw;
                } else {
                    const double rs = total_s - ls;
                    score = ls * ls / lw + rs * rs / rw;
                }
                if (score > best_score) {
                    best_score = score;
                    double thr = 0.5 * (xv + xn);
                    if (!(thr < xn)) thr = xv;
                    best = {true, f, thr};
                }
            }
        }
        return best;
    }

    std::size_t partition(std::size_t begin, std::size_t end, const Split& s) {
        const auto& ord = order_[s.feature];
        std::size_t n_left = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const auto r = ord[i];
            const bool left = value(r, s.feature) <= s.threshold;
            goes_left_[r] = left;
            n_left += left;
        }
        for (auto& o : order_) {
            std::size_t li = begin, ri = 0;
            for (std::size_t i = begin; i < end; ++i) {
                if (goes_left_[o[i]])
                    o[li++] = o[i];
                else
                    scratch_[ri++] = o[i];
            }
            std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(ri),
                      o.begin() + static_cast<std::ptrdiff_t>(li));
        }
        return begin + n_left;
    }

    void make_leaf(DecisionTree& tree, std::uint32_t node, std::size_t begin, std::size_t end) {
        tree.nodes_[node].feature = -1;
        tree.nodes_[node].leaf = static_cast<std::uint32_t>(tree.leaf_values_.size());
        const auto& ord = order_[0];
        double tw = 0.0;
        std::vector<double> acc(n_classes_, 0.0);
        for (std::size_t i = begin; i < end; ++i) {
            const auto r = ord[i];
            const double w = weight_[r];
            tw += w;
            if (task_ == Task::classification)
                acc[static_cast<std::size_t>(y_[r])] += w;
            else
                acc[0] += w * y_[r];
        }
        for (double& a : acc) a /= tw;
        tree.leaf_values_.insert(tree.leaf_values_.end(), acc.begin(), acc.end());
    }

    const Matrix& x_;
    std::span<const double> y_;
    Task task_;
    std::size_t n_classes_;
    std::vector<std::vector<std::uint32_t>> sorted_;
    std::vector<std::vector<std::uint32_t>> order_;
    std::span<const std::uint32_t> weight_;
    std::vector<std::uint8_t> goes_left_;
    std::vector<std::uint32_t> scratch_;
};

struct TreeEnsemble {
    std::vector<DecisionTree> trees;
    Task task = Task::classification;
    std::size_t n_classes = 1;
    std::size_t dims = 0;
    std::uint64_t rng_seed = 0;

    std::size_t width() const { return task == Task::classification ? n_classes : 1; }
};

/// Bagged trees: tree t is grown on a bootstrap resample (n draws with
/// replacement) from an RNG seeded by mix_seed(seed, t).
inline TreeEnsemble fit_ensemble(const Dataset& train, const EnsembleConfig& cfg) {
    if (train.rows() == 0) throw std::invalid_argument("fit_ensemble: empty training set");
    if (cfg.n_trees == 0) throw std::invalid_argument("fit_ensemble: need at least one tree");
    TreeEnsemble ens;
    ens.task = task_of(train);
    ens.n_classes = ens.task == Task::classification ? std::max<std::size_t>(train.class_names.size(), 1) : 1;
    ens.dims = train.dims();
    ens.rng_seed = cfg.seed;

    TreeBuilder builder(train.features, train.labels, ens.task, ens.n_classes);
    const std::size_t n = train.rows();
    std::vector<std::uint32_t> weight(n);
    ens.trees.reserve(cfg.n_trees);
    for (std::size_t t = 0; t < cfg.n_trees; ++t) {
        std::mt19937_64 rng(mix_seed(cfg.seed, t));
        std::fill(weight.begin(), weight.end(), 0u);
        for (std::size_t i = 0; i < n; ++i) ++weight[uniform_index(rng, n)];
        ens.trees.push_back(builder.build(weight, cfg.max_depth, cfg.min_leaf));
    }
    return ens;
}

/// Member outputs for one input row: `per_member` is members x classes
/// (members x 1 for regression); `aggregate` is the member mean.
struct EnsemblePrediction {
    Task task = Task::classification;
    Matrix per_member;
    Vector aggregate;

    std::size_t members() const { return static_cast<std::size_t>(per_member.rows()); }
};

inline EnsemblePrediction predict_row(const TreeEnsemble& ens, std::span<const double> x) {
    if (x.size() != ens.dims) throw std::invalid_argument("predict: feature dimension mismatch");
    EnsemblePrediction p;
    p.task = ens.task;
    const auto w = static_cast<Eigen::Index>(ens.width());
    p.per_member.resize(static_cast<Eigen::Index>(ens.trees.size()), w);
    for (std::size_t t = 0; t < ens.trees.size(); ++t) {
        const auto out = ens.trees[t].predict(x);
        for (Eigen::Index c = 0; c < w; ++c) p.per_member(static_cast<Eigen::Index>(t), c) = out[static_cast<std::size_t>(c)];
    }
    p.aggregate = p.per_member.colwise().mean().transpose();
    return p;
}

inline std::vector<EnsemblePrediction> predict(const TreeEnsemble& ens, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != ens.dims) throw std::invalid_argument("predict: feature dimension mismatch");
    std::vector<EnsemblePrediction> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) out.push_back(predict_row(ens, row_span(x, r)));
    return out;
}

namespace detail {

/// Population standard deviation, shifted by the first value so a constant
/// input gives exactly 0.
inline double population_std(std::span<const double> v) {
    const double shift = v.front();
    double mean = 0.0;
    for (double x : v) mean += x - shift;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) {
        const double d = (x - shift) - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace detail

/// Committee closeness to 0.5: -(1/M) sum_i |0.5 - p_i| over the members'
/// positive-class probabilities. Ranges over [-0.5, 0]; 0 only when every
/// member says 0.5.
inline double ensemble_binary_uncertainty(const EnsemblePrediction& pred) {
    if (pred.task != Task::classification || pred.per_member.cols() != 2)
        throw std::invalid_argument("ensemble_binary_uncertainty: binary classification required");
    if (pred.members() == 0) throw std::invalid_argument("ensemble_binary_uncertainty: no members");
    double s = 0.0;
    for (Eigen::Index i = 0; i < pred.per_member.rows(); ++i) s += std::abs(0.5 - pred.per_member(i, 1));
    return -s / static_cast<double>(pred.members());
}

/// Population std of member regression outputs.
inline double regression_std_uncertainty(const EnsemblePrediction& pred) {
    if (pred.task != Task::regression) throw std::invalid_argument("regression_std_uncertainty: regression required");
    if (pred.members() == 0) throw std::invalid_argument("regression_std_uncertainty: no members");
    std::vector<double> v(pred.members());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = pred.per_member(static_cast<Eigen::Index>(i), 0);
    return detail::population_std(v);
}

/// 1 - probability of the predicted (highest aggregate) class.
inline double max_prob_uncertainty(const EnsemblePrediction& pred) {
    if (pred.task != Task::classification) throw std::invalid_argument("max_prob_uncertainty: classification required");
    return 1.0 - pred.aggregate.maxCoeff();
}

/// Mean over classes of the population std of member probabilities.
inline double mean_std_uncertainty(const EnsemblePrediction& pred) {
    if (pred.task != Task::classification) throw std::invalid_argument("mean_std_uncertainty: classification required");
    if (pred.members() < 2) throw std::invalid_argument("mean_std_uncertainty: need at least two members");
    std::vector<double> v(pred.members());
    double s = 0.0;
    for (Eigen::Index c = 0; c < pred.per_member.cols(); ++c) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = pred.per_member(static_cast<Eigen::Index>(i), c);
        s += detail::population_std(v);
    }
    return s / static_cast<double>(pred.per_member.cols());
}

/// Plain kNN predictor: class vote fractions (classification) or the mean
/// neighbour response (regression), as a one-element vector.
inline std::vector<double> knn_predict(const Dataset& pool, std::span<const double> query, std::size_t k) {
    if (pool.rows() == 0) throw std::invalid_argument("knn_predict: empty pool");
    const auto classes = class_labels(pool);
    const auto nb = knn(pool, classes.ids, query, k);
    if (pool.is_classification()) {
        std::vector<double> votes(pool.class_names.size(), 0.0);
        for (const auto& e : nb.entries) votes[static_cast<std::size_t>(e.label)] += 1.0;
        for (double& v : votes) v /= static_cast<double>(nb.size());
        return votes;
    }
    double s = 0.0;
    for (const auto& e : nb.entries) s += pool.labels[e.pool_index];
    return {s / static_cast<double>(nb.size())};
}

}  // namespace dcilab
