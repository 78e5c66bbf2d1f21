#pragma once

#include "dcilab/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace dcilab {

namespace detail {

/// 1-based ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
        i = j + 1;
    }
    return rank;
}

}  // namespace detail

/// Mann-Whitney AUROC: the fraction of (positive, negative) pairs where the
/// positive scores higher, ties counting one half. `labels` are 0/1.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("auroc: length mismatch");
    const auto ranks = detail::average_ranks(scores);
    double pos = 0.0, neg = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            pos += 1.0;
            rank_sum += ranks[i];
        } else if (labels[i] == 0) {
            neg += 1.0;
        } else {
            throw std::invalid_argument("auroc: labels must be 0 or 1");
        }
    }
    if (pos == 0.0 || neg == 0.0) throw std::invalid_argument("auroc: both classes must be present");
    // U is a multiple of 0.5 and exact in double for any realistic length.
    const double u = rank_sum - pos * (pos + 1.0) / 2.0;
    return u / (pos * neg);
}

template <class T>
double accuracy(std::span<const T> predicted, std::span<const T> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("accuracy: length mismatch");
    if (predicted.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

inline double rmse(std::span<const double> predicted, std::span<const double> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("rmse: length mismatch");
    if (predicted.empty()) throw std::invalid_argument("rmse: empty input");
    double ss = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - truth[i];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(predicted.size()));
}

struct DecileBucket {
    double percentile_lo = 0.0;
    double percentile_hi = 0.0;
    std::size_t count = 0;
    double accuracy = 0.0;
};

struct DecileReport {
    std::vector<DecileBucket> buckets;
};

/// Sorts items by ascending uncertainty (ties by original position), splits
/// them into 10 consecutive buckets whose sizes differ by at most one (the
/// lower-uncertainty buckets take the remainder) and reports the fraction
/// correct in each.
inline DecileReport decile_analysis(std::span<const double> uncertainties, std::span<const int> correct) {
    if (uncertainties.size() != correct.size()) throw std::invalid_argument("decile_analysis: length mismatch");
    const std::size_t n = uncertainties.size();
    if (n < 10) throw std::invalid_argument("decile_analysis: need at least 10 items");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return uncertainties[a] < uncertainties[b]; });
    DecileReport rep;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < 10; ++b) {
        const std::size_t size = n / 10 + (b < n % 10 ? 1 : 0);
        std::size_t hits = 0;
        for (std::size_t i = pos; i < pos + size; ++i) hits += correct[idx[i]] != 0;
        rep.buckets.push_back({10.0 * static_cast<double>(b), 10.0 * static_cast<double>(b + 1), size,
                               static_cast<double>(hits) / static_cast<double>(size)});
        pos += size;
    }
    return rep;
}

/// Bucket-wise mean accuracy over several reports with equal bucket counts.
inline DecileReport average_reports(std::span<const DecileReport> reports) {
    if (reports.empty()) throw std::invalid_argument("average_reports: no reports");
    DecileReport out = reports.front();
    for (std::size_t b = 0; b < out.buckets.size(); ++b) {
        double s = 0.0;
        for (const auto& r : reports) {
            if (r.buckets.size() != out.buckets.size() || r.buckets[b].count != out.buckets[b].count)
                throw std::invalid_argument("average_reports: bucket layout differs");
            s += r.buckets[b].accuracy;
        }
        out.buckets[b].accuracy = s / static_cast<double>(reports.size());
    }
    return out;
}

inline void write_decile_csv(std::ostream& out, const DecileReport& rep) {
    out << "decile,count,accuracy\n";
    for (std::size_t b = 0; b < rep.buckets.size(); ++b) {
        out << b << ',' << rep.buckets[b].count << ',' << format_real(rep.buckets[b].accuracy) << '\n';
    }
}

/// Spearman rank correlation (Pearson on average ranks). Returns 0 when
/// either input is constant.
inline double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman: need two equal-length series");
    const auto ra = detail::average_ranks(a);
    const auto rb = detail::average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

/// One-sided exact sign test: P(X >= wins) for X ~ Binomial(trials, 1/2).
/// Ties should be dropped from `trials` by the caller.
inline double sign_test_p(std::size_t wins, std::size_t trials) {
    if (wins > trials) throw std::invalid_argument("sign_test_p: wins > trials");
    double p = 0.0;
    for (std::size_t k = wins; k <= trials; ++k) {
        p += std::exp(std::lgamma(static_cast<double>(trials) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                      std::lgamma(static_cast<double>(trials - k) + 1.0) -
                      static_cast<double>(trials) * std::log(2.0));
    }
    return std::min(p, 1.0);
}

}  // namespace dcilab
