#include "dcilab/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace dcilab;

namespace {

double brute_auroc(const std::vector<double>& s, const std::vector<int>& y) {
    double hits = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            pairs += 1.0;
            hits += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return hits / pairs;
}

}  // namespace

TEST(Auroc, Examples) {
    const std::vector<int> y{0, 0, 1, 1};
    EXPECT_EQ(auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y), 1.0);
    EXPECT_EQ(auroc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, y), 0.5);
    EXPECT_EQ(auroc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, y), 0.75);
}

TEST(Auroc, Errors) {
    EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), std::invalid_argument);
    EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 2}), std::invalid_argument);
    EXPECT_THROW(auroc(std::vector<double>{0.1}, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST(AurocProperty, ExactAgainstBruteForceWithFlipAndMonotoneTransform) {
    std::mt19937_64 rng(30);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 2 + rng() % 60;
        std::vector<double> s(n);
        std::vector<int> y(n), flipped(n);
        // Coarse grid of score values forces many ties.
        for (auto& v : s) v = static_cast<double>(rng() % 7) / 4.0;
        for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(rng() % 2);
        y[0] = 0;
        y[1] = 1;
        for (std::size_t i = 0; i < n; ++i) flipped[i] = 1 - y[i];
        const double a = auroc(s, y);
        EXPECT_EQ(a, brute_auroc(s, y));
        EXPECT_EQ(a + auroc(s, flipped), 1.0);
        std::vector<double> e(n);
        for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(3.0 * s[i]) - 7.0;
        EXPECT_EQ(auroc(e, y), a);
    }
}

TEST(Accuracy, Examples) {
    const std::vector<int> a{1, 2, 3, 4};
    EXPECT_EQ(accuracy<int>(a, a), 1.0);
    EXPECT_EQ(accuracy<int>(a, std::vector<int>{0, 0, 0, 0}), 0.0);
    EXPECT_EQ(accuracy<int>(a, std::vector<int>{1, 2, 3, 0}), 0.75);
    EXPECT_THROW(accuracy<int>(a, std::vector<int>{1}), std::invalid_argument);
}

TEST(Rmse, Examples) {
    const std::vector<double> a{0.5, 1.5};
    EXPECT_EQ(rmse(a, a), 0.0);
    EXPECT_NEAR(rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}), std::sqrt(12.5), 1e-15);
    EXPECT_THROW(rmse(a, std::vector<double>{1}), std::invalid_argument);
}

TEST(RmseProperty, OracleSymmetryShift) {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + rng() % 100;
        std::vector<double> a(n), b(n), as(n), bs(n);
        for (auto& v : a) v = nd(rng);
        for (auto& v : b) v = nd(rng);
        long double ss = 0;
        for (std::size_t i = 0; i < n; ++i) ss += static_cast<long double>(a[i] - b[i]) * (a[i] - b[i]);
        const double expected = static_cast<double>(std::sqrt(ss / n));
        EXPECT_NEAR(rmse(a, b), expected, 1e-12 * expected);
        EXPECT_EQ(rmse(a, b), rmse(b, a));
        for (std::size_t i = 0; i < n; ++i) {
            as[i] = a[i] + 0.75;
            bs[i] = b[i] + 0.75;
        }
        EXPECT_NEAR(rmse(as, bs), rmse(a, b), 1e-12);
    }
}

TEST(Deciles, AllCorrect) {
    std::vector<double> u(57);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = static_cast<double>(i % 13);
    const auto rep = decile_analysis(u, std::vector<int>(57, 1));
    for (const auto& b : rep.buckets) EXPECT_EQ(b.accuracy, 1.0);
}

TEST(Deciles, AntiCorrelated) {
    std::vector<double> u(100);
    std::vector<int> c(100);
    for (std::size_t i = 0; i < 100; ++i) {
        // Scramble the order so the sort does the work.
        const std::size_t r = (i * 37) % 100;
        u[i] = static_cast<double>(r);
        c[i] = r < 50;
    }
    const auto rep = decile_analysis(u, c);
    const std::vector<double> expected{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
    for (std::size_t b = 0; b < 10; ++b) EXPECT_EQ(rep.buckets[b].accuracy, expected[b]);
}

TEST(Deciles, RemainderGoesToLeadingBuckets) {
    const auto rep = decile_analysis(std::vector<double>(103, 0.0), std::vector<int>(103, 0));
    const std::vector<std::size_t> expected{11, 11, 11, 10, 10, 10, 10, 10, 10, 10};
    for (std::size_t b = 0; b < 10; ++b) {
        EXPECT_EQ(rep.buckets[b].count, expected[b]);
        EXPECT_EQ(rep.buckets[b].percentile_lo, 10.0 * static_cast<double>(b));
        EXPECT_EQ(rep.buckets[b].percentile_hi, 10.0 * static_cast<double>(b + 1));
    }
}

TEST(Deciles, TiesKeepOriginalOrder) {
    // Equal uncertainties: first 10 items go to bucket 0 regardless of value.
    std::vector<int> c(20, 0);
    for (int i = 0; i < 10; ++i) c[i] = 1;
    const auto rep = decile_analysis(std::vector<double>(20, 1.0), c);
    for (std::size_t b = 0; b < 5; ++b) EXPECT_EQ(rep.buckets[b].accuracy, 1.0);
    for (std::size_t b = 5; b < 10; ++b) EXPECT_EQ(rep.buckets[b].accuracy, 0.0);
}

TEST(Deciles, Errors) {
    EXPECT_THROW(decile_analysis(std::vector<double>(9, 0.0), std::vector<int>(9, 0)), std::invalid_argument);
    EXPECT_THROW(decile_analysis(std::vector<double>(12, 0.0), std::vector<int>(11, 0)), std::invalid_argument);
}

TEST(DecilesProperty, WeightedMeanIsOverallAccuracy) {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 10 + rng() % 500;
        std::vector<double> unc(n);
        std::vector<int> c(n);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            unc[i] = u(rng);
            hits += c[i] = u(rng) < 0.7;
        }
        const auto rep = decile_analysis(unc, c);
        double weighted = 0.0;
        std::size_t total = 0;
        for (const auto& b : rep.buckets) {
            weighted += b.accuracy * static_cast<double>(b.count);
            total += b.count;
        }
        EXPECT_EQ(total, n);
        EXPECT_NEAR(weighted / static_cast<double>(n), static_cast<double>(hits) / static_cast<double>(n), 1e-12);
    }
}

TEST(Deciles, AverageAndCsv) {
    std::vector<double> u(20);
    for (std::size_t i = 0; i < 20; ++i) u[i] = static_cast<double>(i);
    std::vector<int> a(20, 1), b(20, 0);
    const std::vector<DecileReport> reps{decile_analysis(u, a), decile_analysis(u, b), decile_analysis(u, a)};
    const auto avg = average_reports(reps);
    for (const auto& bucket : avg.buckets) EXPECT_NEAR(bucket.accuracy, 2.0 / 3.0, 1e-15);
    std::ostringstream os;
    write_decile_csv(os, avg);
    EXPECT_EQ(os.str().substr(0, 40), "decile,count,accuracy\n0,2,0.666666667\n1,");
    const std::vector<DecileReport> mismatched{decile_analysis(u, a), decile_analysis(std::vector<double>(30, 0.0), std::vector<int>(30, 0))};
    EXPECT_THROW(average_reports(mismatched), std::invalid_argument);
}

TEST(Spearman, KnownValues) {
    const std::vector<double> a{1, 2, 3, 4, 5};
    EXPECT_NEAR(spearman(a, std::vector<double>{10, 20, 30, 40, 50}), 1.0, 1e-15);
    EXPECT_NEAR(spearman(a, std::vector<double>{5, 4, 3, 2, 1}), -1.0, 1e-15);
    EXPECT_EQ(spearman(a, std::vector<double>{1, 1, 1, 1, 1}), 0.0);
    // 1 - 6*sum(d^2)/(n(n^2-1)) for distinct ranks: d = (0,0,1,-1,0) -> 1 - 12/120.
    EXPECT_NEAR(spearman(a, std::vector<double>{1, 2, 4, 3, 5}), 0.9, 1e-12);
}

TEST(SignTest, KnownValues) {
    EXPECT_NEAR(sign_test_p(0, 10), 1.0, 1e-12);
    EXPECT_NEAR(sign_test_p(10, 10), std::pow(0.5, 10), 1e-15);
    // P(X >= 8 | n = 10) = (45 + 10 + 1) / 1024.
    EXPECT_NEAR(sign_test_p(8, 10), 56.0 / 1024.0, 1e-12);
    EXPECT_THROW(sign_test_p(3, 2), std::invalid_argument);
}
