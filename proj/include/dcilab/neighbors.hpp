#pragma once

#include "dcilab/common.hpp"
#include "dcilab/dataset.hpp"

#include <algorithm>
#include <cmath>

namespace dcilab {

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("euclidean_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

struct Neighbor {
    double distance = 0.0;
    int label = 0;
    std::size_t pool_index = 0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Nearest labelled points to a query, ascending by distance with ties broken
/// by ascending pool index.
struct NeighborSet {
    std::vector<Neighbor> entries;

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
};

/// Read-only view of a labelled pool: row-major features plus one class id
/// per row. The view does not own its storage.
struct LabelledPool {
    std::span<const double> features;
    std::size_t dims = 0;
    std::span<const int> labels;

    LabelledPool() = default;
    LabelledPool(std::span<const double> rows_major, std::size_t d, std::span<const int> ids)
        : features(rows_major), dims(d), labels(ids) {
        if (features.size() != dims * labels.size())
            throw std::invalid_argument("knn: label count does not match feature rows");
    }
    LabelledPool(const Matrix& m, std::span<const int> ids)
        : LabelledPool({m.data(), static_cast<std::size_t>(m.size())}, static_cast<std::size_t>(m.cols()), ids) {}

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return features.subspan(i * dims, dims); }
};

/// Exact brute-force K nearest neighbours. Returns min(K, pool size) entries.
inline NeighborSet knn(LabelledPool pool, std::span<const double> query, std::size_t k) {
    if (pool.size() == 0) throw std::invalid_argument("knn: empty pool");
    if (k == 0) throw std::invalid_argument("knn: K must be positive");
    if (pool.dims != query.size()) throw std::invalid_argument("knn: query dimension mismatch");

    std::vector<Neighbor> all;
    all.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        all.push_back({euclidean_distance(pool.row(i), query),
                       pool.labels[i], i});
    }
    const auto closer = [](const Neighbor& a, const Neighbor& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.pool_index < b.pool_index);
    };
    const std::size_t kk = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(kk), all.end(), closer);
    all.resize(kk);
    return {std::move(all)};
}

inline NeighborSet knn(const Dataset& pool, std::span<const int> class_ids, std::span<const double> query,
                       std::size_t k) {
    return knn(LabelledPool(pool.features, class_ids), query, k);
}

inline NeighborSet knn(const Dataset& pool, std::span<const double> query, std::size_t k) {
    const auto classes = class_labels(pool);
    return knn(pool, classes.ids, query, k);
}

}  // namespace dcilab
