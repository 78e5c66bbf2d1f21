#pragma once

#include "dcilab/common.hpp"
#include "dcilab/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace dcilab {

/// Knobs of the distance-weighted class impurity.
///   k       neighbourhood size
///   alpha   distance exponent; larger values sharpen the contrast between
///           near and far neighbours
///   beta    exponent on the weights in the normaliser; beta > 1 makes the
///           score grow away from the labelled data
///   epsilon added to every powered distance so duplicates stay finite
struct DciParams {
    std::size_t k = 20;
    double alpha = 1.5;
    double beta = 1.2;
    double epsilon = 1e-12;

    void validate() const {
        if (k < 1) throw ConfigError("dci: K must be >= 1");
        if (!(alpha > 0.0)) throw ConfigError("dci: alpha must be > 0");
        if (!(beta > 0.0)) throw ConfigError("dci: beta must be > 0");
        if (!(epsilon > 0.0)) throw ConfigError("dci: epsilon must be > 0");
    }

    /// K = 10 setting used for the small-MNIST runs.
    static DciParams k10() { return {10, 1.5, 1.2, 1e-12}; }
};

inline double weighted_distance(double d, const DciParams& p) {
    return std::pow(d, p.alpha) + p.epsilon;
}

/// Minimum over classes of the inverse-distance-weighted mass of neighbours
/// outside the class, normalised by the sum of inverse powered distances
/// raised to beta.
///
/// Only classes present in the neighbourhood are visited: an absent class's
/// numerator is the full weight sum, which bounds every present class's
/// numerator from above. Entries are accumulated in ascending distance order
/// so the result does not depend on the order of `neighbors.entries`.
inline double dci_score(const NeighborSet& neighbors, const DciParams& params, std::size_t class_count) {
    if (neighbors.empty()) throw std::invalid_argument("dci_score: empty neighbour set");

    std::vector<Neighbor> nb = neighbors.entries;
    for (const auto& e : nb) {
        if (e.label < 0 || static_cast<std::size_t>(e.label) >= class_count)
            throw std::invalid_argument("dci_score: label outside class range");
        if (!(e.distance >= 0.0)) throw std::invalid_argument("dci_score: negative distance");
    }
    std::sort(nb.begin(), nb.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.label < b.label);
    });

    std::vector<double> weight(nb.size());
    double norm = 0.0;
    for (std::size_t i = 0; i < nb.size(); ++i) {
        const double wd = weighted_distance(nb[i].distance, params);
        weight[i] = 1.0 / wd;
        norm += 1.0 / std::pow(wd, params.beta);
    }

    std::vector<int> present;
    for (const auto& e : nb) present.push_back(e.label);
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());

    double best = std::numeric_limits<double>::infinity();
    for (int cls : present) {
        double outside = 0.0;
        for (std::size_t i = 0; i < nb.size(); ++i) {
            if (nb[i].label != cls) outside += weight[i];
        }
        best = std::min(best, outside / norm);
    }
    return best;
}

/// Scores every row of `queries` against the labelled pool.
inline std::vector<double> dci_scores(LabelledPool pool, const Matrix& queries, const DciParams& params,
                                      std::size_t class_count) {
    params.validate();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(queries.rows()));
    for (Eigen::Index r = 0; r < queries.rows(); ++r) {
        out.push_back(dci_score(knn(pool, row_span(queries, r), params.k), params, class_count));
    }
    return out;
}

struct GridSpec {
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;
    std::size_t resolution = 100;

    void validate() const {
        if (resolution < 2) throw ConfigError("grid: resolution must be >= 2");
        if (!(x_max != x_min) || !(y_max != y_min)) throw ConfigError("grid: degenerate range");
    }
    double x_at(std::size_t i) const {
        return x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(resolution - 1);
    }
    double y_at(std::size_t j) const {
        return y_min + (y_max - y_min) * static_cast<double>(j) / static_cast<double>(resolution - 1);
    }
};

/// DCI evaluated on a regular 2D grid. Row j of the result is y_at(j),
/// column i is x_at(i).
inline Matrix dci_field(LabelledPool pool, const GridSpec& grid, const DciParams& params, std::size_t class_count) {
    grid.validate();
    params.validate();
    if (pool.dims != 2) throw DataError("dci_field: pool must be 2-dimensional");
    const auto n = static_cast<Eigen::Index>(grid.resolution);
    Matrix field(n, n);
    for (std::size_t j = 0; j < grid.resolution; ++j) {
        for (std::size_t i = 0; i < grid.resolution; ++i) {
            const double q[2] = {grid.x_at(i), grid.y_at(j)};
            field(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                dci_score(knn(pool, q, params.k), params, class_count);
        }
    }
    return field;
}

/// `x,y,dci` rows, y-major, 9 significant digits.
inline void write_field_csv(std::ostream& out, const GridSpec& grid, const Matrix& field) {
    out << "x,y,dci\n";
    for (std::size_t j = 0; j < grid.resolution; ++j) {
        for (std::size_t i = 0; i < grid.resolution; ++i) {
            out << format_real(grid.x_at(i)) << ',' << format_real(grid.y_at(j)) << ','
                << format_real(field(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))) << '\n';
        }
    }
}

}  // namespace dcilab
