#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "util.hpp"

namespace qbd {

struct KMeansParams {
    std::size_t k = 3;
    std::uint64_t seed = 42;
    int restarts = 4;
    int max_iters = 100;
};

struct KMeansResult {
    std::vector<std::size_t> assignment;      // point -> cluster
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;                     // sum of squared distances to assigned centroid
    std::vector<double> inertia_trace;        // after every assignment step of the winning restart
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

namespace detail {

inline std::vector<std::vector<double>> kmeanspp_seed(const std::vector<std::vector<double>>& points, std::size_t k,
                                                     Rng& rng) {
    const std::size_t n = points.size();
    std::vector<std::vector<double>> centers;
    centers.push_back(points[rng.index(n)]);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                if (r < d2[i]) {
                    pick = i;
                    break;
                }
                r -= d2[i];
            }
        } else {
            pick = rng.index(n);
        }
        centers.push_back(points[pick]);
    }
    return centers;
}

inline KMeansResult lloyd(const std::vector<std::vector<double>>& points, std::vector<std::vector<double>> centers,
                          int max_iters) {
    const std::size_t n = points.size(), k = centers.size(), dim = points.front().size();
    KMeansResult r;
    r.assignment.assign(n, 0);
    std::vector<double> dist(n, 0.0);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = iter == 0;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = squared_distance(points[i], centers[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (best != r.assignment[i]) changed = true;
            r.assignment[i] = best;
            dist[i] = bd;
            inertia += bd;
        }
        r.inertia_trace.push_back(inertia);
        r.inertia = inertia;
        if (!changed) break;

        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[r.assignment[i]];
            for (std::size_t j = 0; j < dim; ++j) sums[r.assignment[i]][j] += points[i][j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // re-seed from the point worst served by its current centroid
                std::size_t far = n;
                for (std::size_t i = 0; i < n; ++i)
                    if (counts[r.assignment[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
                --counts[r.assignment[far]];
                for (std::size_t j = 0; j < dim; ++j) sums[r.assignment[far]][j] -= points[far][j];
                r.assignment[far] = c;
                dist[far] = 0.0;
                counts[c] = 1;
                sums[c] = points[far];
            }
        }
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t j = 0; j < dim; ++j) centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
    r.centroids = std::move(centers);
    return r;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding; the restart with the lowest inertia
/// wins (earliest on ties). Deterministic for a given seed.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, const KMeansParams& params) {
    if (params.k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (points.size() < params.k) throw std::invalid_argument("kmeans: fewer points than clusters");
    if (params.restarts < 1 || params.max_iters < 1) throw std::invalid_argument("kmeans: restarts and max_iters must be >= 1");
    Rng rng(params.seed);
    KMeansResult best;
    bool have = false;
    for (int r = 0; r < params.restarts; ++r) {
        auto result = detail::lloyd(points, detail::kmeanspp_seed(points, params.k, rng), params.max_iters);
        if (!have || result.inertia < best.inertia) {
            best = std::move(result);
            have = true;
        }
    }
    return best;
}

}  // namespace qbd
