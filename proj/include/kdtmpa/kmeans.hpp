#pragma once

#include "kdtmpa/common.hpp"

#include <array>
#include <limits>
#include <vector>

namespace kdtmpa {

using Point2 = std::array<double, 2>;

struct KMeansResult {
    std::vector<std::vector<int>> clusters; ///< sorted point indices per cluster
    std::vector<int> label;                 ///< cluster of each point
    std::vector<Point2> centers;
    std::vector<double> wcss_history;       ///< within-cluster sum of squares after each Lloyd step
    int iterations = 0;
};

namespace detail {
inline double sq_dist(const Point2& a, const Point2& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

inline double wcss(const std::vector<Point2>& pts, const std::vector<int>& label, const std::vector<Point2>& centers) {
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) s += sq_dist(pts[i], centers[static_cast<std::size_t>(label[i])]);
    return s;
}
} // namespace detail

/// Lloyd's algorithm. Without `pinned`, centers are seeded k-means++ style
/// from rng. With `pinned` (one point index per cluster), the pinned points
/// seed the centers and always stay in their cluster, which keeps each
/// engineer's home location inside its own cluster.
inline KMeansResult kmeans_clusters(const std::vector<Point2>& pts, int K, Rng& rng,
                                    const std::vector<int>& pinned = {}, int max_iter = 1000) {
    const int n = static_cast<int>(pts.size());
    if (n == 0) throw ValidationError("kmeans: coordinates required");
    if (K < 1 || K > n) throw ValidationError("kmeans: K must lie in [1, number of points]");
    if (!pinned.empty() && static_cast<int>(pinned.size()) != K)
        throw ValidationError("kmeans: one pinned point per cluster required");
    std::vector<int> pin_of(n, -1);
    for (int c = 0; c < static_cast<int>(pinned.size()); ++c) {
        const int p = pinned[c];
        if (p < 0 || p >= n) throw ValidationError("kmeans: pinned point out of range");
        if (pin_of[p] >= 0) throw ValidationError("kmeans: two clusters pinned to the same point");
        pin_of[p] = c;
    }

    KMeansResult r;
    if (!pinned.empty()) {
        for (int p : pinned) r.centers.push_back(pts[p]);
    } else {
        r.centers.push_back(pts[uniform_index(rng, static_cast<std::size_t>(n))]);
        std::vector<double> d2(n);
        while (static_cast<int>(r.centers.size()) < K) {
            double total = 0.0;
            for (int i = 0; i < n; ++i) {
                d2[i] = std::numeric_limits<double>::infinity();
                for (const auto& c : r.centers) d2[i] = std::min(d2[i], detail::sq_dist(pts[i], c));
                total += d2[i];
            }
            int pick = -1;
            if (total > 0.0) {
                double u = uniform01(rng) * total;
                for (int i = 0; i < n; ++i) {
                    if (d2[i] <= 0.0) continue;
                    pick = i;
                    if ((u -= d2[i]) < 0.0) break;
                }
            } else {
                pick = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n)));
            }
            r.centers.push_back(pts[pick]);
        }
    }

    r.label.assign(n, -1);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = pin_of[i];
            if (best < 0) {
                double bd = std::numeric_limits<double>::infinity();
                for (int c = 0; c < K; ++c) {
                    const double d = detail::sq_dist(pts[i], r.centers[c]);
                    if (d < bd) {
                        bd = d;
                        best = c;
                    }
                }
            }
            if (r.label[i] != best) {
                r.label[i] = best;
                changed = true;
            }
        }
        // Re-seed empty clusters at the point farthest from its center.
        for (int c = 0; c < K; ++c) {
            if (std::find(r.label.begin(), r.label.end(), c) != r.label.end()) continue;
            int far = -1;
            double fd = -1.0;
            std::vector<int> sizes(K, 0);
            for (int l : r.label) ++sizes[l];
            for (int i = 0; i < n; ++i) {
                const double d = detail::sq_dist(pts[i], r.centers[r.label[i]]);
                if (pin_of[i] < 0 && sizes[r.label[i]] > 1 && d > fd) {
                    fd = d;
                    far = i;
                }
            }
            if (far < 0) throw ValidationError("kmeans: cannot fill an empty cluster");
            r.label[far] = c;
            r.centers[c] = pts[far];
            changed = true;
        }
        std::vector<Point2> sum(K, Point2{0.0, 0.0});
        std::vector<int> cnt(K, 0);
        for (int i = 0; i < n; ++i) {
            sum[r.label[i]][0] += pts[i][0];
            sum[r.label[i]][1] += pts[i][1];
            ++cnt[r.label[i]];
        }
        for (int c = 0; c < K; ++c) r.centers[c] = {sum[c][0] / cnt[c], sum[c][1] / cnt[c]};
        r.wcss_history.push_back(detail::wcss(pts, r.label, r.centers));
        r.iterations = it + 1;
        if (!changed) break;
    }
    r.clusters.assign(K, {});
    for (int i = 0; i < n; ++i) r.clusters[r.label[i]].push_back(i);
    return r;
}

} // namespace kdtmpa
