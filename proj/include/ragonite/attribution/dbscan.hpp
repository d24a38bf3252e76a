#pragma once

#include <algorithm>
#include <deque>
#include <vector>

#include "ragonite/llm/provider.hpp"

namespace ragonite::attribution {

/// Cosine distance of two unit vectors.
inline double cosine_distance(const llm::Vector& a, const llm::Vector& b) { return 1.0 - llm::dot(a, b); }

/// DBSCAN over cosine distance. A point's neighbourhood includes itself and
/// every point within `eps`; points with at least `min_pts` neighbours are core.
/// A border point joins the first cluster that reaches it. Noise points become
/// singleton clusters, so the result partitions 0..n-1. Clusters are numbered
/// by their smallest member, members listed ascending.
inline std::vector<std::vector<std::size_t>> dbscan(const std::vector<llm::Vector>& points, double eps,
                                                    std::size_t min_pts) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> neighbours(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i == j || cosine_distance(points[i], points[j]) <= eps) neighbours[i].push_back(j);

    constexpr long unassigned = -1;
    std::vector<long> label(n, unassigned);
    long next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != unassigned || neighbours[i].size() < min_pts) continue;
        const long c = next++;
        label[i] = c;
        std::deque<std::size_t> queue(neighbours[i].begin(), neighbours[i].end());
        while (!queue.empty()) {
            const auto q = queue.front();
            queue.pop_front();
            if (label[q] != unassigned) continue;
            label[q] = c;
            if (neighbours[q].size() >= min_pts) queue.insert(queue.end(), neighbours[q].begin(), neighbours[q].end());
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (label[i] == unassigned) label[i] = next++;

    std::vector<std::vector<std::size_t>> clusters(static_cast<std::size_t>(next));
    for (std::size_t i = 0; i < n; ++i) clusters[static_cast<std::size_t>(label[i])].push_back(i);
    std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return clusters;
}

}  // namespace ragonite::attribution
