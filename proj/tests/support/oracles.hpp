#pragma once

// Brute-force reference implementations. Deliberately naive: they share no
// code with the library beyond plain containers.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace oracle {

/// Okapi BM25 computed term by term from raw token lists.
inline std::map<std::string, double> bm25(const std::vector<std::vector<std::string>>& docs,
                                          const std::vector<std::string>& ids, const std::vector<std::string>& query,
                                          double k1 = 1.2, double b = 0.75) {
    const double n = static_cast<double>(docs.size());
    double total = 0;
    for (const auto& d : docs) total += static_cast<double>(d.size());
    const double avgdl = total / n;
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double s = 0;
        bool matched = false;
        for (const auto& q : query) {
            const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), q));
            if (tf == 0) continue;
            matched = true;
            double df = 0;
            for (const auto& d : docs) df += std::find(d.begin(), d.end(), q) != d.end() ? 1 : 0;
            const double idf = std::log(1 + (n - df + 0.5) / (df + 0.5));
            const double dl = static_cast<double>(docs[i].size());
            s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
        }
        if (matched) out[ids[i]] = s;
    }
    return out;
}

/// Ids ordered by score descending, ties by id ascending.
inline std::vector<std::string> order(const std::map<std::string, double>& scores) {
    std::vector<std::pair<std::string, double>> v(scores.begin(), scores.end());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> out;
    for (auto& p : v) out.push_back(p.first);
    return out;
}

/// Reciprocal rank fusion over lists given as id sequences (position i has rank i + 1).
inline std::map<std::string, double> rrf(const std::vector<std::vector<std::string>>& lists, int k) {
    std::map<std::string, double> out;
    for (const auto& list : lists)
        for (std::size_t i = 0; i < list.size(); ++i) out[list[i]] += 1.0 / (k + static_cast<double>(i + 1));
    return out;
}

/// Reference DBSCAN via connected components of the core graph. A border
/// point belongs to the component, among those holding one of its core
/// neighbours, whose smallest core index is lowest. Returns the partition as
/// a set of member sets.
inline std::set<std::set<std::size_t>> dbscan(const std::vector<std::vector<double>>& pts, double eps,
                                              std::size_t min_pts) {
    const std::size_t n = pts.size();
    auto dist = [&](std::size_t a, std::size_t b) {
        double d = 0;
        for (std::size_t i = 0; i < pts[a].size(); ++i) d += pts[a][i] * pts[b][i];
        return 1.0 - d;
    };
    std::vector<std::vector<bool>> near(n, std::vector<bool>(n));
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            near[i][j] = i == j || dist(i, j) <= eps;
            count += near[i][j] ? 1 : 0;
        }
        core[i] = count >= min_pts;
    }
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (core[i] && core[j] && near[i][j]) parent[std::max(find(i), find(j))] = std::min(find(i), find(j));
    // Component label = root, which is its smallest core index.
    std::map<std::size_t, std::set<std::size_t>> comps;
    std::set<std::set<std::size_t>> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) {
            comps[find(i)].insert(i);
            continue;
        }
        std::size_t best = n;
        for (std::size_t j = 0; j < n; ++j)
            if (core[j] && near[i][j]) best = std::min(best, find(j));
        if (best == n) out.insert({i});
        else comps[best].insert(i);
    }
    for (auto& [root, members] : comps) out.insert(members);
    return out;
}

/// exp(x_i / t) / sum_j exp(x_j / t), written out directly.
inline std::vector<double> softmax(const std::vector<double>& x, double t) {
    double sum = 0;
    for (double v : x) sum += std::exp(v / t);
    std::vector<double> out;
    for (double v : x) out.push_back(std::exp(v / t) / sum);
    return out;
}

}  // namespace oracle
