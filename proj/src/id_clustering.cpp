#include "scwm/id_clustering.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "scwm/numerics.hpp"

namespace scwm {

std::size_t PseudoLabels::outliers() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kOutlier));
}

namespace {

// Full ranking of every other sample, most similar first.
std::vector<std::vector<int>> rank_all(std::span<const Vec> features) {
    const std::size_t n = features.size();
    Vec sim(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) sim[i * n + j] = sim[j * n + i] = dot(features[i], features[j]);

    std::vector<std::vector<int>> ranks(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& row = ranks[i];
        row.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) row.push_back(static_cast<int>(j));
        std::stable_sort(row.begin(), row.end(), [&](int a, int b) {
            return sim[i * n + static_cast<std::size_t>(a)] > sim[i * n + static_cast<std::size_t>(b)];
        });
    }
    return ranks;
}

}  // namespace

NeighborSets knn(std::span<const Vec> features, int k) {
    if (k <= 0) throw std::invalid_argument("knn: K must be positive");
    if (features.size() < 2) throw std::invalid_argument("knn: need at least two samples");
    auto ranks = rank_all(features);
    for (auto& row : ranks) row.resize(std::min(row.size(), static_cast<std::size_t>(k)));
    return ranks;
}

DistanceMatrix k_reciprocal_jaccard(std::span<const Vec> features, int k1, int k2) {
    if (k1 < 2) throw std::invalid_argument("k_reciprocal_jaccard: k1 must be at least 2");
    const std::size_t n = features.size();
    if (n < 2) throw std::invalid_argument("k_reciprocal_jaccard: need at least two samples");
    const auto ranks = rank_all(features);

    // position[j][i] = rank of i in j's list; self ranks before everyone.
    std::vector<std::vector<std::size_t>> position(n, std::vector<std::size_t>(n, 0));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t r = 0; r < ranks[j].size(); ++r) position[j][static_cast<std::size_t>(ranks[j][r])] = r;

    const auto reciprocal = [&](std::size_t i, std::size_t k) {
        std::vector<int> set{static_cast<int>(i)};
        const std::size_t depth = std::min(k, n - 1);
        for (std::size_t r = 0; r < depth; ++r) {
            const auto j = static_cast<std::size_t>(ranks[i][r]);
            if (position[j][i] < depth) set.push_back(static_cast<int>(j));
        }
        std::sort(set.begin(), set.end());
        return set;
    };

    const auto k_full = static_cast<std::size_t>(k1);
    const auto k_half = static_cast<std::size_t>(k1 / 2);
    std::vector<std::vector<int>> full(n), half(n);
    for (std::size_t i = 0; i < n; ++i) {
        full[i] = reciprocal(i, k_full);
        half[i] = reciprocal(i, k_half);
    }

    std::vector<Vec> membership(n, Vec(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> expanded = full[i];
        for (int j : full[i]) {
            const auto& candidate = half[static_cast<std::size_t>(j)];
            std::vector<int> common;
            std::set_intersection(candidate.begin(), candidate.end(), full[i].begin(), full[i].end(),
                                  std::back_inserter(common));
            if (3 * common.size() >= 2 * candidate.size())
                expanded.insert(expanded.end(), candidate.begin(), candidate.end());
        }
        for (int j : expanded) membership[i][static_cast<std::size_t>(j)] = 1.0;
    }

    if (k2 > 1) {
        const std::size_t depth = std::min(static_cast<std::size_t>(k2 - 1), n - 1);
        std::vector<Vec> averaged(n, Vec(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            auto& out = averaged[i];
            out = membership[i];
            for (std::size_t r = 0; r < depth; ++r) {
                const auto& other = membership[static_cast<std::size_t>(ranks[i][r])];
                for (std::size_t c = 0; c < n; ++c) out[c] += other[c];
            }
            for (auto& v : out) v /= static_cast<double>(depth + 1);
        }
        membership = std::move(averaged);
    }

    DistanceMatrix dist{n, Vec(n * n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double lo = 0.0, hi = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                lo += std::min(membership[i][c], membership[j][c]);
                hi += std::max(membership[i][c], membership[j][c]);
            }
            const double d = hi > 0.0 ? 1.0 - lo / hi : 0.0;
            dist.at(i, j) = dist.at(j, i) = d;
        }
    }
    return dist;
}

DistanceMatrix cosine_distance(std::span<const Vec> features) {
    const std::size_t n = features.size();
    DistanceMatrix dist{n, Vec(n * n, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) dist.at(i, j) = dist.at(j, i) = 1.0 - dot(features[i], features[j]);
    return dist;
}

PseudoLabels dbscan(const DistanceMatrix& dist, double eps, int min_samples) {
    if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be positive");
    if (min_samples < 1) throw std::invalid_argument("dbscan: min_samples must be at least 1");
    const std::size_t n = dist.n;
    if (dist.values.size() != n * n) throw std::invalid_argument("dbscan: malformed distance matrix");

    std::vector<std::vector<std::size_t>> neighbors(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (dist.at(i, j) <= eps) neighbors[i].push_back(j);
    const auto is_core = [&](std::size_t i) { return neighbors[i].size() >= static_cast<std::size_t>(min_samples); };

    constexpr int kUnvisited = -2;
    PseudoLabels out;
    out.labels.assign(n, kUnvisited);
    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (out.labels[i] != kUnvisited) continue;
        if (!is_core(i)) {
            out.labels[i] = kOutlier;
            continue;
        }
        out.labels[i] = cluster;
        std::deque<std::size_t> frontier(neighbors[i].begin(), neighbors[i].end());
        while (!frontier.empty()) {
            const std::size_t j = frontier.front();
            frontier.pop_front();
            if (out.labels[j] == kOutlier) out.labels[j] = cluster;  // border point
            if (out.labels[j] != kUnvisited) continue;
            out.labels[j] = cluster;
            if (is_core(j)) frontier.insert(frontier.end(), neighbors[j].begin(), neighbors[j].end());
        }
        ++cluster;
    }
    out.num_clusters = static_cast<std::size_t>(cluster);
    return out;
}

std::vector<std::vector<Vec>> cluster_centroids(std::span<const std::vector<Vec>> spaces, const PseudoLabels& labels) {
    if (spaces.empty()) throw std::invalid_argument("cluster_centroids: no feature spaces");
    if (labels.num_clusters == 0) throw std::invalid_argument("cluster_centroids: no clusters");
    const std::size_t n = labels.labels.size();
    std::vector<std::vector<Vec>> out(spaces.size());
    for (std::size_t s = 0; s < spaces.size(); ++s) {
        if (spaces[s].size() != n) throw std::invalid_argument("cluster_centroids: feature count mismatch");
        std::vector<Vec> sums(labels.num_clusters);
        std::vector<std::size_t> counts(labels.num_clusters, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const int label = labels.labels[i];
            if (label == kOutlier || spaces[s][i].empty()) continue;
            auto& acc = sums[static_cast<std::size_t>(label)];
            if (acc.empty()) acc.assign(spaces[s][i].size(), 0.0);
            for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += spaces[s][i][d];
            ++counts[static_cast<std::size_t>(label)];
        }
        out[s].resize(labels.num_clusters);
        for (std::size_t c = 0; c < labels.num_clusters; ++c) {
            if (counts[c] == 0) {
                if (s == 0) throw std::invalid_argument("cluster_centroids: cluster without members");
                out[s][c] = out[0][c];
                continue;
            }
            for (auto& v : sums[c]) v /= static_cast<double>(counts[c]);
            out[s][c] = l2_normalize(sums[c]);
        }
    }
    return out;
}

MemoryBank init_memory(std::span<const std::vector<Vec>> spaces, const PseudoLabels& labels, double momentum,
                       double temperature, UpdateStrategy strategy) {
    MemoryBank bank;
    bank.centroids = cluster_centroids(spaces, labels);
    bank.momentum = momentum;
    bank.temperature = temperature;
    bank.strategy = strategy;
    return bank;
}

}  // namespace scwm
