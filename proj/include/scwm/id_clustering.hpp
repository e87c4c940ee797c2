#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "scwm/memory_bank.hpp"
#include "scwm/tensor.hpp"

namespace scwm {

inline constexpr int kOutlier = -1;

// Per-sample cluster id in 0..N_C-1, or kOutlier.
struct PseudoLabels {
    std::vector<int> labels;
    std::size_t num_clusters = 0;

    std::size_t outliers() const;
};

// Row i: indices of the K most cosine-similar samples to i, self excluded,
// most similar first, ties by ascending index.
using NeighborSets = std::vector<std::vector<int>>;

NeighborSets knn(std::span<const Vec> features, int k);

// Symmetric square matrix stored row-major.
struct DistanceMatrix {
    std::size_t n = 0;
    Vec values;

    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
};

// Jaccard distance between k-reciprocal neighbour sets.
//
// R(i,k) = {i} ∪ {j ∈ kNN(i,k) : i ∈ kNN(j,k)}. Each R(i,k1) is expanded by R(j,k1/2)
// for every j ∈ R(i,k1) with |R(i,k1) ∩ R(j,k1/2)| ≥ 2/3·|R(j,k1/2)|. With k2 ≤ 1 the
// distance is 1 - |Ri ∩ Rj| / |Ri ∪ Rj| over the expanded sets. With k2 > 1 each
// membership indicator is averaged over the sample's k2-1 nearest neighbours and itself
// (local query expansion) and the distance uses Σmin / Σmax.
DistanceMatrix k_reciprocal_jaccard(std::span<const Vec> features, int k1, int k2 = 1);

DistanceMatrix cosine_distance(std::span<const Vec> features);

// Density clustering over a precomputed distance matrix. A point is core when at least
// min_samples points (itself included) lie within eps (inclusive). Points are scanned in
// ascending index order; border points join the first cluster that reaches them.
PseudoLabels dbscan(const DistanceMatrix& dist, double eps, int min_samples);

// Per feature space, per cluster: l2_normalize(mean of member features). Outliers and
// empty (skipped) features are ignored. spaces[s][i] is sample i's feature in space s.
// A cluster without any valid member in a part space inherits its global centroid.
std::vector<std::vector<Vec>> cluster_centroids(std::span<const std::vector<Vec>> spaces,
                                                const PseudoLabels& labels);

// Memory bank initialised with the cluster centroids of every space.
MemoryBank init_memory(std::span<const std::vector<Vec>> spaces, const PseudoLabels& labels, double momentum,
                       double temperature, UpdateStrategy strategy);

}  // namespace scwm
