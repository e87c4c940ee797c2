#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "scwm/memory_bank.hpp"
#include "scwm/tensor.hpp"

namespace scwm {

// Unit-norm features of one sample. An empty part vector marks a part whose mask
// pooled to zero; such parts are skipped by difficulty, weights, updates and losses.
struct SampleFeatures {
    Vec global;
    std::vector<Vec> parts;
};

struct DifficultyScores {
    double alpha_g = 0.0;
    Vec alpha_p;                   // per part, 0 for skipped parts
    std::vector<char> part_valid;  // alpha_g is the mean of alpha_p over valid parts
};

// IoU of the global kNN set with each part kNN set. Every row must be non-empty.
DifficultyScores difficulty(std::span<const int> knn_global, std::span<const std::vector<int>> knn_parts);
// Same, with parts whose part_valid entry is 0 skipped (their rows are not read).
DifficultyScores difficulty(std::span<const int> knn_global, std::span<const std::vector<int>> knn_parts,
                            std::span<const char> part_valid);

struct BatchWeights {
    Vec global;               // [sample]
    std::vector<Vec> parts;   // [sample][part]
    bool degenerate = false;  // a denominator vanished and uniform weights were used
};

// ω^g ∝ 1 - α^g and ω^{p_k} ∝ α^{p_k}, l1-normalized over the batch.
BatchWeights batch_weights(std::span<const DifficultyScores> scores);

BatchWeights uniform_weights(std::span<const SampleFeatures> batch);

// Weights for the configured update strategy:
//   average: 1/B everywhere (1/valid count for parts)
//   hardest: per cluster present in the batch and per space, weight 1 for the sample
//            least similar to the current centroid, 0 otherwise
//   weighted: batch_weights(scores)
BatchWeights strategy_weights(UpdateStrategy strategy, std::span<const int> labels,
                              std::span<const SampleFeatures> batch, std::span<const DifficultyScores> scores,
                              const MemoryBank& bank);

// c ← m·c + (1-m)·ω·f followed by l2 normalisation, applied sample by sample in batch
// order. Uses bank.momentum.
void memory_update(MemoryBank& bank, std::span<const int> labels, std::span<const SampleFeatures> batch,
                   const BatchWeights& weights);

struct SpaceLoss {
    double loss = 0.0;
    Vec grad;
};

// -log(ω·exp(f·c₊/τ) / Σ_j exp(f·c_j/τ)) and its gradient wrt f.
SpaceLoss cluster_nce(std::span<const double> feature, std::span<const Vec> centroids, std::size_t positive,
                      double temperature, double weight = 1.0);

struct FeatureLoss {
    double loss = 0.0;
    Vec global;               // dLoss/df^g (zeros when the term does not involve f^g)
    std::vector<Vec> parts;   // dLoss/df^{p_k}, empty for skipped parts
};

// Weighted ClusterNCE: global term plus the mean of the part terms.
FeatureLoss wnce_loss(const SampleFeatures& sample, std::size_t label, const MemoryBank& bank,
                      double weight_global, std::span<const double> weight_parts);

// Part separation: each part feature against the sample's own-cluster part centroids.
FeatureLoss sep_loss(std::span<const Vec> parts, std::span<const Vec> own_centroids, double temperature);

// wnce_loss + sep_loss against the sample's own cluster.
FeatureLoss wm_loss(const SampleFeatures& sample, std::size_t label, const MemoryBank& bank, double weight_global,
                    std::span<const double> weight_parts);

}  // namespace scwm
