#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "scwm/tensor.hpp"

// Spatial cascaded clustering: turns a feature map into pseudo part masks.
//
//   1. foreground_split: 3-class 1-D k-means on per-pixel feature norms
//      (salient, regular foreground, background)
//   2. censored_distance: feature distances between foreground pixels, with
//      spatially distant pairs replaced by kInfSentinel
//   3. agglomerate: average linkage that refuses sentinel-only merges
//   4. build_masks: one-hot l×H×W mask, parts ordered top to bottom, last
//      channel = background
//
// The masks are smoothed across epochs (smooth_masks) and supervise the part
// classifier through scc_loss.
namespace scwm {

inline constexpr double kInfSentinel = 1e30;

struct Coord {
    int row = 0;
    int col = 0;
};

struct ForegroundSplit {
    std::size_t height = 0;
    std::size_t width = 0;
    // Flat pixel indices (row * width + col), ascending.
    std::vector<std::size_t> salient;
    std::vector<std::size_t> regular;
    std::vector<std::size_t> background;
    bool used_fallback = false;

    std::vector<std::size_t> foreground() const;
    Coord coord(std::size_t flat) const {
        return {static_cast<int>(flat / width), static_cast<int>(flat % width)};
    }
};

Vec pixel_norms(const FeatureMap& fmap);

// Split on precomputed per-pixel norms. With fewer than three distinct norms the
// pixels are ranked by descending norm (ties by index) and cut into thirds.
ForegroundSplit split_by_norm(std::span<const double> norms, std::size_t height, std::size_t width);
ForegroundSplit foreground_split(const FeatureMap& fmap);

class CensoredDistanceMatrix {
public:
    CensoredDistanceMatrix() = default;
    explicit CensoredDistanceMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    double& at(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    bool censored(std::size_t i, std::size_t j) const { return at(i, j) == kInfSentinel; }

private:
    std::size_t n_ = 0;
    Vec data_;
};

// Euclidean feature distance where the Euclidean (row, col) distance is below eta,
// kInfSentinel elsewhere.
CensoredDistanceMatrix censored_distance(std::span<const Vec> features, std::span<const Coord> coords, double eta);
CensoredDistanceMatrix censored_distance(const FeatureMap& fmap, std::span<const std::size_t> pixels, double eta);

struct AgglomerateResult {
    std::vector<int> assignment;       // per point, 0..clusters-1 ordered by lowest member index
    std::size_t clusters_at_stop = 0;  // active clusters when merging stopped
    bool fallback_applied = false;
};

// Average-linkage agglomerative clustering with sentinels read as +inf: linkages are
// ordered by the censored share of cross pairs, then by the finite distance sum divided
// by the cross-pair count. A merge with no finite cross pair is forbidden. If merging stalls
// above num_clusters, the num_clusters largest clusters are kept and every other
// cluster joins the kept cluster with the nearest spatial centroid.
AgglomerateResult agglomerate(const CensoredDistanceMatrix& dist, std::size_t num_clusters,
                              std::span<const Coord> coords);

// assignment is aligned with split.foreground(). Channels 0..parts-2 hold the clusters
// sorted by ascending mean row (topmost first); channel parts-1 is the background.
PartMask build_masks(const ForegroundSplit& split, std::span<const int> assignment, std::size_t parts);

// Full per-sample cascade: split, censor, cluster, build.
PartMask cascaded_clustering(const FeatureMap& fmap, std::size_t parts, double eta);

// Default spatial threshold: 0.35 × image diagonal.
double default_eta(std::size_t height, std::size_t width);

// gamma·prev + (1-gamma)·current.
PartMask smooth_masks(const PartMask& prev, const PartMask& current, double gamma);

struct MaskLoss {
    double loss = 0.0;
    Tensor grad;  // dLoss/dP
};

// -Σ M̃ log P, averaged over pixels.
MaskLoss parsing_loss(const PartMask& smoothed, const PartMask& predicted);
// 2/(l(l-1)) Σ_{i<j} Σ_pixels P_i P_j.
MaskLoss diversity_loss(const PartMask& predicted);
MaskLoss scc_loss(const PartMask& smoothed, const PartMask& predicted);

}  // namespace scwm
