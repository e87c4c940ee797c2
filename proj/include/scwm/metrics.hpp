#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "scwm/tensor.hpp"

namespace scwm {

// Outliers (-1) become singleton clusters with fresh ids.
std::vector<int> expand_outliers(std::span<const int> labels);

// Normalized mutual information, arithmetic-mean normalisation. Two single-cluster
// labelings score 1.
double nmi(std::span<const int> predicted, std::span<const int> truth);

// F-score over same-cluster sample pairs.
double pairwise_f(std::span<const int> predicted, std::span<const int> truth);

// Average precision of one ranked list of relevance flags (0/1).
double average_precision(std::span<const char> relevant_in_rank_order);

struct RetrievalScores {
    double map = 0.0;
    double rank1 = 0.0;
};

// Cosine retrieval of every query against the gallery.
RetrievalScores retrieval(std::span<const Vec> queries, std::span<const int> query_ids, std::span<const Vec> gallery,
                          std::span<const int> gallery_ids);

// One-hot of the per-pixel argmax (ties to the lower channel).
PartMask argmax_mask(const PartMask& probs);

// parts-1 equal-height horizontal bands; background channel left empty.
PartMask stripe_masks(std::size_t parts, std::size_t height, std::size_t width);

struct MaskIou {
    double mean_iou = 0.0;
    std::vector<std::size_t> permutation;  // predicted channel assigned to each truth channel
};

// Dataset-level IoU per channel (intersections and unions summed over samples) under the
// channel permutation maximising the mean, found by enumerating all l! permutations.
MaskIou best_permutation_iou(std::span<const PartMask> predicted, std::span<const PartMask> truth);

}  // namespace scwm
