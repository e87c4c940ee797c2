#pragma once

#include <random>
#include <span>

#include "scwm/tensor.hpp"

namespace scwm {

// Channel-wise mean over all spatial positions of a C×H×W map.
Vec gap(const FeatureMap& fmap);

// Channel-wise mean of mask[h,w]·F[c,h,w], divided by H·W (not by the mask mass),
// so masked_gap(F, ones) == gap(F).
Vec masked_gap(const FeatureMap& fmap, std::span<const double> mask);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
bool is_zero(std::span<const double> v);

// Throws std::domain_error for a zero vector.
Vec l2_normalize(std::span<const double> v);

// Gradient of l2_normalize at v, applied to an upstream gradient wrt the normalized output.
Vec l2_normalize_backward(std::span<const double> v, std::span<const double> upstream);

// In-place softmax of a logit vector.
void softmax_inplace(std::span<double> logits);
Vec softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);

// 3×3 convolution (zero padding 1) followed by a per-pixel softmax over l output channels.
struct PartClassifierParams {
    Tensor kernel;  // l×C×3×3
    Vec bias;       // l

    std::size_t parts() const { return bias.size(); }
    std::size_t channels() const { return kernel.rank() == 4 ? kernel.dim(1) : 0; }

    static PartClassifierParams zeros(std::size_t parts, std::size_t channels);
    static PartClassifierParams random(std::size_t parts, std::size_t channels, double scale,
                                       std::mt19937_64& rng);
};

struct PartClassifierGrads {
    Tensor kernel;
    Vec bias;
    FeatureMap input;
};

// Raw convolution output (l×H×W), before the softmax.
Tensor part_classifier_logits(const PartClassifierParams& params, const FeatureMap& fmap);
PartMask part_classifier_forward(const PartClassifierParams& params, const FeatureMap& fmap);

// Exact gradients given dLoss/dP for the softmax output P.
PartClassifierGrads part_classifier_backward(const PartClassifierParams& params, const FeatureMap& fmap,
                                             const Tensor& upstream);

}  // namespace scwm
