#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "scwm/classification.hpp"
#include "scwm/memory_bank.hpp"
#include "scwm/numerics.hpp"
#include "scwm/tensor.hpp"
#include "scwm/weighted_memory.hpp"

namespace scwm {

// Per-pixel affine map C_in → C shared across pixels; stands in for the backbone.
struct ExtractorParams {
    Tensor weight;  // C×C_in
    Vec bias;       // C

    std::size_t out_channels() const { return bias.size(); }
    std::size_t in_channels() const { return weight.rank() == 2 ? weight.dim(1) : 0; }

    static ExtractorParams zeros(std::size_t out_channels, std::size_t in_channels);
    static ExtractorParams random(std::size_t out_channels, std::size_t in_channels, std::mt19937_64& rng);
};

struct ExtractorGrads {
    Tensor weight;
    Vec bias;
    Tensor input;
};

FeatureMap extractor_forward(const ExtractorParams& params, const Tensor& input);
ExtractorGrads extractor_backward(const ExtractorParams& params, const Tensor& input, const FeatureMap& upstream);

struct ModelParams {
    ExtractorParams extractor;
    PartClassifierParams classifier;

    static ModelParams initial(std::size_t input_channels, std::size_t feature_dim, std::size_t parts,
                               std::uint64_t seed, double classifier_scale = 0.05);
};

// Classifier heads over the current pseudo classes: one global, one per part.
struct Heads {
    LinearHead global;
    std::vector<LinearHead> parts;

    static Heads from_bank(const MemoryBank& bank, double scale);
};

struct SampleForward {
    FeatureMap fmap;
    PartMask probs;
    Vec raw_global;
    std::vector<Vec> raw_parts;
    SampleFeatures features;  // normalized; empty part vector where the pooled feature is zero
};

SampleForward forward_sample(const ModelParams& params, const Tensor& input);

// Term switches for ablations; all on reproduces the full objective.
struct LossSwitches {
    bool parsing = true;
    bool diversity = true;
    bool wnce = true;
    bool sep = true;
    bool id = true;
};

struct TrainTarget {
    std::size_t label = 0;
    const PartMask* smoothed = nullptr;  // pseudo parsing masks
    DifficultyScores scores;
    double weight_global = 1.0;
    Vec weight_parts;
};

struct ModelGrads {
    ModelParams params;
    Heads heads;

    static ModelGrads zeros_like(const ModelParams& params, const Heads& heads);
};

struct LossReport {
    LossTerms terms;
    std::size_t zero_weight_terms = 0;  // ω = 0 terms evaluated with ω = 1 (gradient unchanged)
    std::size_t skipped_parts = 0;
};

// Loss of one sample; gradients scaled by grad_scale are added into grads when non-null.
LossReport sample_loss(const ModelParams& params, const Heads& heads, const MemoryBank& bank, const Tensor& input,
                       const TrainTarget& target, double beta, const LossSwitches& switches, ModelGrads* grads,
                       double grad_scale = 1.0, SampleForward* forward = nullptr);

// Mean loss over a batch with mean gradients.
LossReport batch_loss(const ModelParams& params, const Heads& heads, const MemoryBank& bank,
                      std::span<const Tensor* const> inputs, std::span<const TrainTarget> targets, double beta,
                      const LossSwitches& switches, ModelGrads* grads, std::vector<SampleForward>* forwards = nullptr);

// params -= lr·grads (and heads).
void sgd_step(ModelParams& params, Heads& heads, const ModelGrads& grads, double learning_rate);

}  // namespace scwm
