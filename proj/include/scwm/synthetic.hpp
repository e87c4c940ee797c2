#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "scwm/tensor.hpp"

namespace scwm {

// Toy pedestrians: each identity owns one signature per body part. Parts occupy
// vertically stacked bands inside a fixed column range; the whole body shifts
// vertically by a per-sample offset. Signatures are a part prototype shared by all
// identities plus an identity-specific deviation.
struct SyntheticConfig {
    std::size_t identities = 8;
    std::size_t samples_per_identity = 12;
    std::size_t input_channels = 8;
    std::size_t height = 24;
    std::size_t width = 12;
    std::size_t parts = 3;  // foreground parts; the mask adds a background channel
    std::size_t cameras = 3;
    int max_offset = 3;
    double part_norm = 1.0;
    double identity_norm = 0.8;
    double camera_noise = 0.25;      // norm of the per-camera additive bias
    double pixel_noise = 0.08;       // per-channel std of foreground noise
    double background_noise = 0.05;  // per-channel std of background pixels
    double salient_gain = 2.5;       // multiplier on the salient patch
    double salient_fraction = 0.5;   // share of identities carrying a salient patch
};

struct SyntheticSample {
    Tensor input;       // C_in×H×W
    int identity = 0;
    PartMask gt_mask;   // (parts+1)×H×W one-hot, last channel background
    int camera = 0;
    int offset = 0;
};

struct Dataset {
    SyntheticConfig config;
    std::vector<SyntheticSample> samples;
    std::vector<std::vector<Vec>> signatures;  // [identity][part] noiseless pixel value
};

Dataset synth_generate(const SyntheticConfig& config, std::uint64_t seed);

// Row range [begin, end) of a foreground part at zero offset.
std::pair<int, int> part_rows(const SyntheticConfig& config, std::size_t part);
std::pair<std::size_t, std::size_t> body_columns(const SyntheticConfig& config);

}  // namespace scwm
