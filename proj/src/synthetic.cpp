#include "scwm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace scwm {

namespace {

Vec random_direction(std::size_t dim, double norm, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec v(dim);
    double s = 0.0;
    for (auto& x : v) {
        x = normal(rng);
        s += x * x;
    }
    s = std::sqrt(s);
    for (auto& x : v) x = s > 0.0 ? norm * x / s : 0.0;
    return v;
}

void validate(const SyntheticConfig& c) {
    if (c.identities < 2) throw std::invalid_argument("synthetic: need at least two identities");
    if (c.samples_per_identity < 2) throw std::invalid_argument("synthetic: need at least two samples per identity");
    if (c.parts < 1 || c.input_channels < 1 || c.cameras < 1)
        throw std::invalid_argument("synthetic: parts, channels and cameras must be positive");
    if (c.max_offset < 0) throw std::invalid_argument("synthetic: negative offset range");
    if (c.height < 2 * c.parts + 2 || c.width < 4) throw std::invalid_argument("synthetic: grid too small");
    if (c.salient_fraction < 0.0 || c.salient_fraction > 1.0)
        throw std::invalid_argument("synthetic: salient_fraction outside [0,1]");
}

}  // namespace

std::pair<std::size_t, std::size_t> body_columns(const SyntheticConfig& config) {
    return {config.width / 4, config.width - config.width / 4};
}

std::pair<int, int> part_rows(const SyntheticConfig& config, std::size_t part) {
    const double top = static_cast<double>(config.height / 8);
    const double bottom = static_cast<double>(config.height - config.height / 8);
    // The head band is shorter than the others.
    Vec weights(config.parts, 1.0);
    if (config.parts >= 2) weights[0] = 0.6;
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double before = 0.0;
    for (std::size_t k = 0; k < part; ++k) before += weights[k];
    const auto begin = static_cast<int>(std::lround(top + (bottom - top) * before / total));
    const auto end = static_cast<int>(std::lround(top + (bottom - top) * (before + weights[part]) / total));
    return {begin, end};
}

Dataset synth_generate(const SyntheticConfig& config, std::uint64_t seed) {
    validate(config);
    std::mt19937_64 rng(seed);
    const std::size_t cin = config.input_channels;
    const std::size_t height = config.height;
    const std::size_t width = config.width;
    const std::size_t pixels = height * width;

    Dataset data;
    data.config = config;

    std::vector<Vec> prototypes;
    for (std::size_t k = 0; k < config.parts; ++k) prototypes.push_back(random_direction(cin, config.part_norm, rng));
    data.signatures.resize(config.identities);
    for (auto& sig : data.signatures) {
        for (std::size_t k = 0; k < config.parts; ++k) {
            Vec v = random_direction(cin, config.identity_norm, rng);
            for (std::size_t c = 0; c < cin; ++c) v[c] += prototypes[k][c];
            sig.push_back(std::move(v));
        }
    }
    std::vector<Vec> camera_bias;
    for (std::size_t c = 0; c < config.cameras; ++c) camera_bias.push_back(random_direction(cin, config.camera_noise, rng));

    std::vector<std::size_t> order(config.identities);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> salient(config.identities, 0);
    const auto n_salient = static_cast<std::size_t>(std::floor(config.salient_fraction * static_cast<double>(config.identities)));
    for (std::size_t i = 0; i < n_salient; ++i) salient[order[i]] = 1;

    const auto [col_begin, col_end] = body_columns(config);
    const std::size_t torso = config.parts / 2;
    std::uniform_int_distribution<int> offset_dist(-config.max_offset, config.max_offset);
    std::normal_distribution<double> pixel_noise(0.0, 1.0);

    for (std::size_t id = 0; id < config.identities; ++id) {
        for (std::size_t s = 0; s < config.samples_per_identity; ++s) {
            SyntheticSample sample;
            sample.identity = static_cast<int>(id);
            sample.camera = static_cast<int>(s % config.cameras);
            sample.offset = offset_dist(rng);
            sample.input = Tensor({cin, height, width});
            sample.gt_mask = Tensor({config.parts + 1, height, width});

            std::vector<int> part_of(pixels, -1);
            for (std::size_t k = 0; k < config.parts; ++k) {
                const auto [r0, r1] = part_rows(config, k);
                for (int r = r0 + sample.offset; r < r1 + sample.offset; ++r) {
                    if (r < 0 || r >= static_cast<int>(height)) continue;
                    for (std::size_t c = col_begin; c < col_end; ++c)
                        part_of[static_cast<std::size_t>(r) * width + c] = static_cast<int>(k);
                }
            }
            // 2×2 salient patch centred in the torso band.
            std::vector<char> hot(pixels, 0);
            if (salient[id]) {
                const auto [r0, r1] = part_rows(config, torso);
                const int rc = (r0 + r1) / 2 + sample.offset;
                const auto cc = static_cast<int>((col_begin + col_end) / 2);
                for (int r = rc - 1; r <= rc; ++r)
                    for (int c = cc - 1; c <= cc; ++c)
                        if (r >= 0 && r < static_cast<int>(height) &&
                            part_of[static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)] >= 0)
                            hot[static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)] = 1;
            }

            for (std::size_t p = 0; p < pixels; ++p) {
                const int k = part_of[p];
                if (k < 0) {
                    sample.gt_mask[config.parts * pixels + p] = 1.0;
                    for (std::size_t c = 0; c < cin; ++c)
                        sample.input[c * pixels + p] = config.background_noise * pixel_noise(rng);
                    continue;
                }
                sample.gt_mask[static_cast<std::size_t>(k) * pixels + p] = 1.0;
                const Vec& sig = data.signatures[id][static_cast<std::size_t>(k)];
                const double gain = hot[p] ? config.salient_gain : 1.0;
                for (std::size_t c = 0; c < cin; ++c) {
                    double v = gain * sig[c] + camera_bias[static_cast<std::size_t>(sample.camera)][c];
                    v += config.pixel_noise * pixel_noise(rng);
                    sample.input[c * pixels + p] = v;
                }
            }
            data.samples.push_back(std::move(sample));
        }
    }
    return data;
}

}  // namespace scwm
