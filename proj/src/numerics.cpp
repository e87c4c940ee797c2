#include "scwm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace scwm {

namespace {

void require_map(const FeatureMap& fmap, const char* who) {
    if (fmap.rank() != 3) throw std::invalid_argument(std::string(who) + ": expected a C×H×W map");
    if (fmap.dim(1) == 0 || fmap.dim(2) == 0) throw std::invalid_argument(std::string(who) + ": empty map");
}

}  // namespace

Vec gap(const FeatureMap& fmap) {
    require_map(fmap, "gap");
    const std::size_t channels = fmap.dim(0);
    const std::size_t pixels = fmap.dim(1) * fmap.dim(2);
    Vec out(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (double v : fmap.slice(c)) sum += v;
        out[c] = sum / static_cast<double>(pixels);
    }
    return out;
}

Vec masked_gap(const FeatureMap& fmap, std::span<const double> mask) {
    require_map(fmap, "masked_gap");
    const std::size_t channels = fmap.dim(0);
    const std::size_t pixels = fmap.dim(1) * fmap.dim(2);
    if (mask.size() != pixels) throw std::invalid_argument("masked_gap: mask does not match spatial dims");
    Vec out(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        const auto chan = fmap.slice(c);
        double sum = 0.0;
        for (std::size_t p = 0; p < pixels; ++p) sum += mask[p] * chan[p];
        out[c] = sum / static_cast<double>(pixels);
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool is_zero(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

Vec l2_normalize(std::span<const double> v) {
    const double n = l2_norm(v);
    if (!(n > 0.0)) throw std::domain_error("l2_normalize: zero vector");
    Vec out(v.begin(), v.end());
    for (auto& x : out) x /= n;
    return out;
}

Vec l2_normalize_backward(std::span<const double> v, std::span<const double> upstream) {
    // d(v/|v|) = (I - u uᵀ) / |v|
    const double n = l2_norm(v);
    if (!(n > 0.0)) throw std::domain_error("l2_normalize_backward: zero vector");
    const Vec u = l2_normalize(v);
    const double proj = dot(u, upstream);
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (upstream[i] - proj * u[i]) / n;
    return out;
}

void softmax_inplace(std::span<double> logits) {
    if (logits.empty()) return;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (auto& z : logits) {
        z = std::exp(z - mx);
        sum += z;
    }
    for (auto& z : logits) z /= sum;
}

Vec softmax(std::span<const double> logits) {
    Vec out(logits.begin(), logits.end());
    softmax_inplace(out);
    return out;
}

double log_sum_exp(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - mx);
    return mx + std::log(sum);
}

PartClassifierParams PartClassifierParams::zeros(std::size_t parts, std::size_t channels) {
    if (parts < 2) throw std::invalid_argument("part classifier needs at least two parts");
    return {Tensor({parts, channels, 3, 3}), Vec(parts, 0.0)};
}

PartClassifierParams PartClassifierParams::random(std::size_t parts, std::size_t channels, double scale,
                                                  std::mt19937_64& rng) {
    auto params = zeros(parts, channels);
    std::normal_distribution<double> normal(0.0, scale);
    for (auto& w : params.kernel.raw()) w = normal(rng);
    return params;
}

Tensor part_classifier_logits(const PartClassifierParams& params, const FeatureMap& fmap) {
    require_map(fmap, "part_classifier");
    const std::size_t parts = params.parts();
    const std::size_t channels = fmap.dim(0);
    const std::size_t height = fmap.dim(1);
    const std::size_t width = fmap.dim(2);
    if (params.kernel.rank() != 4 || params.kernel.dim(0) != parts || params.kernel.dim(2) != 3 ||
        params.kernel.dim(3) != 3)
        throw std::invalid_argument("part_classifier: kernel must be l×C×3×3");
    if (params.channels() != channels) throw std::invalid_argument("part_classifier: channel mismatch");

    Tensor logits({parts, height, width});
    for (std::size_t k = 0; k < parts; ++k) {
        for (std::size_t h = 0; h < height; ++h) {
            for (std::size_t w = 0; w < width; ++w) {
                double z = params.bias[k];
                for (std::size_t c = 0; c < channels; ++c) {
                    for (std::size_t a = 0; a < 3; ++a) {
                        const auto y = static_cast<std::ptrdiff_t>(h + a) - 1;
                        if (y < 0 || y >= static_cast<std::ptrdiff_t>(height)) continue;
                        for (std::size_t b = 0; b < 3; ++b) {
                            const auto x = static_cast<std::ptrdiff_t>(w + b) - 1;
                            if (x < 0 || x >= static_cast<std::ptrdiff_t>(width)) continue;
                            z += params.kernel.at(k, c, a, b) * fmap.at(c, static_cast<std::size_t>(y),
                                                                         static_cast<std::size_t>(x));
                        }
                    }
                }
                logits.at(k, h, w) = z;
            }
        }
    }
    return logits;
}

PartMask part_classifier_forward(const PartClassifierParams& params, const FeatureMap& fmap) {
    Tensor probs = part_classifier_logits(params, fmap);
    const std::size_t parts = probs.dim(0);
    const std::size_t pixels = probs.dim(1) * probs.dim(2);
    Vec column(parts);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t k = 0; k < parts; ++k) column[k] = probs[k * pixels + p];
        softmax_inplace(column);
        for (std::size_t k = 0; k < parts; ++k) probs[k * pixels + p] = column[k];
    }
    return probs;
}

PartClassifierGrads part_classifier_backward(const PartClassifierParams& params, const FeatureMap& fmap,
                                             const Tensor& upstream) {
    const PartMask probs = part_classifier_forward(params, fmap);
    if (!upstream.same_shape(probs)) throw std::invalid_argument("part_classifier_backward: upstream shape mismatch");
    const std::size_t parts = probs.dim(0);
    const std::size_t channels = fmap.dim(0);
    const std::size_t height = fmap.dim(1);
    const std::size_t width = fmap.dim(2);
    const std::size_t pixels = height * width;

    // Softmax backward: dz_k = p_k (g_k - Σ_j p_j g_j).
    Tensor dlogits({parts, height, width});
    for (std::size_t p = 0; p < pixels; ++p) {
        double inner = 0.0;
        for (std::size_t k = 0; k < parts; ++k) inner += probs[k * pixels + p] * upstream[k * pixels + p];
        for (std::size_t k = 0; k < parts; ++k)
            dlogits[k * pixels + p] = probs[k * pixels + p] * (upstream[k * pixels + p] - inner);
    }

    PartClassifierGrads grads{Tensor(params.kernel.dims()), Vec(parts, 0.0), Tensor(fmap.dims())};
    for (std::size_t k = 0; k < parts; ++k) {
        for (std::size_t h = 0; h < height; ++h) {
            for (std::size_t w = 0; w < width; ++w) {
                const double g = dlogits.at(k, h, w);
                if (g == 0.0) continue;
                grads.bias[k] += g;
                for (std::size_t a = 0; a < 3; ++a) {
                    const auto y = static_cast<std::ptrdiff_t>(h + a) - 1;
                    if (y < 0 || y >= static_cast<std::ptrdiff_t>(height)) continue;
                    for (std::size_t b = 0; b < 3; ++b) {
                        const auto x = static_cast<std::ptrdiff_t>(w + b) - 1;
                        if (x < 0 || x >= static_cast<std::ptrdiff_t>(width)) continue;
                        const auto yy = static_cast<std::size_t>(y);
                        const auto xx = static_cast<std::size_t>(x);
                        for (std::size_t c = 0; c < channels; ++c) {
                            grads.kernel.at(k, c, a, b) += g * fmap.at(c, yy, xx);
                            grads.input.at(c, yy, xx) += g * params.kernel.at(k, c, a, b);
                        }
                    }
                }
            }
        }
    }
    return grads;
}

}  // namespace scwm
