#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "scwm/tensor.hpp"

namespace scwm {

// softmax(weight·f + bias) classifier over the current pseudo classes.
struct LinearHead {
    Tensor weight;  // N_C×D
    Vec bias;       // N_C

    std::size_t classes() const { return bias.size(); }
    std::size_t dim() const { return weight.rank() == 2 ? weight.dim(1) : 0; }

    static LinearHead zeros(std::size_t classes, std::size_t dim);
    // Rows set to scale·centroid, zero bias.
    static LinearHead from_centroids(std::span<const Vec> centroids, double scale);
};

struct HeadOutput {
    Vec logits;
    Vec probs;
};

struct HeadGrads {
    Tensor weight;
    Vec bias;
    Vec input;
};

HeadOutput head_forward(const LinearHead& head, std::span<const double> feature);
// Gradients given dLoss/dlogits.
HeadGrads head_backward(const LinearHead& head, std::span<const double> feature, std::span<const double> dlogits);

Vec one_hot(std::size_t label, std::size_t classes);

// alpha·y + (1-alpha)·uniform.
Vec refine_part_label(std::span<const double> label, double alpha);

// softmax over the part difficulty scores.
Vec part_agreement_weights(std::span<const double> alpha_p);

// beta·y + (1-beta)·Σ_k w_k q_k. The part predictions enter as constants.
Vec distill_global_label(std::span<const double> label, double beta, std::span<const double> part_weights,
                         std::span<const Vec> part_probs);

struct IdLoss {
    double loss = 0.0;
    Vec global;              // dLoss/dlogits of the global head
    std::vector<Vec> parts;  // dLoss/dlogits per part head, empty for skipped parts
};

// -y^g·log q^g + mean_k(-y^{p_k}·log q^{p_k}). Empty part entries are skipped.
IdLoss id_loss(std::span<const double> q_global, std::span<const Vec> q_parts, std::span<const double> y_global,
               std::span<const Vec> y_parts);

struct LossTerms {
    double scc = 0.0;
    double wm = 0.0;
    double id = 0.0;

    double total() const { return scc + wm + id; }
};

}  // namespace scwm
