#include "scwm/classification.hpp"

#include <cmath>
#include <stdexcept>

#include "scwm/numerics.hpp"

namespace scwm {

LinearHead LinearHead::zeros(std::size_t classes, std::size_t dim) {
    return {Tensor({classes, dim}), Vec(classes, 0.0)};
}

LinearHead LinearHead::from_centroids(std::span<const Vec> centroids, double scale) {
    if (centroids.empty()) throw std::invalid_argument("LinearHead: no centroids");
    auto head = zeros(centroids.size(), centroids.front().size());
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        if (centroids[c].size() != head.dim()) throw std::invalid_argument("LinearHead: ragged centroids");
        for (std::size_t d = 0; d < head.dim(); ++d) head.weight.at(c, d) = scale * centroids[c][d];
    }
    return head;
}

HeadOutput head_forward(const LinearHead& head, std::span<const double> feature) {
    if (feature.size() != head.dim()) throw std::invalid_argument("head_forward: dimension mismatch");
    HeadOutput out;
    out.logits.resize(head.classes());
    for (std::size_t c = 0; c < head.classes(); ++c) out.logits[c] = head.bias[c] + dot(head.weight.slice(c), feature);
    out.probs = softmax(out.logits);
    return out;
}

HeadGrads head_backward(const LinearHead& head, std::span<const double> feature, std::span<const double> dlogits) {
    if (feature.size() != head.dim() || dlogits.size() != head.classes())
        throw std::invalid_argument("head_backward: dimension mismatch");
    HeadGrads grads{Tensor(head.weight.dims()), Vec(dlogits.begin(), dlogits.end()), Vec(head.dim(), 0.0)};
    for (std::size_t c = 0; c < head.classes(); ++c) {
        for (std::size_t d = 0; d < head.dim(); ++d) {
            grads.weight.at(c, d) = dlogits[c] * feature[d];
            grads.input[d] += dlogits[c] * head.weight.at(c, d);
        }
    }
    return grads;
}

Vec one_hot(std::size_t label, std::size_t classes) {
    if (label >= classes) throw std::out_of_range("one_hot: label out of range");
    Vec y(classes, 0.0);
    y[label] = 1.0;
    return y;
}

Vec refine_part_label(std::span<const double> label, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("refine_part_label: alpha outside [0,1]");
    if (label.empty()) throw std::invalid_argument("refine_part_label: empty label");
    const double uniform = 1.0 / static_cast<double>(label.size());
    Vec out(label.size());
    for (std::size_t i = 0; i < label.size(); ++i) out[i] = alpha * label[i] + (1.0 - alpha) * uniform;
    return out;
}

Vec part_agreement_weights(std::span<const double> alpha_p) {
    if (alpha_p.empty()) throw std::invalid_argument("part_agreement_weights: no parts");
    return softmax(alpha_p);
}

Vec distill_global_label(std::span<const double> label, double beta, std::span<const double> part_weights,
                         std::span<const Vec> part_probs) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("distill_global_label: beta outside [0,1]");
    if (part_weights.size() != part_probs.size()) throw std::invalid_argument("distill_global_label: part mismatch");
    Vec out(label.size());
    for (std::size_t i = 0; i < label.size(); ++i) out[i] = beta * label[i];
    for (std::size_t k = 0; k < part_probs.size(); ++k) {
        if (part_probs[k].size() != label.size()) throw std::invalid_argument("distill_global_label: class mismatch");
        for (std::size_t i = 0; i < label.size(); ++i) out[i] += (1.0 - beta) * part_weights[k] * part_probs[k][i];
    }
    return out;
}

namespace {

double cross_entropy(std::span<const double> q, std::span<const double> y, Vec& dlogits, double scale) {
    if (q.size() != y.size()) throw std::invalid_argument("id_loss: class mismatch");
    double loss = 0.0;
    dlogits.assign(q.size(), 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!(q[i] > 0.0)) throw std::domain_error("id_loss: zero predicted probability");
        loss -= y[i] * std::log(q[i]);
    }
    // Softmax cross-entropy: dL/dz = q·Σy - y, with Σy = 1 for a distribution label.
    double ysum = 0.0;
    for (double v : y) ysum += v;
    for (std::size_t i = 0; i < q.size(); ++i) dlogits[i] = scale * (q[i] * ysum - y[i]);
    return scale * loss;
}

}  // namespace

IdLoss id_loss(std::span<const double> q_global, std::span<const Vec> q_parts, std::span<const double> y_global,
               std::span<const Vec> y_parts) {
    if (q_parts.size() != y_parts.size()) throw std::invalid_argument("id_loss: part count mismatch");
    IdLoss out;
    out.loss = cross_entropy(q_global, y_global, out.global, 1.0);
    std::size_t valid = 0;
    for (const auto& q : q_parts) valid += q.empty() ? 0 : 1;
    out.parts.assign(q_parts.size(), Vec{});
    for (std::size_t k = 0; k < q_parts.size(); ++k) {
        if (q_parts[k].empty()) continue;
        out.loss += cross_entropy(q_parts[k], y_parts[k], out.parts[k], 1.0 / static_cast<double>(valid));
    }
    return out;
}

}  // namespace scwm
