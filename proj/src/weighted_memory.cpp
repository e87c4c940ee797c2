#include "scwm/weighted_memory.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <stdexcept>

#include "scwm/numerics.hpp"

namespace scwm {

const char* to_string(UpdateStrategy strategy) {
    switch (strategy) {
        case UpdateStrategy::kAverage: return "average";
        case UpdateStrategy::kHardest: return "hardest";
        case UpdateStrategy::kWeighted: return "weighted";
    }
    return "unknown";
}

UpdateStrategy parse_update_strategy(const std::string& name) {
    if (name == "average") return UpdateStrategy::kAverage;
    if (name == "hardest") return UpdateStrategy::kHardest;
    if (name == "weighted") return UpdateStrategy::kWeighted;
    throw std::invalid_argument("unknown update strategy '" + name + "'");
}

namespace {

double set_iou(std::span<const int> a, std::span<const int> b) {
    std::vector<int> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
    sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
    std::vector<int> inter;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
    const std::size_t uni = sa.size() + sb.size() - inter.size();
    return static_cast<double>(inter.size()) / static_cast<double>(uni);
}

}  // namespace

DifficultyScores difficulty(std::span<const int> knn_global, std::span<const std::vector<int>> knn_parts) {
    const std::vector<char> valid(knn_parts.size(), 1);
    return difficulty(knn_global, knn_parts, valid);
}

DifficultyScores difficulty(std::span<const int> knn_global, std::span<const std::vector<int>> knn_parts,
                            std::span<const char> part_valid) {
    if (part_valid.size() != knn_parts.size()) throw std::invalid_argument("difficulty: validity mask mismatch");
    if (knn_global.empty()) throw std::invalid_argument("difficulty: empty global neighbour set");
    DifficultyScores out;
    out.alpha_p.assign(knn_parts.size(), 0.0);
    out.part_valid.assign(part_valid.begin(), part_valid.end());
    std::size_t used = 0;
    double total = 0.0;
    for (std::size_t k = 0; k < knn_parts.size(); ++k) {
        if (!part_valid[k]) continue;
        if (knn_parts[k].empty()) throw std::invalid_argument("difficulty: empty part neighbour set");
        if (knn_parts[k].size() != knn_global.size())
            throw std::invalid_argument("difficulty: neighbour lists differ in length");
        out.alpha_p[k] = set_iou(knn_global, knn_parts[k]);
        total += out.alpha_p[k];
        ++used;
    }
    if (used == 0) throw std::invalid_argument("difficulty: no valid parts");
    out.alpha_g = total / static_cast<double>(used);
    return out;
}

BatchWeights batch_weights(std::span<const DifficultyScores> scores) {
    const std::size_t batch = scores.size();
    if (batch == 0) throw std::invalid_argument("batch_weights: empty batch");
    const std::size_t parts = scores.front().alpha_p.size();

    BatchWeights out;
    out.global.assign(batch, 0.0);
    out.parts.assign(batch, Vec(parts, 0.0));

    double denom = 0.0;
    for (const auto& s : scores) denom += 1.0 - s.alpha_g;
    for (std::size_t i = 0; i < batch; ++i)
        out.global[i] = denom > 0.0 ? (1.0 - scores[i].alpha_g) / denom : 1.0 / static_cast<double>(batch);
    if (!(denom > 0.0)) out.degenerate = true;

    for (std::size_t k = 0; k < parts; ++k) {
        double part_denom = 0.0;
        std::size_t valid = 0;
        for (const auto& s : scores) {
            if (s.alpha_p.size() != parts) throw std::invalid_argument("batch_weights: inconsistent part count");
            if (!s.part_valid.empty() && !s.part_valid[k]) continue;
            part_denom += s.alpha_p[k];
            ++valid;
        }
        if (valid == 0) continue;
        if (!(part_denom > 0.0)) out.degenerate = true;
        for (std::size_t i = 0; i < batch; ++i) {
            if (!scores[i].part_valid.empty() && !scores[i].part_valid[k]) continue;
            out.parts[i][k] =
                part_denom > 0.0 ? scores[i].alpha_p[k] / part_denom : 1.0 / static_cast<double>(valid);
        }
    }
    if (out.degenerate) std::clog << "warning: degenerate batch difficulty, using uniform weights\n";
    return out;
}

BatchWeights uniform_weights(std::span<const SampleFeatures> batch) {
    if (batch.empty()) throw std::invalid_argument("uniform_weights: empty batch");
    const std::size_t parts = batch.front().parts.size();
    BatchWeights out;
    out.global.assign(batch.size(), 1.0 / static_cast<double>(batch.size()));
    out.parts.assign(batch.size(), Vec(parts, 0.0));
    for (std::size_t k = 0; k < parts; ++k) {
        std::size_t valid = 0;
        for (const auto& s : batch) valid += s.parts[k].empty() ? 0 : 1;
        for (std::size_t i = 0; i < batch.size(); ++i)
            if (!batch[i].parts[k].empty()) out.parts[i][k] = 1.0 / static_cast<double>(valid);
    }
    return out;
}

BatchWeights strategy_weights(UpdateStrategy strategy, std::span<const int> labels,
                              std::span<const SampleFeatures> batch, std::span<const DifficultyScores> scores,
                              const MemoryBank& bank) {
    switch (strategy) {
        case UpdateStrategy::kAverage: return uniform_weights(batch);
        case UpdateStrategy::kWeighted:
            if (scores.size() != batch.size()) throw std::invalid_argument("strategy_weights: missing scores");
            return batch_weights(scores);
        case UpdateStrategy::kHardest: break;
    }

    if (labels.size() != batch.size()) throw std::invalid_argument("strategy_weights: label count mismatch");
    const std::size_t parts = bank.parts();
    BatchWeights out;
    out.global.assign(batch.size(), 0.0);
    out.parts.assign(batch.size(), Vec(parts, 0.0));
    for (std::size_t s = 0; s < bank.spaces(); ++s) {
        // cluster -> (lowest similarity, sample)
        std::map<int, std::pair<double, std::size_t>> hardest;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const Vec& f = s == 0 ? batch[i].global : batch[i].parts[s - 1];
            if (f.empty()) continue;
            const auto label = static_cast<std::size_t>(labels[i]);
            if (labels[i] < 0 || label >= bank.clusters()) throw std::out_of_range("strategy_weights: unknown label");
            const double sim = dot(f, bank.centroids[s][label]);
            auto it = hardest.find(labels[i]);
            if (it == hardest.end() || sim < it->second.first) hardest[labels[i]] = {sim, i};
        }
        for (const auto& [label, pick] : hardest) {
            if (s == 0) out.global[pick.second] = 1.0;
            else out.parts[pick.second][s - 1] = 1.0;
        }
    }
    return out;
}

void memory_update(MemoryBank& bank, std::span<const int> labels, std::span<const SampleFeatures> batch,
                   const BatchWeights& weights) {
    if (labels.size() != batch.size() || weights.global.size() != batch.size() || weights.parts.size() != batch.size())
        throw std::invalid_argument("memory_update: batch size mismatch");
    const double m = bank.momentum;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= bank.clusters())
            throw std::out_of_range("memory_update: unknown label");
        const auto label = static_cast<std::size_t>(labels[i]);
        if (batch[i].parts.size() != bank.parts()) throw std::invalid_argument("memory_update: part count mismatch");
        for (std::size_t s = 0; s < bank.spaces(); ++s) {
            const Vec& f = s == 0 ? batch[i].global : batch[i].parts[s - 1];
            if (f.empty()) continue;
            const double w = s == 0 ? weights.global[i] : weights.parts[i][s - 1];
            Vec& c = bank.centroids[s][label];
            if (f.size() != c.size()) throw std::invalid_argument("memory_update: dimension mismatch");
            for (std::size_t d = 0; d < c.size(); ++d) c[d] = m * c[d] + (1.0 - m) * w * f[d];
            c = l2_normalize(c);
        }
    }
}

SpaceLoss cluster_nce(std::span<const double> feature, std::span<const Vec> centroids, std::size_t positive,
                      double temperature, double weight) {
    if (!(temperature > 0.0)) throw std::invalid_argument("cluster_nce: temperature must be positive");
    if (!(weight > 0.0)) throw std::domain_error("cluster_nce: weight must be positive");
    if (positive >= centroids.size()) throw std::out_of_range("cluster_nce: positive centroid missing");

    Vec logits(centroids.size());
    for (std::size_t j = 0; j < centroids.size(); ++j) logits[j] = dot(feature, centroids[j]) / temperature;
    SpaceLoss out;
    out.loss = log_sum_exp(logits) - logits[positive] - std::log(weight);
    const Vec probs = softmax(logits);
    out.grad.assign(feature.size(), 0.0);
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        const double coef = (probs[j] - (j == positive ? 1.0 : 0.0)) / temperature;
        for (std::size_t d = 0; d < feature.size(); ++d) out.grad[d] += coef * centroids[j][d];
    }
    return out;
}

FeatureLoss wnce_loss(const SampleFeatures& sample, std::size_t label, const MemoryBank& bank, double weight_global,
                      std::span<const double> weight_parts) {
    if (sample.parts.size() != bank.parts() || weight_parts.size() != bank.parts())
        throw std::invalid_argument("wnce_loss: part count mismatch");
    const double tau = bank.temperature;
    const auto global = cluster_nce(sample.global, bank.centroids[0], label, tau, weight_global);

    FeatureLoss out;
    out.loss = global.loss;
    out.global = global.grad;
    out.parts.assign(sample.parts.size(), Vec{});
    std::size_t valid = 0;
    for (const auto& p : sample.parts) valid += p.empty() ? 0 : 1;
    for (std::size_t k = 0; k < sample.parts.size(); ++k) {
        if (sample.parts[k].empty()) continue;
        auto part = cluster_nce(sample.parts[k], bank.centroids[k + 1], label, tau, weight_parts[k]);
        const double scale = 1.0 / static_cast<double>(valid);
        out.loss += scale * part.loss;
        for (auto& g : part.grad) g *= scale;
        out.parts[k] = std::move(part.grad);
    }
    return out;
}

FeatureLoss sep_loss(std::span<const Vec> parts, std::span<const Vec> own_centroids, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("sep_loss: temperature must be positive");
    if (parts.size() != own_centroids.size()) throw std::invalid_argument("sep_loss: part count mismatch");
    if (parts.empty()) throw std::invalid_argument("sep_loss: need at least one part");

    std::vector<std::size_t> valid;
    for (std::size_t k = 0; k < parts.size(); ++k)
        if (!parts[k].empty()) valid.push_back(k);
    std::vector<Vec> centroids;
    for (auto k : valid) centroids.push_back(own_centroids[k]);

    FeatureLoss out;
    out.parts.assign(parts.size(), Vec{});
    const double scale = valid.empty() ? 0.0 : 1.0 / static_cast<double>(valid.size());
    for (std::size_t r = 0; r < valid.size(); ++r) {
        auto term = cluster_nce(parts[valid[r]], centroids, r, temperature);
        out.loss += scale * term.loss;
        for (auto& g : term.grad) g *= scale;
        out.parts[valid[r]] = std::move(term.grad);
    }
    return out;
}

FeatureLoss wm_loss(const SampleFeatures& sample, std::size_t label, const MemoryBank& bank, double weight_global,
                    std::span<const double> weight_parts) {
    auto total = wnce_loss(sample, label, bank, weight_global, weight_parts);
    std::vector<Vec> own;
    for (std::size_t k = 0; k < bank.parts(); ++k) own.push_back(bank.centroids[k + 1].at(label));
    const auto sep = sep_loss(sample.parts, own, bank.temperature);
    total.loss += sep.loss;
    for (std::size_t k = 0; k < total.parts.size(); ++k)
        for (std::size_t d = 0; d < total.parts[k].size(); ++d) total.parts[k][d] += sep.parts[k][d];
    return total;
}

}  // namespace scwm
