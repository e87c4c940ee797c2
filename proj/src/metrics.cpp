#include "scwm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "scwm/numerics.hpp"

namespace scwm {

std::vector<int> expand_outliers(std::span<const int> labels) {
    int next = 0;
    for (int l : labels) next = std::max(next, l + 1);
    std::vector<int> out(labels.begin(), labels.end());
    for (auto& l : out)
        if (l < 0) l = next++;
    return out;
}

namespace {

double entropy(const std::map<int, std::size_t>& counts, double n) {
    double h = 0.0;
    for (const auto& [_, c] : counts) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

double nmi(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size() || predicted.empty()) throw std::invalid_argument("nmi: size mismatch");
    const double n = static_cast<double>(predicted.size());
    std::map<int, std::size_t> pa, pb;
    std::map<std::pair<int, int>, std::size_t> joint;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        ++pa[predicted[i]];
        ++pb[truth[i]];
        ++joint[{predicted[i], truth[i]}];
    }
    const double ha = entropy(pa, n);
    const double hb = entropy(pb, n);
    if (ha == 0.0 && hb == 0.0) return 1.0;
    double mi = 0.0;
    for (const auto& [key, c] : joint) {
        const double pij = static_cast<double>(c) / n;
        mi += pij * std::log(pij * n * n / (static_cast<double>(pa[key.first]) * static_cast<double>(pb[key.second])));
    }
    return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

double pairwise_f(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("pairwise_f: size mismatch");
    std::size_t both = 0, pred_pairs = 0, true_pairs = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        for (std::size_t j = i + 1; j < predicted.size(); ++j) {
            const bool p = predicted[i] == predicted[j];
            const bool t = truth[i] == truth[j];
            pred_pairs += p;
            true_pairs += t;
            both += p && t;
        }
    }
    if (pred_pairs == 0 && true_pairs == 0) return 1.0;
    if (both == 0) return 0.0;
    const double precision = static_cast<double>(both) / static_cast<double>(pred_pairs);
    const double recall = static_cast<double>(both) / static_cast<double>(true_pairs);
    return 2.0 * precision * recall / (precision + recall);
}

double average_precision(std::span<const char> relevant_in_rank_order) {
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t r = 0; r < relevant_in_rank_order.size(); ++r) {
        if (!relevant_in_rank_order[r]) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

RetrievalScores retrieval(std::span<const Vec> queries, std::span<const int> query_ids, std::span<const Vec> gallery,
                          std::span<const int> gallery_ids) {
    if (queries.size() != query_ids.size() || gallery.size() != gallery_ids.size())
        throw std::invalid_argument("retrieval: id count mismatch");
    RetrievalScores scores;
    std::size_t evaluated = 0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        std::vector<std::size_t> order(gallery.size());
        std::iota(order.begin(), order.end(), 0);
        Vec sim(gallery.size());
        for (std::size_t g = 0; g < gallery.size(); ++g) sim[g] = dot(queries[q], gallery[g]);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
        std::vector<char> relevant(order.size());
        bool any = false;
        for (std::size_t r = 0; r < order.size(); ++r) {
            relevant[r] = gallery_ids[order[r]] == query_ids[q];
            any = any || relevant[r];
        }
        if (!any) continue;
        ++evaluated;
        scores.map += average_precision(relevant);
        scores.rank1 += relevant.front() ? 1.0 : 0.0;
    }
    if (evaluated == 0) throw std::invalid_argument("retrieval: no query has a gallery match");
    scores.map /= static_cast<double>(evaluated);
    scores.rank1 /= static_cast<double>(evaluated);
    return scores;
}

PartMask argmax_mask(const PartMask& probs) {
    const std::size_t parts = probs.dim(0);
    const std::size_t pixels = probs.dim(1) * probs.dim(2);
    PartMask out(probs.dims());
    for (std::size_t p = 0; p < pixels; ++p) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < parts; ++k)
            if (probs[k * pixels + p] > probs[best * pixels + p]) best = k;
        out[best * pixels + p] = 1.0;
    }
    return out;
}

PartMask stripe_masks(std::size_t parts, std::size_t height, std::size_t width) {
    if (parts < 2) throw std::invalid_argument("stripe_masks: need at least two parts");
    const std::size_t bands = parts - 1;
    PartMask out({parts, height, width});
    for (std::size_t r = 0; r < height; ++r) {
        const std::size_t band = std::min(bands - 1, r * bands / height);
        for (std::size_t c = 0; c < width; ++c) out.at(band, r, c) = 1.0;
    }
    return out;
}

MaskIou best_permutation_iou(std::span<const PartMask> predicted, std::span<const PartMask> truth) {
    if (predicted.size() != truth.size() || predicted.empty())
        throw std::invalid_argument("best_permutation_iou: sample count mismatch");
    const std::size_t parts = truth.front().dim(0);
    const std::size_t pixels = truth.front().dim(1) * truth.front().dim(2);
    if (parts > 8) throw std::invalid_argument("best_permutation_iou: too many parts for exhaustive matching");

    // inter[a][b], area_pred[a], area_true[b] summed over the dataset.
    std::vector<Vec> inter(parts, Vec(parts, 0.0));
    Vec area_pred(parts, 0.0), area_true(parts, 0.0);
    for (std::size_t s = 0; s < predicted.size(); ++s) {
        if (!predicted[s].same_shape(truth[s])) throw std::invalid_argument("best_permutation_iou: shape mismatch");
        for (std::size_t a = 0; a < parts; ++a) {
            for (std::size_t p = 0; p < pixels; ++p) {
                const double pa = predicted[s][a * pixels + p];
                area_pred[a] += pa;
                if (pa == 0.0) continue;
                for (std::size_t b = 0; b < parts; ++b) inter[a][b] += std::min(pa, truth[s][b * pixels + p]);
            }
        }
        for (std::size_t b = 0; b < parts; ++b)
            for (std::size_t p = 0; p < pixels; ++p) area_true[b] += truth[s][b * pixels + p];
    }

    std::vector<std::size_t> perm(parts);
    std::iota(perm.begin(), perm.end(), 0);
    MaskIou best{-1.0, {}};
    do {
        double total = 0.0;
        for (std::size_t b = 0; b < parts; ++b) {
            const std::size_t a = perm[b];
            const double uni = area_pred[a] + area_true[b] - inter[a][b];
            total += uni > 0.0 ? inter[a][b] / uni : 0.0;
        }
        const double mean = total / static_cast<double>(parts);
        if (mean > best.mean_iou) best = {mean, perm};
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace scwm
