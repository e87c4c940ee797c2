#include "scwm/scc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "scwm/kmeans1d.hpp"

namespace scwm {

std::vector<std::size_t> ForegroundSplit::foreground() const {
    std::vector<std::size_t> out;
    out.reserve(salient.size() + regular.size());
    std::merge(salient.begin(), salient.end(), regular.begin(), regular.end(), std::back_inserter(out));
    return out;
}

Vec pixel_norms(const FeatureMap& fmap) {
    if (fmap.rank() != 3) throw std::invalid_argument("pixel_norms: expected a C×H×W map");
    const std::size_t pixels = fmap.dim(1) * fmap.dim(2);
    Vec norms(pixels, 0.0);
    for (std::size_t c = 0; c < fmap.dim(0); ++c) {
        const auto chan = fmap.slice(c);
        for (std::size_t p = 0; p < pixels; ++p) norms[p] += chan[p] * chan[p];
    }
    for (auto& v : norms) v = std::sqrt(v);
    return norms;
}

ForegroundSplit split_by_norm(std::span<const double> norms, std::size_t height, std::size_t width) {
    const std::size_t n = norms.size();
    if (n != height * width) throw std::invalid_argument("split_by_norm: norm count does not match grid");
    if (n < 3) throw std::invalid_argument("split_by_norm: need at least three pixels");

    ForegroundSplit split;
    split.height = height;
    split.width = width;
    if (count_distinct(norms) >= 3) {
        const auto km = kmeans1d(norms, 3);
        for (std::size_t p = 0; p < n; ++p) {
            switch (km.labels[p]) {
                case 2: split.salient.push_back(p); break;
                case 1: split.regular.push_back(p); break;
                default: split.background.push_back(p); break;
            }
        }
        return split;
    }

    split.used_fallback = true;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
    const std::size_t first = n / 3;
    const std::size_t second = 2 * n / 3;
    for (std::size_t r = 0; r < n; ++r) {
        auto& bucket = r < first ? split.salient : (r < second ? split.regular : split.background);
        bucket.push_back(order[r]);
    }
    std::sort(split.salient.begin(), split.salient.end());
    std::sort(split.regular.begin(), split.regular.end());
    std::sort(split.background.begin(), split.background.end());
    return split;
}

ForegroundSplit foreground_split(const FeatureMap& fmap) {
    return split_by_norm(pixel_norms(fmap), fmap.dim(1), fmap.dim(2));
}

CensoredDistanceMatrix censored_distance(std::span<const Vec> features, std::span<const Coord> coords, double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("censored_distance: eta must be positive");
    if (features.size() != coords.size()) throw std::invalid_argument("censored_distance: size mismatch");
    const std::size_t n = features.size();
    CensoredDistanceMatrix dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dr = coords[i].row - coords[j].row;
            const double dc = coords[i].col - coords[j].col;
            double d = kInfSentinel;
            if (std::sqrt(dr * dr + dc * dc) < eta) {
                double s = 0.0;
                for (std::size_t c = 0; c < features[i].size(); ++c) {
                    const double diff = features[i][c] - features[j][c];
                    s += diff * diff;
                }
                d = std::sqrt(s);
            }
            dist.at(i, j) = d;
            dist.at(j, i) = d;
        }
    }
    return dist;
}

CensoredDistanceMatrix censored_distance(const FeatureMap& fmap, std::span<const std::size_t> pixels, double eta) {
    if (fmap.rank() != 3) throw std::invalid_argument("censored_distance: expected a C×H×W map");
    if (pixels.empty()) throw std::invalid_argument("censored_distance: empty foreground");
    const std::size_t channels = fmap.dim(0);
    const std::size_t width = fmap.dim(2);
    const std::size_t grid = fmap.dim(1) * width;
    std::vector<Vec> features(pixels.size(), Vec(channels));
    std::vector<Coord> coords(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        if (pixels[i] >= grid) throw std::out_of_range("censored_distance: pixel outside grid");
        for (std::size_t c = 0; c < channels; ++c) features[i][c] = fmap[c * grid + pixels[i]];
        coords[i] = {static_cast<int>(pixels[i] / width), static_cast<int>(pixels[i] % width)};
    }
    return censored_distance(features, coords, eta);
}

AgglomerateResult agglomerate(const CensoredDistanceMatrix& dist, std::size_t num_clusters,
                              std::span<const Coord> coords) {
    const std::size_t n = dist.size();
    if (n == 0) throw std::invalid_argument("agglomerate: no points");
    if (num_clusters == 0 || num_clusters > n) throw std::invalid_argument("agglomerate: bad cluster count");
    if (coords.size() != n) throw std::invalid_argument("agglomerate: coords do not match points");

    // Sentinels act as +inf inside the average: linkage compares the censored share of the
    // cross pairs first, then the finite sum over all cross pairs. No finite pair: forbidden.
    using Link = std::pair<double, double>;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    const Link kNone{kInf, kInf};
    // Per active-slot pair: finite distance sum, finite count, censored count. Slot = lowest member.
    Vec sum(n * n, 0.0);
    std::vector<std::size_t> cnt(n * n, 0);
    std::vector<std::size_t> cen(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dist.censored(i, j)) {
                cen[i * n + j] = 1;
            } else {
                sum[i * n + j] = dist.at(i, j);
                cnt[i * n + j] = 1;
            }
        }
    }
    std::vector<char> active(n, 1);
    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};

    const auto linkage = [&](std::size_t i, std::size_t j) -> Link {
        const std::size_t c = cnt[i * n + j];
        if (c == 0) return kNone;
        const auto pairs = static_cast<double>(c + cen[i * n + j]);
        return {static_cast<double>(cen[i * n + j]) / pairs, sum[i * n + j] / pairs};
    };
    // Nearest active neighbour with a higher slot; ties go to the lower slot.
    std::vector<std::size_t> nn(n, n);
    std::vector<Link> nn_dist(n, kNone);
    const auto refresh = [&](std::size_t i) {
        nn[i] = n;
        nn_dist[i] = kNone;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!active[j]) continue;
            const Link d = linkage(i, j);
            if (d < nn_dist[i]) {
                nn_dist[i] = d;
                nn[i] = j;
            }
        }
    };
    for (std::size_t i = 0; i < n; ++i) refresh(i);

    std::size_t remaining = n;
    while (remaining > num_clusters) {
        std::size_t a = n;
        Link best = kNone;
        for (std::size_t i = 0; i < n; ++i) {
            if (active[i] && nn_dist[i] < best) {
                best = nn_dist[i];
                a = i;
            }
        }
        if (a == n) break;  // only forbidden merges remain
        const std::size_t b = nn[a];

        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == a || k == b) continue;
            sum[a * n + k] += sum[b * n + k];
            cnt[a * n + k] += cnt[b * n + k];
            cen[a * n + k] += cen[b * n + k];
            sum[k * n + a] = sum[a * n + k];
            cnt[k * n + a] = cnt[a * n + k];
            cen[k * n + a] = cen[a * n + k];
        }
        active[b] = 0;
        members[a].insert(members[a].end(), members[b].begin(), members[b].end());
        members[b].clear();
        --remaining;

        refresh(a);
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == a) continue;
            if (nn[k] == a || nn[k] == b) {
                refresh(k);
            } else if (k < a) {
                const Link d = linkage(k, a);
                if (d < nn_dist[k] || (d == nn_dist[k] && a < nn[k])) {
                    nn_dist[k] = d;
                    nn[k] = a;
                }
            }
        }
    }

    AgglomerateResult result;
    result.clusters_at_stop = remaining;
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < n; ++i)
        if (active[i]) slots.push_back(i);

    if (remaining > num_clusters) {
        result.fallback_applied = true;
        std::vector<std::size_t> by_size = slots;
        std::stable_sort(by_size.begin(), by_size.end(), [&](std::size_t x, std::size_t y) {
            return members[x].size() > members[y].size();
        });
        std::vector<std::size_t> kept(by_size.begin(), by_size.begin() + static_cast<std::ptrdiff_t>(num_clusters));
        std::sort(kept.begin(), kept.end());

        const auto centroid = [&](std::size_t slot) {
            double r = 0.0, c = 0.0;
            for (auto m : members[slot]) {
                r += coords[m].row;
                c += coords[m].col;
            }
            const double cnt_members = static_cast<double>(members[slot].size());
            return std::pair<double, double>{r / cnt_members, c / cnt_members};
        };
        std::vector<std::pair<double, double>> kept_centroids;
        for (auto s : kept) kept_centroids.push_back(centroid(s));

        for (std::size_t r = num_clusters; r < by_size.size(); ++r) {
            const auto [row, col] = centroid(by_size[r]);
            std::size_t target = 0;
            double target_dist = kInf;
            for (std::size_t k = 0; k < kept.size(); ++k) {
                const double dr = row - kept_centroids[k].first;
                const double dc = col - kept_centroids[k].second;
                const double d = dr * dr + dc * dc;
                if (d < target_dist) {
                    target_dist = d;
                    target = k;
                }
            }
            auto& into = members[kept[target]];
            into.insert(into.end(), members[by_size[r]].begin(), members[by_size[r]].end());
        }
        slots = kept;
    }

    result.assignment.assign(n, -1);
    for (std::size_t label = 0; label < slots.size(); ++label)
        for (auto m : members[slots[label]]) result.assignment[m] = static_cast<int>(label);
    return result;
}

PartMask build_masks(const ForegroundSplit& split, std::span<const int> assignment, std::size_t parts) {
    if (parts < 2) throw std::invalid_argument("build_masks: need at least two parts");
    const auto fg = split.foreground();
    if (assignment.size() != fg.size()) throw std::invalid_argument("build_masks: assignment does not cover foreground");
    const std::size_t pixels = split.height * split.width;
    if (fg.size() + split.background.size() != pixels)
        throw std::invalid_argument("build_masks: split does not partition the grid");

    int clusters = 0;
    for (int a : assignment) {
        if (a < 0) throw std::invalid_argument("build_masks: uncovered foreground pixel");
        clusters = std::max(clusters, a + 1);
    }
    if (static_cast<std::size_t>(clusters) > parts - 1)
        throw std::invalid_argument("build_masks: more clusters than foreground channels");

    Vec row_sum(static_cast<std::size_t>(clusters), 0.0);
    std::vector<std::size_t> row_cnt(static_cast<std::size_t>(clusters), 0);
    for (std::size_t i = 0; i < fg.size(); ++i) {
        const auto a = static_cast<std::size_t>(assignment[i]);
        row_sum[a] += static_cast<double>(fg[i] / split.width);
        ++row_cnt[a];
    }
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < static_cast<std::size_t>(clusters); ++c)
        if (row_cnt[c] > 0) order.push_back(c);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return row_sum[x] / static_cast<double>(row_cnt[x]) < row_sum[y] / static_cast<double>(row_cnt[y]);
    });
    std::vector<std::size_t> channel_of(static_cast<std::size_t>(clusters), 0);
    for (std::size_t rank = 0; rank < order.size(); ++rank) channel_of[order[rank]] = rank;

    PartMask mask({parts, split.height, split.width});
    for (std::size_t i = 0; i < fg.size(); ++i)
        mask[channel_of[static_cast<std::size_t>(assignment[i])] * pixels + fg[i]] = 1.0;
    for (auto p : split.background) mask[(parts - 1) * pixels + p] = 1.0;
    return mask;
}

double default_eta(std::size_t height, std::size_t width) {
    return 0.35 * std::hypot(static_cast<double>(height), static_cast<double>(width));
}

PartMask cascaded_clustering(const FeatureMap& fmap, std::size_t parts, double eta) {
    const auto split = foreground_split(fmap);
    const auto fg = split.foreground();
    if (fg.empty()) return build_masks(split, {}, parts);
    const auto dist = censored_distance(fmap, fg, eta);
    std::vector<Coord> coords(fg.size());
    for (std::size_t i = 0; i < fg.size(); ++i) coords[i] = split.coord(fg[i]);
    const auto clusters = agglomerate(dist, std::min(parts - 1, fg.size()), coords);
    return build_masks(split, clusters.assignment, parts);
}

PartMask smooth_masks(const PartMask& prev, const PartMask& current, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("smooth_masks: gamma outside [0,1]");
    if (!prev.same_shape(current)) throw std::invalid_argument("smooth_masks: shape mismatch");
    PartMask out(current.dims());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = gamma * prev[i] + (1.0 - gamma) * current[i];
    return out;
}

MaskLoss parsing_loss(const PartMask& smoothed, const PartMask& predicted) {
    if (!smoothed.same_shape(predicted) || predicted.rank() != 3)
        throw std::invalid_argument("parsing_loss: shape mismatch");
    const double pixels = static_cast<double>(predicted.dim(1) * predicted.dim(2));
    MaskLoss out{0.0, Tensor(predicted.dims())};
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (!(predicted[i] > 0.0)) throw std::domain_error("parsing_loss: nonpositive prediction");
        out.loss -= smoothed[i] * std::log(predicted[i]);
        out.grad[i] = -smoothed[i] / (predicted[i] * pixels);
    }
    out.loss /= pixels;
    return out;
}

MaskLoss diversity_loss(const PartMask& predicted) {
    if (predicted.rank() != 3) throw std::invalid_argument("diversity_loss: expected l×H×W");
    const std::size_t parts = predicted.dim(0);
    if (parts < 2) throw std::invalid_argument("diversity_loss: need at least two parts");
    const std::size_t pixels = predicted.dim(1) * predicted.dim(2);
    const double scale = 2.0 / static_cast<double>(parts * (parts - 1));

    MaskLoss out{0.0, Tensor(predicted.dims())};
    for (std::size_t p = 0; p < pixels; ++p) {
        double total = 0.0;
        double squares = 0.0;
        for (std::size_t k = 0; k < parts; ++k) {
            const double v = predicted[k * pixels + p];
            total += v;
            squares += v * v;
        }
        // Σ_{i<j} P_i P_j = ((ΣP)² - ΣP²) / 2
        out.loss += 0.5 * (total * total - squares);
        for (std::size_t k = 0; k < parts; ++k) out.grad[k * pixels + p] = scale * (total - predicted[k * pixels + p]);
    }
    out.loss *= scale;
    return out;
}

MaskLoss scc_loss(const PartMask& smoothed, const PartMask& predicted) {
    auto parsing = parsing_loss(smoothed, predicted);
    const auto diversity = diversity_loss(predicted);
    parsing.loss += diversity.loss;
    for (std::size_t i = 0; i < parsing.grad.size(); ++i) parsing.grad[i] += diversity.grad[i];
    return parsing;
}

}  // namespace scwm
