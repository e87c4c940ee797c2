#include "scwm/kmeans1d.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace scwm {

std::size_t count_distinct(std::span<const double> values) {
    Vec sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

KMeans1dResult kmeans1d(std::span<const double> values, std::size_t k) {
    const std::size_t n = values.size();
    if (k == 0) throw std::invalid_argument("kmeans1d: k must be positive");
    if (count_distinct(values) < k) throw std::invalid_argument("kmeans1d: fewer distinct values than clusters");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = values[order[i]];

    Vec s1(n + 1, 0.0), s2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        s1[i + 1] = s1[i] + x[i];
        s2[i + 1] = s2[i] + x[i] * x[i];
    }
    const auto cost = [&](std::size_t i, std::size_t j) {
        const double cnt = static_cast<double>(j - i);
        const double sum = s1[j] - s1[i];
        return std::max(0.0, (s2[j] - s2[i]) - sum * sum / cnt);
    };
    // A split point i (cluster starts at i) is legal only where the sorted value changes.
    const auto legal = [&](std::size_t i) { return i == 0 || i == n || x[i - 1] < x[i]; };

    constexpr double kInf = std::numeric_limits<double>::infinity();
    // best[c][j]: min SSE of the first j sorted values in c+1 clusters.
    std::vector<Vec> best(k, Vec(n + 1, kInf));
    std::vector<std::vector<std::size_t>> split(k, std::vector<std::size_t>(n + 1, 0));
    for (std::size_t j = 1; j <= n; ++j)
        if (legal(j)) best[0][j] = cost(0, j);
    for (std::size_t c = 1; c < k; ++c) {
        for (std::size_t j = c + 1; j <= n; ++j) {
            if (!legal(j)) continue;
            for (std::size_t i = c; i < j; ++i) {
                if (!legal(i) || best[c - 1][i] == kInf) continue;
                const double v = best[c - 1][i] + cost(i, j);
                if (v < best[c][j]) {
                    best[c][j] = v;
                    split[c][j] = i;
                }
            }
        }
    }

    KMeans1dResult result;
    result.sse = best[k - 1][n];
    result.labels.assign(n, 0);
    result.centers.assign(k, 0.0);
    std::size_t end = n;
    for (std::size_t c = k; c-- > 0;) {
        const std::size_t begin = c == 0 ? 0 : split[c][end];
        for (std::size_t i = begin; i < end; ++i) result.labels[order[i]] = static_cast<int>(c);
        result.centers[c] = (s1[end] - s1[begin]) / static_cast<double>(end - begin);
        end = begin;
    }
    return result;
}

}  // namespace scwm
