#pragma once

#include <span>
#include <vector>

#include "scwm/tensor.hpp"

namespace scwm {

struct KMeans1dResult {
    std::vector<int> labels;  // per input value, 0..k-1 in ascending order of center
    Vec centers;              // ascending
    double sse = 0.0;
};

// Globally optimal 1-D k-means. Optimal clusters are contiguous runs of the sorted
// values, so a dynamic program over split points finds the minimum within-cluster SSE.
// Equal values are never split across clusters. Requires at least k distinct values.
KMeans1dResult kmeans1d(std::span<const double> values, std::size_t k);

std::size_t count_distinct(std::span<const double> values);

}  // namespace scwm
