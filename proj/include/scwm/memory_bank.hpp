#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "scwm/tensor.hpp"

namespace scwm {

enum class UpdateStrategy { kAverage, kHardest, kWeighted };

const char* to_string(UpdateStrategy strategy);
// Throws std::invalid_argument for anything but "average", "hardest" or "weighted".
UpdateStrategy parse_update_strategy(const std::string& name);

// Cluster centroids per feature space. Space 0 is the global space, spaces 1..l hold
// the part features. Every centroid is unit-norm.
struct MemoryBank {
    std::vector<std::vector<Vec>> centroids;  // [space][cluster][dim]
    double momentum = 0.2;
    double temperature = 0.05;
    UpdateStrategy strategy = UpdateStrategy::kWeighted;

    std::size_t spaces() const { return centroids.size(); }
    std::size_t parts() const { return centroids.empty() ? 0 : centroids.size() - 1; }
    std::size_t clusters() const { return centroids.empty() ? 0 : centroids.front().size(); }
    std::size_t dim() const {
        return centroids.empty() || centroids.front().empty() ? 0 : centroids.front().front().size();
    }
};

}  // namespace scwm
