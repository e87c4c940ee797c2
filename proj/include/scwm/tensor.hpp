#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace scwm {

using Vec = std::vector<double>;

// Dense row-major tensor of up to four dimensions, 64-bit values.
class Tensor {
public:
    static constexpr std::size_t kMaxRank = 4;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
    Tensor(std::vector<std::size_t> dims, std::vector<double> data);

    std::size_t rank() const { return dims_.size(); }
    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t dim(std::size_t i) const { return dims_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }

    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * dims_[1] + j) * dims_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * dims_[1] + j) * dims_[2] + k];
    }

    double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t m) {
        return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + m];
    }
    double at(std::size_t i, std::size_t j, std::size_t k, std::size_t m) const {
        return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + m];
    }

    // Contiguous slice along the leading axis (a channel of a C×H×W map, a row of a matrix).
    std::span<double> slice(std::size_t i);
    std::span<const double> slice(std::size_t i) const;

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<double> data_;
};

// C×H×W feature grid.
using FeatureMap = Tensor;
// l×H×W per-pixel part assignment. Soft masks lie on the simplex at every pixel,
// hard masks are one-hot.
using PartMask = Tensor;

std::size_t element_count(std::span<const std::size_t> dims);

}  // namespace scwm
