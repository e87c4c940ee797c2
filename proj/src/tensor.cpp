#include "scwm/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace scwm {

std::size_t element_count(std::span<const std::size_t> dims) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : dims_(std::move(dims)) {
    if (dims_.size() > kMaxRank) throw std::invalid_argument("tensor rank exceeds 4");
    data_.assign(element_count(dims_), fill);
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
    if (dims_.size() > kMaxRank) throw std::invalid_argument("tensor rank exceeds 4");
    if (element_count(dims_) != data_.size())
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match extents");
}

std::span<double> Tensor::slice(std::size_t i) {
    const std::size_t stride = (dims_.empty() || dims_[0] == 0) ? 0 : data_.size() / dims_[0];
    return std::span<double>(data_).subspan(i * stride, stride);
}

std::span<const double> Tensor::slice(std::size_t i) const {
    const std::size_t stride = (dims_.empty() || dims_[0] == 0) ? 0 : data_.size() / dims_[0];
    return std::span<const double>(data_).subspan(i * stride, stride);
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace scwm
