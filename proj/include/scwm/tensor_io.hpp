#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "scwm/tensor.hpp"

namespace scwm {

// On-disk layout:
//   "SCWM" | u32 version (=1) | u32 rank | rank × u64 extents | row-major f64 payload
// All integers and floats little-endian.
enum class TensorIoCode {
    kOpenFailed,
    kBadMagic,
    kBadVersion,
    kRankTooLarge,
    kTruncated,
    kTrailingBytes,
    kWriteFailed,
};

const char* to_string(TensorIoCode code);

class TensorIoError : public std::runtime_error {
public:
    TensorIoError(TensorIoCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    TensorIoCode code() const { return code_; }

private:
    TensorIoCode code_;
};

inline constexpr char kTensorMagic[4] = {'S', 'C', 'W', 'M'};
inline constexpr std::uint32_t kTensorFormatVersion = 1;

void tensor_write(const std::filesystem::path& path, const Tensor& tensor);
Tensor tensor_read(const std::filesystem::path& path);

}  // namespace scwm
