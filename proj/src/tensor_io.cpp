#include "scwm/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace scwm {

const char* to_string(TensorIoCode code) {
    switch (code) {
        case TensorIoCode::kOpenFailed: return "open failed";
        case TensorIoCode::kBadMagic: return "bad magic";
        case TensorIoCode::kBadVersion: return "unsupported version";
        case TensorIoCode::kRankTooLarge: return "rank too large";
        case TensorIoCode::kTruncated: return "truncated payload";
        case TensorIoCode::kTrailingBytes: return "trailing bytes";
        case TensorIoCode::kWriteFailed: return "write failed";
    }
    return "unknown";
}

namespace {

template <typename T>
void put_le(std::vector<char>& out, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    U bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
    return std::bit_cast<T>(bits);
}

}  // namespace

void tensor_write(const std::filesystem::path& path, const Tensor& tensor) {
    if (tensor.rank() > Tensor::kMaxRank)
        throw TensorIoError(TensorIoCode::kRankTooLarge, path.string());
    std::vector<char> buf;
    buf.reserve(12 + 8 * tensor.rank() + 8 * tensor.size());
    buf.insert(buf.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
    put_le<std::uint32_t>(buf, kTensorFormatVersion);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(tensor.rank()));
    for (auto d : tensor.dims()) put_le<std::uint64_t>(buf, d);
    for (double v : tensor.values()) put_le<double>(buf, v);

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw TensorIoError(TensorIoCode::kOpenFailed, path.string());
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw TensorIoError(TensorIoCode::kWriteFailed, path.string());
}

Tensor tensor_read(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw TensorIoError(TensorIoCode::kOpenFailed, path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    const auto need = [&](std::size_t offset, std::size_t count) {
        if (bytes.size() < offset + count) throw TensorIoError(TensorIoCode::kTruncated, path.string());
    };
    need(0, 4);
    if (std::memcmp(bytes.data(), kTensorMagic, 4) != 0)
        throw TensorIoError(TensorIoCode::kBadMagic, path.string());
    need(4, 8);
    const auto version = get_le<std::uint32_t>(bytes.data() + 4);
    if (version != kTensorFormatVersion) throw TensorIoError(TensorIoCode::kBadVersion, path.string());
    const auto rank = get_le<std::uint32_t>(bytes.data() + 8);
    if (rank > Tensor::kMaxRank) throw TensorIoError(TensorIoCode::kRankTooLarge, path.string());

    std::size_t offset = 12;
    need(offset, 8 * static_cast<std::size_t>(rank));
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) {
        d = static_cast<std::size_t>(get_le<std::uint64_t>(bytes.data() + offset));
        offset += 8;
    }
    const std::size_t available = (bytes.size() - offset) / 8;
    std::size_t count = 1;
    for (auto d : dims) {
        if (d != 0 && count > available / d) count = available + 1;
        else count *= d;
    }
    if (count > available) throw TensorIoError(TensorIoCode::kTruncated, path.string());
    std::vector<double> data(count);
    for (auto& v : data) {
        v = get_le<double>(bytes.data() + offset);
        offset += 8;
    }
    if (offset != bytes.size()) throw TensorIoError(TensorIoCode::kTrailingBytes, path.string());
    return Tensor(std::move(dims), std::move(data));
}

}  // namespace scwm
