#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "oracles.hpp"
#include "scwm/tensor_io.hpp"

using namespace scwm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const char* name) {
    const auto dir = fs::temp_directory_path() / "scwm_tensor_io";
    fs::create_directories(dir);
    return dir / name;
}

std::string bytes_of(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void put_bytes(const fs::path& p, const std::string& b) { std::ofstream(p, std::ios::binary) << b; }

TensorIoCode code_of(const fs::path& p) {
    try {
        tensor_read(p);
    } catch (const TensorIoError& e) {
        return e.code();
    }
    FAIL("expected a TensorIoError");
    return TensorIoCode::kOpenFailed;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("tensor file round trip is bit exact") {
    std::mt19937_64 rng(11);
    for (const auto& dims : std::vector<std::vector<std::size_t>>{{7}, {3, 4}, {2, 3, 4}, {2, 1, 3, 2}}) {
        const Tensor t = oracle::random_tensor(rng, dims, -1e6, 1e6);
        const auto p = scratch("rt.tensor");
        tensor_write(p, t);
        const Tensor back = tensor_read(p);
        CHECK(back.dims() == t.dims());
        CHECK(std::memcmp(back.raw().data(), t.raw().data(), t.size() * sizeof(double)) == 0);
        // rewriting gives identical bytes
        const auto q = scratch("rt2.tensor");
        tensor_write(q, back);
        CHECK(bytes_of(p) == bytes_of(q));
    }
}

TEST_CASE("zero-length dimension round trips") {
    const Tensor t({3, 0, 2});
    const auto p = scratch("empty.tensor");
    tensor_write(p, t);
    const Tensor back = tensor_read(p);
    CHECK(back.dims() == t.dims());
    CHECK(back.size() == 0);
}

TEST_CASE("header layout") {
    const auto p = scratch("layout.tensor");
    tensor_write(p, Tensor({2}, {1.0, -2.0}));
    const std::string b = bytes_of(p);
    REQUIRE(b.size() == 4 + 4 + 4 + 8 + 16);
    CHECK(b.substr(0, 4) == "SCWM");
    CHECK(static_cast<unsigned char>(b[4]) == 1);
    CHECK(static_cast<unsigned char>(b[8]) == 1);
    CHECK(static_cast<unsigned char>(b[12]) == 2);
    double first;
    std::memcpy(&first, b.data() + 20, 8);
    CHECK(first == 1.0);
}

TEST_CASE("malformed files raise distinct codes") {
    const auto good = scratch("good.tensor");
    tensor_write(good, Tensor({2, 2}, {1, 2, 3, 4}));
    const std::string b = bytes_of(good);
    const auto bad = scratch("bad.tensor");

    CHECK(code_of(scratch("does_not_exist.tensor")) == TensorIoCode::kOpenFailed);

    std::string magic = b;
    magic[0] = 'X';
    put_bytes(bad, magic);
    CHECK(code_of(bad) == TensorIoCode::kBadMagic);

    std::string version = b;
    version[4] = 2;
    put_bytes(bad, version);
    CHECK(code_of(bad) == TensorIoCode::kBadVersion);

    std::string rank = b;
    rank[8] = 5;
    put_bytes(bad, rank);
    CHECK(code_of(bad) == TensorIoCode::kRankTooLarge);

    put_bytes(bad, b.substr(0, b.size() - 3));
    CHECK(code_of(bad) == TensorIoCode::kTruncated);

    put_bytes(bad, b.substr(0, 10));
    CHECK(code_of(bad) == TensorIoCode::kTruncated);

    put_bytes(bad, b + "x");
    CHECK(code_of(bad) == TensorIoCode::kTrailingBytes);

    CHECK_THROWS_AS(tensor_write(fs::path("/nonexistent_dir_scwm/x.tensor"), Tensor({1})), TensorIoError);
}

}  // TEST_SUITE
