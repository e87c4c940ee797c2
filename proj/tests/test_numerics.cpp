#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "scwm/numerics.hpp"

using namespace scwm;

TEST_SUITE("numerics") {

TEST_CASE("gap averages each channel") {
    const Tensor f({1, 2, 2}, {1, 2, 3, 4});
    CHECK(gap(f) == Vec{2.5});

    const Tensor c({3, 4, 5}, 0.75);
    CHECK(gap(c) == Vec{0.75, 0.75, 0.75});

    std::mt19937_64 rng(1);
    const Tensor r = oracle::random_tensor(rng, {4, 6, 6});
    const Vec got = gap(r), want = oracle::loop_gap(r);
    for (std::size_t i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));

    CHECK_THROWS_AS(gap(Tensor({2, 0, 3})), std::invalid_argument);
}

TEST_CASE("masked_gap divides by the full grid") {
    std::mt19937_64 rng(2);
    const Tensor f = oracle::random_tensor(rng, {3, 4, 4});
    CHECK(masked_gap(f, Vec(16, 1.0)) == gap(f));
    CHECK(masked_gap(f, Vec(16, 0.0)) == Vec(3, 0.0));

    Vec checker(16);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) checker[r * 4 + c] = (r + c) % 2 == 0 ? 1.0 : 0.0;
    const Vec got = masked_gap(f, checker), want = oracle::loop_gap(f, &checker);
    for (std::size_t i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));

    CHECK_THROWS_AS(masked_gap(f, Vec(15, 1.0)), std::invalid_argument);
}

TEST_CASE("l2_normalize") {
    const Vec v = l2_normalize(Vec{3.0, 4.0});
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[1] == doctest::Approx(0.8));
    CHECK(l2_normalize(Vec{0.0, 1.0, 0.0}) == Vec{0.0, 1.0, 0.0});
    CHECK_THROWS_AS(l2_normalize(Vec{0.0, 0.0}), std::domain_error);

    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const Vec x = oracle::random_vec(rng, 7, -3.0, 3.0);
        const Vec n = l2_normalize(x);
        CHECK(l2_norm(n) == doctest::Approx(1.0).epsilon(1e-12));
        const double s = l2_norm(x);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(n[i] * s == doctest::Approx(x[i]).epsilon(1e-12));
    }
}

TEST_CASE("l2_normalize_backward matches finite differences") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const Vec x = oracle::random_vec(rng, 6);
        const Vec up = oracle::random_vec(rng, 6);
        const auto f = [&](const Vec& v) { return dot(l2_normalize(v), up); };
        CHECK(oracle::relative_error(l2_normalize_backward(x, up), oracle::numeric_gradient(f, x)) <
              oracle::kGradTol);
    }
}

TEST_CASE("softmax helpers") {
    const Vec p = softmax(Vec{1.0, 2.0, 3.0});
    CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
    CHECK(log_sum_exp(Vec{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)));
    const Vec big = softmax(Vec{1000.0, 0.0});
    CHECK(big[0] == doctest::Approx(1.0));
}

TEST_CASE("part classifier forward") {
    std::mt19937_64 rng(5);
    const Tensor f = oracle::random_tensor(rng, {3, 5, 4});

    const auto zero = part_classifier_forward(PartClassifierParams::zeros(4, 3), f);
    for (double v : zero.raw()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

    auto dominant = PartClassifierParams::zeros(4, 3);
    dominant.bias = {10.0, 0.0, 0.0, 0.0};
    const auto dom = part_classifier_forward(dominant, f);
    for (double v : dom.slice(0)) CHECK(v > 0.9998);

    for (int t = 0; t < 5; ++t) {
        const auto params = PartClassifierParams::random(3, 3, 0.5, rng);
        const Tensor logits = part_classifier_logits(params, f);
        const Tensor want = oracle::loop_conv(params.kernel, params.bias, f);
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(logits[i] == doctest::Approx(want[i]).epsilon(1e-13));
        const auto probs = part_classifier_forward(params, f);
        for (std::size_t p = 0; p < 20; ++p) {
            double s = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                CHECK(probs[k * 20 + p] >= 0.0);
                s += probs[k * 20 + p];
            }
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
    }

    CHECK_THROWS_AS(part_classifier_forward(PartClassifierParams::zeros(4, 2), f), std::invalid_argument);
    CHECK_THROWS_AS(PartClassifierParams::zeros(1, 3), std::invalid_argument);
}

TEST_CASE("part classifier backward") {
    std::mt19937_64 rng(6);
    const std::size_t l = 3, c = 2, h = 4, w = 3;

    SUBCASE("zero upstream gives zero gradients") {
        const auto params = PartClassifierParams::random(l, c, 0.5, rng);
        const Tensor f = oracle::random_tensor(rng, {c, h, w});
        const auto g = part_classifier_backward(params, f, Tensor({l, h, w}));
        for (double v : g.kernel.raw()) CHECK(v == 0.0);
        for (double v : g.bias) CHECK(v == 0.0);
        for (double v : g.input.raw()) CHECK(v == 0.0);
    }

    SUBCASE("single-pixel and random upstream match finite differences") {
        for (int t = 0; t < 6; ++t) {
            auto params = PartClassifierParams::random(l, c, 0.5, rng);
            const Tensor f = oracle::random_tensor(rng, {c, h, w});
            Tensor up({l, h, w});
            if (t % 2 == 0) {
                up.at(1, 2, 1) = 1.0;
            } else {
                up = oracle::random_tensor(rng, {l, h, w});
            }
            const auto loss = [&](const PartClassifierParams& p, const Tensor& x) {
                const auto probs = part_classifier_forward(p, x);
                double s = 0.0;
                for (std::size_t i = 0; i < probs.size(); ++i) s += probs[i] * up[i];
                return s;
            };
            const auto g = part_classifier_backward(params, f, up);

            const auto fk = [&](const Vec& v) {
                auto p = params;
                p.kernel.raw() = v;
                return loss(p, f);
            };
            CHECK(oracle::relative_error(g.kernel.raw(), oracle::numeric_gradient(fk, params.kernel.raw())) <
                  oracle::kGradTol);
            const auto fb = [&](const Vec& v) {
                auto p = params;
                p.bias = v;
                return loss(p, f);
            };
            CHECK(oracle::relative_error(g.bias, oracle::numeric_gradient(fb, params.bias)) < oracle::kGradTol);
            const auto fx = [&](const Vec& v) { return loss(params, Tensor(f.dims(), v)); };
            CHECK(oracle::relative_error(g.input.raw(), oracle::numeric_gradient(fx, f.raw())) < oracle::kGradTol);
        }
    }

    const auto params = PartClassifierParams::random(l, c, 0.5, rng);
    CHECK_THROWS_AS(part_classifier_backward(params, Tensor({c, h, w}), Tensor({l, h, w + 1})),
                    std::invalid_argument);
}

}  // TEST_SUITE
