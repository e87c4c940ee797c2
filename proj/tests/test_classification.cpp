#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "scwm/classification.hpp"
#include "scwm/numerics.hpp"

using namespace scwm;

namespace {

double total_variation(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

double sum(const Vec& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_SUITE("classification") {

TEST_CASE("head forward and backward") {
    const auto zero = head_forward(LinearHead::zeros(4, 3), Vec{1, 2, 3});
    for (double p : zero.probs) CHECK(p == doctest::Approx(0.25));

    auto dom = LinearHead::zeros(3, 2);
    dom.bias = {40.0, 0.0, 0.0};
    CHECK(head_forward(dom, Vec{0.1, 0.2}).probs[0] > 1.0 - 1e-15);

    std::mt19937_64 rng(51);
    for (int t = 0; t < 20; ++t) {
        LinearHead h{oracle::random_tensor(rng, {4, 5}), oracle::random_vec(rng, 4)};
        const Vec f = oracle::random_vec(rng, 5);
        const Vec up = oracle::random_vec(rng, 4);
        const auto value = [&](const LinearHead& hh, const Vec& x) { return dot(head_forward(hh, x).logits, up); };
        const auto g = head_backward(h, f, up);
        const auto fw = [&](const Vec& v) {
            auto hh = h;
            hh.weight.raw() = v;
            return value(hh, f);
        };
        CHECK(oracle::relative_error(g.weight.raw(), oracle::numeric_gradient(fw, h.weight.raw())) < oracle::kGradTol);
        const auto fb = [&](const Vec& v) {
            auto hh = h;
            hh.bias = v;
            return value(hh, f);
        };
        CHECK(oracle::relative_error(g.bias, oracle::numeric_gradient(fb, h.bias)) < oracle::kGradTol);
        const auto fx = [&](const Vec& v) { return value(h, v); };
        CHECK(oracle::relative_error(g.input, oracle::numeric_gradient(fx, f)) < oracle::kGradTol);
    }
    CHECK_THROWS_AS(head_forward(LinearHead::zeros(2, 3), Vec{1, 2}), std::invalid_argument);

    const std::vector<Vec> cents{{1, 0}, {0, 1}};
    const auto init = LinearHead::from_centroids(cents, 20.0);
    CHECK(init.weight.at(1, 1) == 20.0);
    CHECK(init.bias == Vec{0, 0});
}

TEST_CASE("refined part labels") {
    const Vec y{1.0, 0.0};
    CHECK(refine_part_label(y, 1.0) == y);
    CHECK(refine_part_label(y, 0.0) == Vec{0.5, 0.5});
    const Vec half = refine_part_label(y, 0.5);
    CHECK(half[0] == doctest::Approx(0.75));
    CHECK(half[1] == doctest::Approx(0.25));

    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> cls(2, 9);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = cls(rng);
        const Vec oh = one_hot(t % n, n);
        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        const Vec la = refine_part_label(oh, a), lb = refine_part_label(oh, b);
        CHECK(std::abs(sum(la) - 1.0) <= 1e-12);
        CHECK(total_variation(lb, oh) <= total_variation(la, oh) + 1e-15);
        const Vec strong = refine_part_label(oh, 0.5 + 0.5 * u(rng));
        CHECK(std::max_element(strong.begin(), strong.end()) - strong.begin() == static_cast<long>(t % n));
    }
}

TEST_CASE("part agreement weights") {
    const Vec eq = part_agreement_weights(Vec{0.3, 0.3, 0.3});
    for (double w : eq) CHECK(w == doctest::Approx(1.0 / 3.0));
    const Vec two = part_agreement_weights(Vec{1.0, 0.0});
    CHECK(two[0] == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)));
    CHECK(two[1] == doctest::Approx(1.0 / (std::exp(1.0) + 1.0)));
    CHECK(part_agreement_weights(Vec{0.7}) == Vec{1.0});
}

TEST_CASE("distilled global label") {
    const Vec y{1.0, 0.0};
    const std::vector<Vec> q{{0.3, 0.7}};
    CHECK(distill_global_label(y, 1.0, Vec{1.0}, q) == y);
    const Vec pass = distill_global_label(y, 0.0, Vec{1.0}, q);
    CHECK(pass[0] == doctest::Approx(0.3));
    CHECK(pass[1] == doctest::Approx(0.7));

    // beta = 0.35 with two parts, by hand: 0.35·y + 0.65·(0.6·q1 + 0.4·q2)
    const std::vector<Vec> q2{{0.2, 0.8}, {0.9, 0.1}};
    const Vec d = distill_global_label(y, 0.35, Vec{0.6, 0.4}, q2);
    CHECK(d[0] == doctest::Approx(0.35 + 0.65 * (0.6 * 0.2 + 0.4 * 0.9)));
    CHECK(d[1] == doctest::Approx(0.65 * (0.6 * 0.8 + 0.4 * 0.1)));
    CHECK(sum(d) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("id loss") {
    SUBCASE("cross-entropy bounds") {
        const Vec y{0.7, 0.2, 0.1};
        const auto at_label = id_loss(y, std::vector<Vec>{y}, y, std::vector<Vec>{y});
        double entropy = 0.0;
        for (double p : y) entropy -= p * std::log(p);
        CHECK(at_label.loss == doctest::Approx(2.0 * entropy));

        const Vec oh{1.0, 0.0};
        const Vec nearly{1.0 - 1e-12, 1e-12};
        CHECK(id_loss(nearly, std::vector<Vec>{nearly}, oh, std::vector<Vec>{oh}).loss < 1e-10);
        CHECK_THROWS_AS(id_loss(Vec{1.0, 0.0}, std::vector<Vec>{}, Vec{0.5, 0.5}, std::vector<Vec>{}),
                        std::domain_error);
    }
    SUBCASE("gradient wrt logits") {
        std::mt19937_64 rng(53);
        for (int t = 0; t < 20; ++t) {
            const std::size_t n = 4, parts = 3;
            const Vec zg = oracle::random_vec(rng, n, -2.0, 2.0);
            std::vector<Vec> zp;
            for (std::size_t k = 0; k < parts; ++k) zp.push_back(oracle::random_vec(rng, n, -2.0, 2.0));
            const Vec yg = refine_part_label(one_hot(1, n), 0.6);
            std::vector<Vec> yp;
            for (std::size_t k = 0; k < parts; ++k) yp.push_back(refine_part_label(one_hot(k, n), 0.3 + 0.2 * k));

            const auto value = [&](const Vec& g, const std::vector<Vec>& p) {
                std::vector<Vec> qp;
                for (const auto& z : p) qp.push_back(softmax(z));
                return id_loss(softmax(g), qp, yg, yp).loss;
            };
            std::vector<Vec> qp;
            for (const auto& z : zp) qp.push_back(softmax(z));
            const auto l = id_loss(softmax(zg), qp, yg, yp);
            CHECK(oracle::relative_error(l.global, oracle::numeric_gradient([&](const Vec& g) { return value(g, zp); },
                                                                            zg)) < oracle::kGradTol);
            for (std::size_t k = 0; k < parts; ++k) {
                const auto fk = [&](const Vec& z) {
                    auto p = zp;
                    p[k] = z;
                    return value(zg, p);
                };
                CHECK(oracle::relative_error(l.parts[k], oracle::numeric_gradient(fk, zp[k])) < oracle::kGradTol);
            }
        }
    }
}

TEST_CASE("total objective is the plain sum") {
    const LossTerms t{1.0, 2.0, 3.0};
    CHECK(t.total() == 6.0);
    const LossTerms z{0.0, 2.0, 3.0};
    CHECK(z.total() == 5.0);
}

}  // TEST_SUITE
