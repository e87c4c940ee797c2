#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "oracles.hpp"
#include "scwm/kmeans1d.hpp"
#include "scwm/numerics.hpp"
#include "scwm/scc.hpp"

using namespace scwm;

namespace {

std::vector<std::pair<int, int>> pairs_of(std::span<const Coord> coords) {
    std::vector<std::pair<int, int>> out;
    for (const auto& c : coords) out.emplace_back(c.row, c.col);
    return out;
}

std::vector<Vec> dense(const CensoredDistanceMatrix& d) {
    std::vector<Vec> out(d.size(), Vec(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < d.size(); ++j) out[i][j] = d.at(i, j);
    return out;
}

// Two identical-feature blobs in opposite corners of a grid, one middle blob with distinct features.
FeatureMap two_blob_map(std::size_t h, std::size_t w, const Vec& blob, const Vec& middle) {
    FeatureMap f({blob.size(), h, w});
    for (std::size_t c = 0; c < blob.size(); ++c) {
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t q = 0; q < 2; ++q) {
                f.at(c, r, q) = blob[c];
                f.at(c, h - 1 - r, w - 1 - q) = blob[c];
            }
        f.at(c, h / 2, w / 2) = middle[c];
    }
    return f;
}

}  // namespace

TEST_SUITE("scc") {

TEST_CASE("exact 1-D k-means matches brute force") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> size(3, 14);
    for (int t = 0; t < 150; ++t) {
        Vec v = oracle::random_vec(rng, static_cast<std::size_t>(size(rng)), 0.0, 10.0);
        if (t % 5 == 0) v.push_back(v.front());  // duplicated value
        const auto got = kmeans1d(v, 3);
        const auto want = oracle::brute_force_3means(v);
        CHECK(got.sse == doctest::Approx(want.sse).epsilon(1e-12).scale(1.0));
        CHECK(got.centers[0] <= got.centers[1]);
        CHECK(got.centers[1] <= got.centers[2]);
        // each point sits in the nearest center's cluster (fixed point of Lloyd iteration)
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double own = std::abs(v[i] - got.centers[static_cast<std::size_t>(got.labels[i])]);
            for (double c : got.centers) CHECK(own <= std::abs(v[i] - c) + 1e-12);
        }
    }
    CHECK_THROWS_AS(kmeans1d(Vec{1, 1, 2}, 3), std::invalid_argument);
    CHECK(count_distinct(Vec{1, 1, 2, 3, 3}) == 3);
}

TEST_CASE("foreground split on norms") {
    const Vec norms{10, 9.8, 3, 3.1, 0.1, 0.2};
    const auto s = split_by_norm(norms, 2, 3);
    CHECK(s.salient == std::vector<std::size_t>{0, 1});
    CHECK(s.regular == std::vector<std::size_t>{2, 3});
    CHECK(s.background == std::vector<std::size_t>{4, 5});
    CHECK_FALSE(s.used_fallback);

    const auto flat = split_by_norm(Vec(6, 1.0), 2, 3);
    CHECK(flat.used_fallback);
    CHECK(flat.salient.size() + flat.regular.size() + flat.background.size() == 6);

    const auto two = split_by_norm(Vec{5, 5, 5, 0, 0, 0}, 2, 3);
    CHECK(two.used_fallback);
    auto fg = two.foreground();
    CHECK(fg == std::vector<std::size_t>{0, 1, 2, 3});  // covers every 5 (cut at n/3, 2n/3 by rank)

    CHECK_THROWS_AS(split_by_norm(Vec{1, 2}, 1, 2), std::invalid_argument);
}

TEST_CASE("foreground split partitions the grid with ordered mean norms") {
    std::mt19937_64 rng(22);
    for (int t = 0; t < 30; ++t) {
        const FeatureMap f = oracle::random_tensor(rng, {3, 5, 6});
        const auto s = foreground_split(f);
        std::set<std::size_t> all;
        for (auto* part : {&s.salient, &s.regular, &s.background}) all.insert(part->begin(), part->end());
        CHECK(all.size() == 30);
        CHECK(s.salient.size() + s.regular.size() + s.background.size() == 30);
        const Vec n = pixel_norms(f);
        const auto mean = [&](const std::vector<std::size_t>& idx) {
            double m = 0.0;
            for (auto i : idx) m += n[i];
            return m / static_cast<double>(idx.size());
        };
        CHECK(mean(s.salient) >= mean(s.regular));
        CHECK(mean(s.regular) >= mean(s.background));
    }
}

TEST_CASE("censored distance") {
    std::mt19937_64 rng(23);
    SUBCASE("large eta reproduces plain feature distance") {
        const FeatureMap f = oracle::random_tensor(rng, {4, 4, 5});
        const std::vector<std::size_t> px{0, 3, 7, 12, 19};
        const double diag = std::hypot(4.0, 5.0);
        const auto d = censored_distance(f, px, diag + 1.0);
        for (std::size_t i = 0; i < px.size(); ++i) {
            CHECK(d.at(i, i) == 0.0);
            for (std::size_t j = 0; j < px.size(); ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < 4; ++c) {
                    const double x = f[c * 20 + px[i]] - f[c * 20 + px[j]];
                    s += x * x;
                }
                CHECK(d.at(i, j) == doctest::Approx(std::sqrt(s)).epsilon(1e-14));
                CHECK(d.at(i, j) == d.at(j, i));
            }
        }
    }
    SUBCASE("spatially distant identical features are censored") {
        const std::vector<Vec> feats{{1.0, 2.0}, {1.0, 2.0}};
        const std::vector<Coord> coords{{0, 0}, {0, 10}};
        const auto d = censored_distance(feats, coords, 5.0);
        CHECK(d.at(0, 1) == kInfSentinel);
        CHECK(d.censored(1, 0));
        // at exactly eta the pair is censored as well
        CHECK(censored_distance(feats, coords, 10.0).censored(0, 1));
        CHECK_FALSE(censored_distance(feats, coords, 10.0001).censored(0, 1));
    }
    CHECK_THROWS_AS(censored_distance(FeatureMap({1, 2, 2}), std::vector<std::size_t>{}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(censored_distance(std::vector<Vec>{{1.0}}, std::vector<Coord>{{0, 0}}, 0.0),
                    std::invalid_argument);
}

TEST_CASE("agglomerate hand examples") {
    // A,B close; C,D close; cross pairs far
    CensoredDistanceMatrix d(4);
    const double v[4][4] = {{0, 1, 9, 9}, {1, 0, 9, 9}, {9, 9, 0, 1}, {9, 9, 1, 0}};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) d.at(i, j) = v[i][j];
    const std::vector<Coord> coords{{0, 0}, {0, 1}, {5, 0}, {5, 1}};
    const auto r = agglomerate(d, 2, coords);
    CHECK(r.assignment == std::vector<int>{0, 0, 1, 1});
    CHECK_FALSE(r.fallback_applied);

    const auto singles = agglomerate(d, 4, coords);
    CHECK(singles.assignment == std::vector<int>{0, 1, 2, 3});

    CHECK_THROWS_AS(agglomerate(CensoredDistanceMatrix(0), 1, {}), std::invalid_argument);
    CHECK_THROWS_AS(agglomerate(d, 0, coords), std::invalid_argument);
    CHECK_THROWS_AS(agglomerate(d, 5, coords), std::invalid_argument);
}

TEST_CASE("censored blobs never merge; fallback applies") {
    const std::vector<Vec> feats(4, Vec{1.0, 1.0});
    const std::vector<Coord> coords{{0, 0}, {0, 1}, {20, 0}, {20, 1}};
    const auto d = censored_distance(feats, coords, 5.0);
    const auto r = agglomerate(d, 1, coords);
    CHECK(r.clusters_at_stop == 2);
    CHECK(r.fallback_applied);
    // with two clusters requested the blobs stay apart without fallback
    const auto two = agglomerate(d, 2, coords);
    CHECK(two.assignment == std::vector<int>{0, 0, 1, 1});
    CHECK_FALSE(two.fallback_applied);
}

TEST_CASE("agglomerate equals naive average linkage") {
    std::mt19937_64 rng(24);
    std::uniform_int_distribution<int> size(2, 12), pos(0, 7);
    int fallbacks = 0, censored_instances = 0;
    for (int t = 0; t < 300; ++t) {
        const auto n = static_cast<std::size_t>(size(rng));
        std::vector<Vec> feats;
        std::vector<Coord> coords;
        for (std::size_t i = 0; i < n; ++i) {
            feats.push_back(oracle::random_vec(rng, 3));
            coords.push_back({pos(rng), pos(rng)});
        }
        // first third fully finite, the rest censored at assorted radii
        const double eta = t < 100 ? 100.0 : 1.5 + static_cast<double>(t % 5);
        const auto d = censored_distance(feats, coords, eta);
        std::uniform_int_distribution<std::size_t> k(1, n);
        const std::size_t target = k(rng);
        const auto got = agglomerate(d, target, coords);
        bool stalled = false;
        const auto want = oracle::naive_average_linkage(dense(d), target, kInfSentinel, pairs_of(coords), &stalled);
        CHECK(oracle::canonical(got.assignment) == oracle::canonical(want));
        CHECK(got.fallback_applied == stalled);
        std::set<int> labels(got.assignment.begin(), got.assignment.end());
        CHECK(labels.size() == target);
        fallbacks += stalled ? 1 : 0;
        censored_instances += t >= 100 ? 1 : 0;
    }
    CHECK(fallbacks > 0);  // the stall path was exercised
}

TEST_CASE("build_masks orders parts top to bottom") {
    ForegroundSplit s;
    s.height = 4;
    s.width = 2;
    s.regular = {0, 1, 6, 7};  // top row and bottom row
    s.background = {2, 3, 4, 5};
    // cluster 0 holds the bottom row, cluster 1 the top row
    const auto m = build_masks(s, std::vector<int>{1, 1, 0, 0}, 3);
    CHECK(m.at(0, 0, 0) == 1.0);
    CHECK(m.at(1, 3, 1) == 1.0);
    CHECK(m.at(2, 1, 0) == 1.0);

    ForegroundSplit empty;
    empty.height = 2;
    empty.width = 2;
    empty.background = {0, 1, 2, 3};
    const auto e = build_masks(empty, std::vector<int>{}, 3);
    for (std::size_t p = 0; p < 4; ++p) {
        CHECK(e[p] == 0.0);
        CHECK(e[4 + p] == 0.0);
        CHECK(e[8 + p] == 1.0);
    }

    std::mt19937_64 rng(25);
    std::uniform_int_distribution<int> lab(0, 2);
    for (int t = 0; t < 20; ++t) {
        const FeatureMap f = oracle::random_tensor(rng, {2, 5, 5});
        const auto split = foreground_split(f);
        std::vector<int> a(split.foreground().size());
        for (auto& x : a) x = lab(rng);
        const auto mask = build_masks(split, a, 4);
        for (std::size_t p = 0; p < 25; ++p) {
            double sum = 0.0;
            for (std::size_t k = 0; k < 4; ++k) {
                CHECK((mask[k * 25 + p] == 0.0 || mask[k * 25 + p] == 1.0));
                sum += mask[k * 25 + p];
            }
            CHECK(sum == 1.0);
        }
    }
    CHECK_THROWS_AS(build_masks(s, std::vector<int>{0, 1}, 3), std::invalid_argument);
}

TEST_CASE("space correction separates identical blobs") {
    const Vec blob{2.0, 0.0, 1.0}, middle{0.0, 3.0, 0.5};
    const FeatureMap f = two_blob_map(12, 12, blob, middle);
    std::vector<std::size_t> px;
    for (std::size_t p = 0; p < 144; ++p)
        if (f[p] != 0.0 || f[144 + p] != 0.0) px.push_back(p);
    std::vector<Coord> coords;
    for (auto p : px) coords.push_back({static_cast<int>(p / 12), static_cast<int>(p % 12)});

    const auto censored = agglomerate(censored_distance(f, px, 6.0), 2, coords);
    const auto open = agglomerate(censored_distance(f, px, std::hypot(12.0, 12.0) + 1.0), 2, coords);
    // blob pixels: first four and last four entries of px
    CHECK(censored.assignment.front() != censored.assignment.back());
    CHECK(open.assignment.front() == open.assignment.back());
}

TEST_CASE("smooth_masks") {
    const Tensor prev({2, 1, 1}, {0.5, 0.5});
    const Tensor cur({2, 1, 1}, {1.0, 0.0});
    const auto s = smooth_masks(prev, cur, 0.2);
    CHECK(s[0] == doctest::Approx(0.9));
    CHECK(s[1] == doctest::Approx(0.1));
    CHECK(smooth_masks(prev, cur, 0.0) == cur);
    CHECK(smooth_masks(prev, cur, 1.0) == prev);
    CHECK_THROWS_AS(smooth_masks(prev, cur, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(smooth_masks(prev, cur, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(smooth_masks(prev, Tensor({3, 1, 1}), 0.5), std::invalid_argument);

    std::mt19937_64 rng(26);
    std::uniform_real_distribution<double> g(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const auto a = oracle::random_simplex_map(rng, 4, 3, 3);
        const auto b = oracle::random_simplex_map(rng, 4, 3, 3);
        const auto m = smooth_masks(a, b, g(rng));
        for (std::size_t p = 0; p < 9; ++p) {
            double sum = 0.0;
            for (std::size_t k = 0; k < 4; ++k) {
                CHECK(m[k * 9 + p] >= 0.0);
                sum += m[k * 9 + p];
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("parsing and diversity losses") {
    SUBCASE("closed forms") {
        const std::size_t l = 4, h = 3, w = 5;
        const Tensor uniform({l, h, w}, 0.25);
        CHECK(parsing_loss(uniform, uniform).loss == doctest::Approx(std::log(4.0)));
        CHECK(diversity_loss(uniform).loss == doctest::Approx(static_cast<double>(h * w) / 16.0));

        Tensor target({2, 1, 2}, {1.0, 0.0, 0.0, 1.0});
        Tensor near({2, 1, 2}, {1.0 - 1e-12, 1e-12, 1e-12, 1.0 - 1e-12});
        CHECK(parsing_loss(target, near).loss == doctest::Approx(0.0).scale(1.0));
        CHECK(diversity_loss(target).loss == 0.0);
        CHECK(scc_loss(target, near).loss == doctest::Approx(parsing_loss(target, near).loss));

        CHECK_THROWS_AS(parsing_loss(target, target), std::domain_error);  // zero entries in P
    }
    SUBCASE("gradients match finite differences") {
        std::mt19937_64 rng(27);
        for (int t = 0; t < 20; ++t) {
            const auto m = oracle::random_simplex_map(rng, 3, 3, 4);
            const auto p = oracle::random_simplex_map(rng, 3, 3, 4);
            const auto fp = [&](const Vec& v) { return parsing_loss(m, Tensor(p.dims(), v)).loss; };
            CHECK(oracle::relative_error(parsing_loss(m, p).grad.raw(), oracle::numeric_gradient(fp, p.raw())) <
                  oracle::kGradTol);
            const auto fd = [&](const Vec& v) { return diversity_loss(Tensor(p.dims(), v)).loss; };
            CHECK(oracle::relative_error(diversity_loss(p).grad.raw(), oracle::numeric_gradient(fd, p.raw())) <
                  oracle::kGradTol);
            const auto both = scc_loss(m, p);
            const auto a = parsing_loss(m, p), b = diversity_loss(p);
            CHECK(both.loss == doctest::Approx(a.loss + b.loss));
            for (std::size_t i = 0; i < p.size(); ++i) CHECK(both.grad[i] == doctest::Approx(a.grad[i] + b.grad[i]));
        }
    }
}

TEST_CASE("cascade produces l-channel one-hot masks") {
    std::mt19937_64 rng(28);
    const FeatureMap f = oracle::random_tensor(rng, {4, 8, 6});
    const auto m = cascaded_clustering(f, 4, default_eta(8, 6));
    CHECK(m.dims() == std::vector<std::size_t>{4, 8, 6});
    for (std::size_t p = 0; p < 48; ++p) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += m[k * 48 + p];
        CHECK(s == 1.0);
    }
    CHECK(default_eta(24, 12) == doctest::Approx(0.35 * std::hypot(24.0, 12.0)));
}

}  // TEST_SUITE
