#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "scwm/id_clustering.hpp"
#include "scwm/numerics.hpp"

using namespace scwm;

namespace {

// Tight unit-norm blobs around random centres.
std::vector<Vec> blobs(std::mt19937_64& rng, std::size_t count, std::size_t per, std::size_t dim, double spread,
                       std::vector<int>* truth = nullptr) {
    std::vector<Vec> out;
    std::normal_distribution<double> noise(0.0, spread);
    for (std::size_t b = 0; b < count; ++b) {
        Vec centre(dim, 0.0);
        centre[b % dim] = 1.0;  // mutually orthogonal centres
        for (std::size_t i = 0; i < per; ++i) {
            Vec v = centre;
            for (auto& x : v) x += noise(rng);
            out.push_back(l2_normalize(v));
            if (truth) truth->push_back(static_cast<int>(b));
        }
    }
    return out;
}

DistanceMatrix from_rows(const std::vector<Vec>& rows) {
    DistanceMatrix d{rows.size(), {}};
    for (const auto& r : rows) d.values.insert(d.values.end(), r.begin(), r.end());
    return d;
}

}  // namespace

TEST_SUITE("id_clustering") {

TEST_CASE("knn ordering and ties") {
    const std::vector<Vec> ortho{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const auto nn = knn(ortho, 1);
    CHECK(nn[0] == std::vector<int>{1});
    CHECK(nn[1] == std::vector<int>{0});
    CHECK(nn[2] == std::vector<int>{0});

    const std::vector<Vec> dup{{1, 0}, {0, 1}, {1, 0}};
    CHECK(knn(dup, 1)[0] == std::vector<int>{2});

    std::mt19937_64 rng(31);
    for (int t = 0; t < 20; ++t) {
        std::vector<Vec> f;
        for (int i = 0; i < 12; ++i) f.push_back(oracle::random_unit(rng, 4));
        CHECK(knn(f, 5) == oracle::sort_knn(f, 5));
        for (const auto& row : knn(f, 20)) CHECK(row.size() == 11);
    }
    CHECK_THROWS_AS(knn(ortho, 0), std::invalid_argument);
}

TEST_CASE("k-reciprocal Jaccard matches the set oracle") {
    std::mt19937_64 rng(32);
    std::uniform_int_distribution<int> size(3, 10);
    for (int t = 0; t < 120; ++t) {
        const auto n = static_cast<std::size_t>(size(rng));
        std::vector<Vec> f;
        for (std::size_t i = 0; i < n; ++i) f.push_back(oracle::random_unit(rng, 3));
        const int k1 = 2 + t % 5;
        const auto got = k_reciprocal_jaccard(f, k1);
        const auto want = oracle::set_jaccard(f, k1);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(got.at(i, i) == 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(got.at(i, j) == doctest::Approx(want[i][j]).epsilon(1e-14));
                CHECK(got.at(i, j) == got.at(j, i));
                CHECK(got.at(i, j) >= 0.0);
                CHECK(got.at(i, j) <= 1.0);
            }
        }
    }
    CHECK_THROWS_AS(k_reciprocal_jaccard(std::vector<Vec>{{1.0}, {1.0}}, 1), std::invalid_argument);
}

TEST_CASE("k-reciprocal Jaccard on separated blobs") {
    std::mt19937_64 rng(33);
    const auto f = blobs(rng, 2, 5, 4, 0.01);
    const auto d = k_reciprocal_jaccard(f, 4);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 5; j < 10; ++j) CHECK(d.at(i, j) == 1.0);

    // query expansion keeps the matrix symmetric and bounded
    const auto q = k_reciprocal_jaccard(f, 4, 3);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) {
            CHECK(q.at(i, j) == q.at(j, i));
            CHECK(q.at(i, j) >= 0.0);
            CHECK(q.at(i, j) <= 1.0);
        }
    // identical reciprocal sets give distance 0
    const std::vector<Vec> triplets{{1, 0}, {1, 0}, {1, 0}};
    CHECK(k_reciprocal_jaccard(triplets, 2).at(0, 1) == 0.0);
}

TEST_CASE("dbscan density rules") {
    std::vector<Vec> d(10, Vec(10, 0.9));
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j)
            if (i == j) d[i][j] = 0.0;
            else if ((i < 5) == (j < 5)) d[i][j] = 0.1;
    const auto two = dbscan(from_rows(d), 0.3, 3);
    CHECK(two.num_clusters == 2);
    CHECK(two.outliers() == 0);
    CHECK(two.labels == std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1});

    auto lonely = d;
    for (std::size_t j = 0; j < 9; ++j) lonely[9][j] = lonely[j][9] = 0.9;
    const auto with_outlier = dbscan(from_rows(lonely), 0.3, 3);
    CHECK(with_outlier.labels[9] == kOutlier);
    CHECK(with_outlier.outliers() == 1);

    const auto one = dbscan(from_rows(d), 2.0, 3);
    CHECK(one.num_clusters == 1);
    CHECK_THROWS_AS(dbscan(from_rows(d), 0.0, 3), std::invalid_argument);
}

TEST_CASE("dbscan is invariant to index permutation") {
    std::mt19937_64 rng(34);
    std::vector<int> truth;
    auto f = blobs(rng, 3, 6, 4, 0.05, &truth);
    f.push_back(oracle::random_unit(rng, 4));  // likely an outlier
    const auto base = dbscan(cosine_distance(f), 0.2, 3);

    for (int t = 0; t < 10; ++t) {
        std::vector<std::size_t> perm(f.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<Vec> pf;
        for (auto i : perm) pf.push_back(f[i]);
        const auto permuted = dbscan(cosine_distance(pf), 0.2, 3);
        std::vector<int> back(f.size());
        for (std::size_t k = 0; k < perm.size(); ++k) back[perm[k]] = permuted.labels[k];
        CHECK(oracle::canonical(back) == oracle::canonical(base.labels));
    }
}

TEST_CASE("dbscan over Jaccard distance recovers separated blobs") {
    std::mt19937_64 rng(35);
    for (int t = 0; t < 10; ++t) {
        std::vector<int> truth;
        const auto f = blobs(rng, 4, 6, 6, 0.02, &truth);
        const auto labels = dbscan(k_reciprocal_jaccard(f, 5), 0.5, 3);
        CHECK(labels.outliers() == 0);
        CHECK(oracle::canonical(labels.labels) == oracle::canonical(truth));
    }
}

TEST_CASE("init_memory centroids") {
    const std::vector<Vec> global{{1, 0}, {0.6, 0.8}, {0, 1}, {-1, 0}};
    const std::vector<Vec> part{{1, 0}, {1, 0}, {0, 1}, {}};  // last part skipped
    const std::vector<std::vector<Vec>> spaces{global, part};
    PseudoLabels labels{{0, 0, 1, kOutlier}, 2};
    const auto bank = init_memory(spaces, labels, 0.2, 0.05, UpdateStrategy::kWeighted);
    REQUIRE(bank.spaces() == 2);
    REQUIRE(bank.clusters() == 2);
    // (1,0) and (0.6,0.8): mean (0.8,0.4) → normalized
    CHECK(bank.centroids[0][0][0] == doctest::Approx(0.8 / std::hypot(0.8, 0.4)));
    CHECK(bank.centroids[0][0][1] == doctest::Approx(0.4 / std::hypot(0.8, 0.4)));
    CHECK(bank.centroids[0][1] == Vec{0, 1});  // singleton
    CHECK(bank.centroids[1][0] == Vec{1, 0});
    for (const auto& space : bank.centroids)
        for (const auto& c : space) CHECK(l2_norm(c) == doctest::Approx(1.0).epsilon(1e-12));

    std::mt19937_64 rng(36);
    for (int t = 0; t < 10; ++t) {
        std::vector<int> truth;
        const auto f = blobs(rng, 3, 4, 5, 0.3, &truth);
        PseudoLabels pl{truth, 3};
        pl.labels[0] = kOutlier;
        const auto b = init_memory(std::vector<std::vector<Vec>>{f}, pl, 0.2, 0.05, UpdateStrategy::kAverage);
        for (const auto& c : b.centroids[0]) CHECK(l2_norm(c) == doctest::Approx(1.0).epsilon(1e-12));
        // the outlier does not move its former cluster's centroid
        Vec mean(5, 0.0);
        for (std::size_t i = 1; i < 4; ++i)
            for (std::size_t c = 0; c < 5; ++c) mean[c] += f[i][c];
        const Vec want = l2_normalize(mean);
        for (std::size_t c = 0; c < 5; ++c) CHECK(b.centroids[0][0][c] == doctest::Approx(want[c]));
    }
}

}  // TEST_SUITE
