#include <doctest.h>

#include <cmath>

#include "pulsealign/contrastive.hpp"

using namespace pulsealign;

namespace {

EmbeddingBatch<double> batch_from(std::vector<double> values, std::int64_t n, std::int64_t d,
                                  EmbeddingSpace space = EmbeddingSpace::kShared) {
    Tensor<double> t({n, d});
    t.data = std::move(values);
    return {std::move(t), space};
}

double info_nce(const Tensor<double>& hp, const Tensor<double>& he, double tau) {
    return symmetric_info_nce_value(hp, he, tau);
}

} // namespace

TEST_CASE("l2_normalize basics") {
    SUBCASE("the 3-4-5 row") {
        const auto out = l2_normalize(batch_from({3.0, 4.0}, 1, 2));
        CHECK(out.values.at(0) == doctest::Approx(0.6));
        CHECK(out.values.at(1) == doctest::Approx(0.8));
    }
    SUBCASE("idempotent on unit rows and invariant to positive scale") {
        const auto once = l2_normalize(batch_from({3.0, 4.0, -1.0, 1.0}, 2, 2));
        const auto twice = l2_normalize(once);
        const auto scaled = l2_normalize(batch_from({30.0, 40.0, -10.0, 10.0}, 2, 2));
        for (std::int64_t i = 0; i < 4; ++i) {
            CHECK(twice.values.at(i) == doctest::Approx(once.values.at(i)).epsilon(1e-6));
            CHECK(scaled.values.at(i) == doctest::Approx(once.values.at(i)).epsilon(1e-6));
        }
        for (std::int64_t r = 0; r < 2; ++r) {
            double norm = std::hypot(once.values.at(r * 2), once.values.at(r * 2 + 1));
            CHECK(norm == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    SUBCASE("zero rows are a degenerate-embedding error") {
        try {
            l2_normalize(batch_from({0.0, 0.0}, 1, 2));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateEmbedding);
        }
    }
}

TEST_CASE("cosine similarity matrix") {
    SUBCASE("orthonormal rows give the identity") {
        const auto a = batch_from({1, 0, 0, 0, 1, 0, 0, 0, 1}, 3, 3);
        const Tensor<double> sim = cosine_similarity_matrix(a, a);
        for (std::int64_t i = 0; i < 3; ++i) {
            for (std::int64_t j = 0; j < 3; ++j) {
                CHECK(sim.at(i * 3 + j) == doctest::Approx(i == j ? 1.0 : 0.0));
            }
        }
    }
    SUBCASE("opposed rows give a -1 diagonal") {
        const auto a = batch_from({1, 0, 0, 1}, 2, 2);
        const auto b = batch_from({-1, 0, 0, -1}, 2, 2);
        const Tensor<double> sim = cosine_similarity_matrix(a, b);
        CHECK(sim.at(0) == doctest::Approx(-1.0));
        CHECK(sim.at(3) == doctest::Approx(-1.0));
    }
    SUBCASE("random normalized pairs match per-pair dot products") {
        Rng rng(5);
        Tensor<double> raw_a({6, 8}), raw_b({6, 8});
        for (auto& v : raw_a.data) v = rng.normal();
        for (auto& v : raw_b.data) v = rng.normal();
        const auto a = l2_normalize(EmbeddingBatch<double>{raw_a, EmbeddingSpace::kShared});
        const auto b = l2_normalize(EmbeddingBatch<double>{raw_b, EmbeddingSpace::kShared});
        const Tensor<double> sim = cosine_similarity_matrix(a, b);
        for (std::int64_t i = 0; i < 6; ++i) {
            for (std::int64_t j = 0; j < 6; ++j) {
                double dot = 0.0;
                for (std::int64_t k = 0; k < 8; ++k) dot += a.values.at(i * 8 + k) * b.values.at(j * 8 + k);
                CHECK(sim.at(i * 6 + j) == doctest::Approx(dot).epsilon(1e-6));
                CHECK(sim.at(i * 6 + j) >= -1.0 - 1e-6);
                CHECK(sim.at(i * 6 + j) <= 1.0 + 1e-6);
            }
        }
    }
    SUBCASE("dimension mismatch is rejected") {
        const auto a = batch_from({1, 0}, 1, 2);
        const auto b = batch_from({1, 0, 0}, 1, 3);
        CHECK_THROWS_AS(cosine_similarity_matrix(a, b), Error);
    }
}

TEST_CASE("symmetric InfoNCE hand values") {
    SUBCASE("single pair scores zero") {
        Tensor<double> row({1, 4});
        row.data = {1, 0, 0, 0};
        CHECK(info_nce(row, row, 0.07) == doctest::Approx(0.0));
    }
    SUBCASE("all-equal similarities give ln N") {
        Tensor<double> hp({4, 3}), he({4, 3});
        for (int i = 0; i < 4; ++i) {
            hp.at(i * 3) = 1.0;
            he.at(i * 3) = 1.0;
        }
        CHECK(info_nce(hp, he, 0.07) == doctest::Approx(std::log(4.0)).epsilon(1e-9));
        CHECK(info_nce(hp, he, 0.5) == doctest::Approx(std::log(4.0)).epsilon(1e-9));
    }
    SUBCASE("N=2 identity similarities at tau=1") {
        Tensor<double> hp({2, 2}), he({2, 2});
        hp.data = {1, 0, 0, 1};
        he.data = {1, 0, 0, 1};
        // per query: -log(e / (e + 1)) = log(1 + 1/e)
        CHECK(info_nce(hp, he, 1.0) == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-9));
        CHECK(info_nce(hp, he, 1.0) == doctest::Approx(0.3133).epsilon(1e-3));
    }
    SUBCASE("non-positive temperature is rejected") {
        Tensor<double> hp({2, 2});
        hp.data = {1, 0, 0, 1};
        CHECK_THROWS_AS(info_nce(hp, hp, 0.0), Error);
        CHECK_THROWS_AS(info_nce(hp, hp, -0.1), Error);
    }
}

TEST_CASE("symmetric InfoNCE properties") {
    Rng rng(17);
    const std::int64_t n = 6, d = 8;
    Tensor<double> raw_p({n, d}), raw_e({n, d});
    for (auto& v : raw_p.data) v = rng.normal();
    for (auto& v : raw_e.data) v = rng.normal();
    const Tensor<double> hp = l2_normalize(EmbeddingBatch<double>{raw_p, EmbeddingSpace::kShared}).values;
    const Tensor<double> he = l2_normalize(EmbeddingBatch<double>{raw_e, EmbeddingSpace::kShared}).values;

    SUBCASE("swapping the modalities leaves the loss unchanged") {
        CHECK(info_nce(hp, he, 0.2) == doctest::Approx(info_nce(he, hp, 0.2)).epsilon(1e-12));
    }
    SUBCASE("a common permutation of both batches leaves the loss unchanged") {
        std::vector<std::int64_t> perm = {3, 1, 5, 0, 4, 2};
        Tensor<double> pp({n, d}), pe({n, d});
        for (std::int64_t i = 0; i < n; ++i) {
            std::copy_n(hp.ptr() + perm[static_cast<std::size_t>(i)] * d, d, pp.ptr() + i * d);
            std::copy_n(he.ptr() + perm[static_cast<std::size_t>(i)] * d, d, pe.ptr() + i * d);
        }
        CHECK(info_nce(pp, pe, 0.2) == doctest::Approx(info_nce(hp, he, 0.2)).epsilon(1e-9));
    }
    SUBCASE("loss is non-negative and approaches zero for dominant diagonals") {
        CHECK(info_nce(hp, he, 0.2) >= 0.0);
        CHECK(info_nce(hp, hp, 0.01) < 1e-6); // perfect alignment, sharp softmax
    }
    SUBCASE("for an aligned batch, smaller tau strictly lowers the loss") {
        const double l1 = info_nce(hp, hp, 0.5);
        const double l2 = info_nce(hp, hp, 0.2);
        const double l3 = info_nce(hp, hp, 0.05);
        CHECK(l2 < l1);
        CHECK(l3 < l2);
    }
}

TEST_CASE("temperature clamps into its safe range after updates") {
    Temperature<float> tau(0.07);
    CHECK(tau.value() == doctest::Approx(0.07));
    tau.var->value.at(0) = 2.5f;
    tau.clamp();
    CHECK(tau.value() == doctest::Approx(1.0));
    tau.var->value.at(0) = 1e-9f;
    tau.clamp();
    CHECK(tau.value() == doctest::Approx(1e-3));
}
