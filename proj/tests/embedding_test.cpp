#include <gtest/gtest.h>

#include <cmath>

#include "relsim/embedding.hpp"
#include "relsim/error.hpp"
#include "test_util.hpp"

using namespace relsim;
using relsim::fixtures::random_unit;
using relsim::fixtures::random_vector;

namespace {

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Ok;
}

}  // namespace

TEST(Normalize, PythagoreanTriple) {
    const auto n = normalize(Embedding({3.0f, 4.0f}));
    EXPECT_FLOAT_EQ(n[0], 0.6f);
    EXPECT_FLOAT_EQ(n[1], 0.8f);
}

TEST(Normalize, AxisVector) {
    const auto n = normalize(Embedding({0.0f, 0.0f, 5.0f}));
    EXPECT_EQ(n[0], 0.0f);
    EXPECT_EQ(n[1], 0.0f);
    EXPECT_EQ(n[2], 1.0f);
}

TEST(Normalize, RandomVectorHasUnitNormByWideSummation) {
    Rng rng(7);
    const auto n = normalize(Embedding(random_vector(rng, 32)));
    long double sum = 0.0L;
    for (float v : n.values()) sum += static_cast<long double>(v) * v;
    // float storage bounds the attainable accuracy at ~1e-7 relative.
    EXPECT_NEAR(static_cast<double>(sum), 1.0, 1e-6);
}

TEST(Normalize, ZeroVectorRejected) {
    EXPECT_EQ(code_of([] { normalize(Embedding({0.0f, 0.0f})); }), ErrorCode::ZeroVector);
    EXPECT_EQ(code_of([] { normalize(Embedding({1e-30f, 0.0f})); }), ErrorCode::ZeroVector);
}

TEST(Embedding, RejectsNonFiniteAndEmpty) {
    EXPECT_EQ(code_of([] { Embedding({NAN}); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { Embedding({INFINITY, 1.0f}); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { Embedding(std::vector<float>{}); }), ErrorCode::InvalidArgument);
}

TEST(NormalizedEmbedding, FromUnitChecksNorm) {
    EXPECT_NO_THROW(NormalizedEmbedding::from_unit({0.6f, 0.8f}));
    EXPECT_EQ(code_of([] { NormalizedEmbedding::from_unit({0.6f, 0.9f}); }), ErrorCode::Corrupt);
}

TEST(Cosine, Examples) {
    Rng rng(1);
    const auto u = random_unit(rng, 16);
    EXPECT_NEAR(cosine(u, u), 1.0, 1e-6);
    EXPECT_EQ(cosine(normalize(Embedding({1.0f, 0.0f})), normalize(Embedding({0.0f, 1.0f}))), 0.0);
    const auto a = NormalizedEmbedding::from_unit({0.6f, 0.8f});
    const auto b = NormalizedEmbedding::from_unit({0.8f, 0.6f});
    EXPECT_NEAR(cosine(a, b), 0.96, 1e-7);
}

TEST(Cosine, DimMismatch) {
    const auto a = NormalizedEmbedding::from_unit({1.0f, 0.0f});
    const auto b = NormalizedEmbedding::from_unit({1.0f, 0.0f, 0.0f});
    EXPECT_EQ(code_of([&] { cosine(a, b); }), ErrorCode::DimMismatch);
}

TEST(SimilarityMatrix, SingleEntryAndScaling) {
    const auto u = NormalizedEmbedding::from_unit({0.6f, 0.8f});
    const std::vector<NormalizedEmbedding> v{u};
    EXPECT_NEAR(similarity_matrix(v, v, 1.0)(0, 0), 1.0, 1e-7);
    EXPECT_NEAR(similarity_matrix(v, v, 0.5)(0, 0), 2.0, 2e-7);
}

TEST(SimilarityMatrix, MatchesDoubleLoopOracle) {
    Rng rng(3);
    std::vector<NormalizedEmbedding> v;
    std::vector<NormalizedEmbedding> t;
    for (int i = 0; i < 3; ++i) v.push_back(random_unit(rng, 5));
    for (int j = 0; j < 2; ++j) t.push_back(random_unit(rng, 5));
    const double tau = 0.3;
    const auto m = similarity_matrix(v, t, tau);
    ASSERT_EQ(m.rows(), 3u);
    ASSERT_EQ(m.cols(), 2u);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            double d = 0.0;
            for (std::size_t k = 0; k < 5; ++k) d += static_cast<double>(v[i][k]) * t[j][k];
            EXPECT_NEAR(m(i, j), d / tau, 1e-12);
        }
    }
}

TEST(SimilarityMatrix, Errors) {
    const std::vector<NormalizedEmbedding> a{NormalizedEmbedding::from_unit({1.0f, 0.0f})};
    const std::vector<NormalizedEmbedding> b{NormalizedEmbedding::from_unit({1.0f, 0.0f, 0.0f})};
    EXPECT_EQ(code_of([&] { similarity_matrix(a, a, 0.0); }), ErrorCode::NonPositiveTemperature);
    EXPECT_EQ(code_of([&] { similarity_matrix(a, a, -1.0); }), ErrorCode::NonPositiveTemperature);
    EXPECT_EQ(code_of([&] { similarity_matrix(a, b, 1.0); }), ErrorCode::DimMismatch);
}

TEST(CoreProperties, RandomizedInvariants) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t dim = 1 + rng.below(64);
        const auto e = Embedding(random_vector(rng, dim, 1.0 + 100.0 * rng.uniform01()));
        const auto n1 = normalize(e);
        const auto n2 = normalize(n1.values());
        for (std::size_t k = 0; k < dim; ++k) EXPECT_NEAR(n1[k], n2[k], 1e-9);

        const auto a = random_unit(rng, dim);
        const auto b = random_unit(rng, dim);
        EXPECT_EQ(cosine(a, b), cosine(b, a));
        EXPECT_LE(std::abs(cosine(a, b)), 1.0 + 1e-6);

        const std::vector<NormalizedEmbedding> vs{a, b};
        const std::vector<NormalizedEmbedding> ts{b, n1};
        const double tau = 0.01 + rng.uniform01();
        const auto scaled = similarity_matrix(vs, ts, tau);
        const auto unit = similarity_matrix(vs, ts, 1.0);
        for (std::size_t i = 0; i < scaled.entries().size(); ++i) {
            EXPECT_NEAR(scaled.entries()[i], unit.entries()[i] / tau, 1e-12 * (1.0 + std::abs(scaled.entries()[i])));
        }
    }
}
