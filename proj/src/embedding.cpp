#include "relsim/embedding.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "relsim/error.hpp"

namespace relsim {

namespace {

template <typename T>
void require_finite(std::span<const T> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            fail(ErrorCode::InvalidArgument,
                 "embedding entry " + std::to_string(i) + " is not finite");
        }
    }
}

}  // namespace

Embedding::Embedding(std::vector<float> values) : values_(std::move(values)) {
    if (values_.empty()) fail(ErrorCode::InvalidArgument, "embedding dim must be >= 1");
    require_finite<float>(values_);
}

NormalizedEmbedding NormalizedEmbedding::from_unit(std::vector<float> values) {
    if (values.empty()) fail(ErrorCode::InvalidArgument, "embedding dim must be >= 1");
    require_finite<float>(values);
    const double norm = l2_norm(std::span<const float>(values));
    if (std::abs(norm - 1.0) > kUnitNormTolerance) {
        fail(ErrorCode::Corrupt, "vector norm " + std::to_string(norm) + " is not unit length");
    }
    return NormalizedEmbedding(std::move(values));
}

double l2_norm(std::span<const float> values) noexcept {
    double sum = 0.0;
    for (float v : values) sum += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(sum);
}

double l2_norm(std::span<const double> values) noexcept {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        fail(ErrorCode::DimMismatch, "dot of dims " + std::to_string(a.size()) + " and " +
                                         std::to_string(b.size()));
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        sum += static_cast<double>(a[k]) * static_cast<double>(b[k]);
    }
    return sum;
}

NormalizedEmbedding normalize(std::span<const double> values) {
    if (values.empty()) fail(ErrorCode::InvalidArgument, "embedding dim must be >= 1");
    require_finite<double>(values);
    const double norm = l2_norm(values);
    if (norm <= kZeroNormThreshold) fail(ErrorCode::ZeroVector, "cannot normalize a zero vector");
    std::vector<float> out(values.size());
    // Already unit length at float precision: rescaling could only move
    // entries by an ulp, so keep them and stay exactly idempotent.
    if (std::abs(norm - 1.0) <= std::numeric_limits<float>::epsilon()) {
        for (std::size_t k = 0; k < values.size(); ++k) out[k] = static_cast<float>(values[k]);
        return NormalizedEmbedding(std::move(out));
    }
    for (std::size_t k = 0; k < values.size(); ++k) out[k] = static_cast<float>(values[k] / norm);
    return NormalizedEmbedding(std::move(out));
}

NormalizedEmbedding normalize(std::span<const float> values) {
    std::vector<double> wide(values.begin(), values.end());
    return normalize(std::span<const double>(wide));
}

NormalizedEmbedding normalize(const Embedding& e) { return normalize(e.values()); }

double cosine(const NormalizedEmbedding& a, const NormalizedEmbedding& b) {
    return dot(a.values(), b.values());
}

SimilarityMatrix::SimilarityMatrix(std::size_t rows, std::size_t cols, double temperature,
                                   std::vector<double> entries)
    : rows_(rows), cols_(cols), temperature_(temperature), entries_(std::move(entries)) {
    if (!(temperature_ > 0.0)) {
        fail(ErrorCode::NonPositiveTemperature, "temperature must be > 0");
    }
    if (entries_.size() != rows_ * cols_) {
        fail(ErrorCode::InvalidArgument, "similarity matrix entry count does not match shape");
    }
}

SimilarityMatrix similarity_matrix(std::span<const NormalizedEmbedding> images,
                                   std::span<const NormalizedEmbedding> texts, double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        fail(ErrorCode::NonPositiveTemperature, "temperature must be finite and > 0");
    }
    std::vector<double> entries;
    entries.reserve(images.size() * texts.size());
    for (const auto& v : images) {
        for (const auto& t : texts) entries.push_back(cosine(v, t) / tau);
    }
    return SimilarityMatrix(images.size(), texts.size(), tau, std::move(entries));
}

}  // namespace relsim
