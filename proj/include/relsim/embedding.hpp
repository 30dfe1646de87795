#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace relsim {

/// Norms at or below this are rejected by normalize().
inline constexpr double kZeroNormThreshold = 1e-12;

/// Allowed deviation of a NormalizedEmbedding's L2 norm from 1.
inline constexpr double kUnitNormTolerance = 1e-6;

/// Raw encoder output. Stored as float32, dim >= 1, every entry finite.
class Embedding {
public:
    explicit Embedding(std::vector<float> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }
    float operator[](std::size_t i) const { return values_[i]; }

private:
    std::vector<float> values_;
};

/// Unit-length embedding. The only ways to obtain one are normalize() and
/// from_unit(), both of which enforce the norm invariant.
class NormalizedEmbedding {
public:
    /// Wraps values that are already unit length; throws Corrupt otherwise.
    static NormalizedEmbedding from_unit(std::vector<float> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }
    float operator[](std::size_t i) const { return values_[i]; }

private:
    explicit NormalizedEmbedding(std::vector<float> values) : values_(std::move(values)) {}
    friend NormalizedEmbedding normalize(std::span<const double> values);

    std::vector<float> values_;
};

/// L2 norm accumulated in double, index-ascending.
double l2_norm(std::span<const float> values) noexcept;
double l2_norm(std::span<const double> values) noexcept;

/// Dot product accumulated in double, index-ascending. Sizes must match.
double dot(std::span<const float> a, std::span<const float> b);

NormalizedEmbedding normalize(const Embedding& e);
NormalizedEmbedding normalize(std::span<const float> values);
NormalizedEmbedding normalize(std::span<const double> values);

double cosine(const NormalizedEmbedding& a, const NormalizedEmbedding& b);

/// Row-major scores s(i,j) = cosine(V_i, T_j) / temperature.
class SimilarityMatrix {
public:
    SimilarityMatrix(std::size_t rows, std::size_t cols, double temperature,
                     std::vector<double> entries);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double temperature() const noexcept { return temperature_; }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }
    std::span<const double> entries() const noexcept { return entries_; }

private:
    std::size_t rows_;
    std::size_t cols_;
    double temperature_;
    std::vector<double> entries_;
};

SimilarityMatrix similarity_matrix(std::span<const NormalizedEmbedding> images,
                                   std::span<const NormalizedEmbedding> texts, double tau);

}  // namespace relsim
