#pragma once

// Finite-difference oracle for the alignment loss. The forward pass here is
// written directly from the loss definition and shares no code with the
// trainer beyond reading the model's parameter vector.

#include <algorithm>
#include <cmath>
#include <vector>

#include "relsim/random.hpp"
#include "relsim/trainer.hpp"
#include "test_util.hpp"

namespace relsim::fixtures {

/// Plain (unstabilized) InfoNCE straight from the definition.
inline double reference_loss(const std::vector<double>& params, std::size_t d_in, std::size_t d_out, bool has_bias,
                             const Batch& batch, bool symmetric) {
    const std::size_t n = batch.size();
    const double tau = std::exp(params.back());
    std::vector<std::vector<double>> v(n, std::vector<double>(d_out, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = batch.base_features()[i].values();
        for (std::size_t c = 0; c < d_out; ++c) {
            double f = has_bias ? params[d_in * d_out + c] : 0.0;
            for (std::size_t a = 0; a < d_in; ++a) f += params[a * d_out + c] * x[a];
            v[i][c] = f;
        }
        double norm = 0.0;
        for (double f : v[i]) norm += f * f;
        norm = std::sqrt(norm);
        for (double& f : v[i]) f /= norm;
    }
    std::vector<std::vector<double>> s(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double c = 0.0;
            for (std::size_t k = 0; k < d_out; ++k) c += v[i][k] * batch.caption_embeddings()[j][k];
            s[i][j] = c / tau;
        }
    }
    double rows = 0.0;
    double cols = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        double col_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row_sum += std::exp(s[i][j]);
            col_sum += std::exp(s[j][i]);
        }
        rows += -std::log(std::exp(s[i][i]) / row_sum);
        cols += -std::log(std::exp(s[i][i]) / col_sum);
    }
    rows /= static_cast<double>(n);
    cols /= static_cast<double>(n);
    return symmetric ? 0.5 * (rows + cols) : rows;
}

struct GradientCase {
    AlignmentModel model;
    Batch batch;
};

inline GradientCase random_gradient_case(std::uint64_t seed, std::size_t batch_size, std::size_t d_in,
                                         std::size_t d_out) {
    Rng rng(seed);
    std::vector<double> weight(d_in * d_out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (double& w : weight) w = rng.uniform(-bound, bound);
    std::vector<double> bias(d_out);
    for (double& b : bias) b = 0.1 * rng.normal();
    const double log_tau = std::log(rng.uniform(0.05, 1.0));
    std::vector<Embedding> base;
    std::vector<NormalizedEmbedding> captions;
    for (std::size_t i = 0; i < batch_size; ++i) {
        base.emplace_back(random_vector(rng, d_in));
        captions.push_back(random_unit(rng, d_out));
    }
    return {AlignmentModel(d_in, d_out, std::move(weight), std::move(bias), log_tau),
            Batch(std::move(base), std::move(captions))};
}

struct GradientCheck {
    double max_relative_error = 0.0;
    double loss_difference = 0.0;  // |analytic-path loss - reference loss|
};

/// Central differences with step eps on every parameter; relative error uses
/// max(|analytic|, |numeric|) clamped below at 1e-8.
inline GradientCheck check_gradients(const GradientCase& c, bool symmetric, double eps = 1e-4) {
    const auto grads = loss_gradients(c.model, c.batch, symmetric);
    const auto analytic = grads.flat();
    const auto params = c.model.parameters();
    const auto d_in = c.model.d_in();
    const auto d_out = c.model.d_out();
    const bool has_bias = c.model.has_bias();

    GradientCheck out;
    out.loss_difference = std::abs(grads.loss - reference_loss(params, d_in, d_out, has_bias, c.batch, symmetric));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto plus = params;
        auto minus = params;
        plus[k] += eps;
        minus[k] -= eps;
        const double numeric = (reference_loss(plus, d_in, d_out, has_bias, c.batch, symmetric) -
                                reference_loss(minus, d_in, d_out, has_bias, c.batch, symmetric)) /
                               (2.0 * eps);
        const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
        out.max_relative_error = std::max(out.max_relative_error, std::abs(analytic[k] - numeric) / denom);
    }
    return out;
}

}  // namespace relsim::fixtures
