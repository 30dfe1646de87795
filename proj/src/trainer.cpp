#include "relsim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <nlohmann/json.hpp>

#include "relsim/error.hpp"
#include "relsim/random.hpp"

namespace relsim {

namespace {

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::string dims(std::size_t a, std::size_t b) {
    return std::to_string(a) + " vs " + std::to_string(b);
}

void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        fail(ErrorCode::NonPositiveTemperature, "temperature must be finite and > 0");
    }
}

// Row-major B×B matrix of unscaled cosines c_ij = v_i·t_j.
using Square = std::vector<double>;

// Cross-entropy of the diagonal under a softmax over each row of s (row-max
// subtracted). Fills probs with the softmax; returns the summed row losses.
double softmax_rows(const Square& s, std::size_t n, Square& probs) {
    probs.assign(n * n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = &s[i * n];
        const double max = *std::max_element(row, row + n);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            probs[i * n + j] = std::exp(row[j] - max);
            sum += probs[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= sum;
        total += (max + std::log(sum)) - row[i];
    }
    return total;
}

Square transpose(const Square& m, std::size_t n) {
    Square t(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) t[j * n + i] = m[i * n + j];
    }
    return t;
}

struct LossTerms {
    double loss;
    Square coeff;  // dL/ds_ij
};

// Loss and dL/ds for a square score matrix s (already divided by tau).
LossTerms contrastive_terms(const Square& s, std::size_t n, bool symmetric) {
    const double inv_n = 1.0 / static_cast<double>(n);
    Square row_probs;
    const double row_loss = softmax_rows(s, n, row_probs) * inv_n;

    LossTerms out{row_loss, Square(n * n)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.coeff[i * n + j] = (row_probs[i * n + j] - (i == j ? 1.0 : 0.0)) * inv_n;
        }
    }
    if (!symmetric) return out;

    Square col_probs_t;
    const double col_loss = softmax_rows(transpose(s, n), n, col_probs_t) * inv_n;
    out.loss = 0.5 * (row_loss + col_loss);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            // col_probs_t[j][i] is the softmax over i of column j.
            const double col = (col_probs_t[j * n + i] - (i == j ? 1.0 : 0.0)) * inv_n;
            out.coeff[i * n + j] = 0.5 * (out.coeff[i * n + j] + col);
        }
    }
    return out;
}

}  // namespace

AlignmentModel::AlignmentModel(std::size_t d_in, std::size_t d_out, std::vector<double> weight,
                               std::vector<double> bias, double log_tau)
    : d_in_(d_in), d_out_(d_out), weight_(std::move(weight)), bias_(std::move(bias)), log_tau_(log_tau) {
    if (d_in_ == 0 || d_out_ == 0) fail(ErrorCode::InvalidArgument, "model dims must be >= 1");
    if (weight_.size() != d_in_ * d_out_) {
        fail(ErrorCode::DimMismatch, "weight has " + std::to_string(weight_.size()) +
                                         " entries, expected " + std::to_string(d_in_ * d_out_));
    }
    if (!bias_.empty() && bias_.size() != d_out_) {
        fail(ErrorCode::DimMismatch, "bias dim " + dims(bias_.size(), d_out_));
    }
    if (!all_finite(weight_) || !all_finite(bias_) || !std::isfinite(log_tau_)) {
        fail(ErrorCode::InvalidArgument, "model parameters must be finite");
    }
}

double AlignmentModel::tau() const noexcept { return std::exp(log_tau_); }

std::vector<double> AlignmentModel::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    flat.insert(flat.end(), weight_.begin(), weight_.end());
    flat.insert(flat.end(), bias_.begin(), bias_.end());
    flat.push_back(log_tau_);
    return flat;
}

AlignmentModel AlignmentModel::with_parameters(std::span<const double> flat) const {
    if (flat.size() != parameter_count()) {
        fail(ErrorCode::DimMismatch, "parameter count " + dims(flat.size(), parameter_count()));
    }
    const auto w_end = flat.begin() + static_cast<std::ptrdiff_t>(weight_.size());
    const auto b_end = w_end + static_cast<std::ptrdiff_t>(bias_.size());
    return AlignmentModel(d_in_, d_out_, std::vector<double>(flat.begin(), w_end),
                          std::vector<double>(w_end, b_end), flat.back());
}

std::vector<double> project_raw(const AlignmentModel& model, std::span<const float> x) {
    if (x.size() != model.d_in()) {
        fail(ErrorCode::DimMismatch, "feature dim " + dims(x.size(), model.d_in()));
    }
    std::vector<double> f(model.d_out(), 0.0);
    if (model.has_bias()) std::copy(model.bias().begin(), model.bias().end(), f.begin());
    const auto w = model.weight();
    for (std::size_t a = 0; a < model.d_in(); ++a) {
        const double xa = x[a];
        const double* row = &w[a * model.d_out()];
        for (std::size_t c = 0; c < model.d_out(); ++c) f[c] += xa * row[c];
    }
    return f;
}

NormalizedEmbedding project(const AlignmentModel& model, const Embedding& x) {
    const auto f = project_raw(model, x.values());
    return normalize(std::span<const double>(f));
}

Batch::Batch(std::vector<Embedding> base_features, std::vector<NormalizedEmbedding> caption_embeddings)
    : base_(std::move(base_features)), captions_(std::move(caption_embeddings)) {
    if (base_.empty()) fail(ErrorCode::Empty, "batch must hold at least one pair");
    if (base_.size() != captions_.size()) {
        fail(ErrorCode::DimMismatch, "batch lengths " + dims(base_.size(), captions_.size()));
    }
    for (const auto& x : base_) {
        if (x.dim() != base_.front().dim()) fail(ErrorCode::DimMismatch, "inconsistent base feature dims");
    }
    for (const auto& t : captions_) {
        if (t.dim() != captions_.front().dim()) fail(ErrorCode::DimMismatch, "inconsistent caption dims");
    }
}

double info_nce_loss(std::span<const NormalizedEmbedding> images,
                     std::span<const NormalizedEmbedding> texts, double tau, bool symmetric) {
    check_tau(tau);
    if (images.size() != texts.size()) {
        fail(ErrorCode::DimMismatch, "batch lengths " + dims(images.size(), texts.size()));
    }
    if (images.empty()) fail(ErrorCode::Empty, "batch must hold at least one pair");
    for (const auto& e : images) {
        if (e.dim() != texts.front().dim()) fail(ErrorCode::DimMismatch, "image/text dims differ");
    }
    for (const auto& e : texts) {
        if (e.dim() != texts.front().dim()) fail(ErrorCode::DimMismatch, "inconsistent text dims");
    }
    const auto sim = similarity_matrix(images, texts, tau);
    const Square s(sim.entries().begin(), sim.entries().end());
    return contrastive_terms(s, images.size(), symmetric).loss;
}

std::vector<double> Gradients::flat() const {
    std::vector<double> out(weight.begin(), weight.end());
    out.insert(out.end(), bias.begin(), bias.end());
    out.push_back(log_tau);
    return out;
}

Gradients loss_gradients(const AlignmentModel& model, const Batch& batch, bool symmetric) {
    const std::size_t n = batch.size();
    const std::size_t d_in = model.d_in();
    const std::size_t d_out = model.d_out();
    if (batch.caption_embeddings().front().dim() != d_out) {
        fail(ErrorCode::DimMismatch, "caption dim " + dims(batch.caption_embeddings().front().dim(), d_out));
    }
    const double tau = model.tau();
    check_tau(tau);

    // Forward: f_i, its norm, v_i = f_i/|f_i|, and caption rows widened to double.
    std::vector<std::vector<double>> v(n);
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = project_raw(model, batch.base_features()[i].values());
        norms[i] = l2_norm(std::span<const double>(v[i]));
        if (norms[i] <= kZeroNormThreshold) fail(ErrorCode::ZeroVector, "projection vanished for pair " + std::to_string(i));
        for (double& x : v[i]) x /= norms[i];
    }
    std::vector<std::vector<double>> t(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto row = batch.caption_embeddings()[j].values();
        t[j].assign(row.begin(), row.end());
    }

    Square s(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double c = 0.0;
            for (std::size_t k = 0; k < d_out; ++k) c += v[i][k] * t[j][k];
            s[i * n + j] = c / tau;
        }
    }
    const auto terms = contrastive_terms(s, n, symmetric);

    Gradients g;
    g.loss = terms.loss;
    g.weight.assign(d_in * d_out, 0.0);
    if (model.has_bias()) g.bias.assign(d_out, 0.0);

    // s_ij = c_ij / exp(log_tau)  =>  ds_ij/dlog_tau = -s_ij.
    for (std::size_t idx = 0; idx < n * n; ++idx) g.log_tau -= terms.coeff[idx] * s[idx];

    std::vector<double> grad_v(d_out);
    std::vector<double> grad_f(d_out);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(grad_v.begin(), grad_v.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double coeff = terms.coeff[i * n + j] / tau;
            for (std::size_t k = 0; k < d_out; ++k) grad_v[k] += coeff * t[j][k];
        }
        // Through v = f/|f|: grad_f = (I - v vᵀ) grad_v / |f|.
        double radial = 0.0;
        for (std::size_t k = 0; k < d_out; ++k) radial += v[i][k] * grad_v[k];
        for (std::size_t k = 0; k < d_out; ++k) grad_f[k] = (grad_v[k] - radial * v[i][k]) / norms[i];

        const auto x = batch.base_features()[i].values();
        for (std::size_t a = 0; a < d_in; ++a) {
            const double xa = x[a];
            double* row = &g.weight[a * d_out];
            for (std::size_t k = 0; k < d_out; ++k) row[k] += xa * grad_f[k];
        }
        if (model.has_bias()) {
            for (std::size_t k = 0; k < d_out; ++k) g.bias[k] += grad_f[k];
        }
    }
    return g;
}

void TrainConfig::validate() const {
    if (batch_size < 2) fail(ErrorCode::InvalidArgument, "batch_size must be >= 2");
    if (steps < 1) fail(ErrorCode::InvalidArgument, "steps must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        fail(ErrorCode::InvalidArgument, "learning_rate must be finite and > 0");
    }
    if (!(tau_init > 0.0) || !std::isfinite(tau_init)) {
        fail(ErrorCode::NonPositiveTemperature, "tau_init must be finite and > 0");
    }
}

std::vector<double> optimizer_update(std::span<const double> params, std::span<const double> grads,
                                     OptimizerKind kind, double learning_rate, OptimizerState& state,
                                     const AdamParams& adam) {
    if (params.size() != grads.size()) {
        fail(ErrorCode::DimMismatch, "gradient count " + dims(grads.size(), params.size()));
    }
    std::vector<double> out(params.begin(), params.end());
    state.step_count += 1;
    if (kind == OptimizerKind::Sgd) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] -= learning_rate * grads[k];
        return out;
    }

    if (state.first_moment.size() != params.size()) {
        state.first_moment.assign(params.size(), 0.0);
        state.second_moment.assign(params.size(), 0.0);
    }
    const auto t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(adam.beta1, t);
    const double correction2 = 1.0 - std::pow(adam.beta2, t);
    for (std::size_t k = 0; k < out.size(); ++k) {
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        m = adam.beta1 * m + (1.0 - adam.beta1) * grads[k];
        v = adam.beta2 * v + (1.0 - adam.beta2) * grads[k] * grads[k];
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        out[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + adam.epsilon);
    }
    return out;
}

AlignmentModel step(const AlignmentModel& model, const Gradients& grads, const TrainConfig& config,
                    OptimizerState& state) {
    if (grads.weight.size() != model.weight().size() || grads.bias.size() != model.bias().size()) {
        fail(ErrorCode::DimMismatch, "gradient shapes do not match the model");
    }
    const auto params = model.parameters();
    const auto flat = grads.flat();
    return model.with_parameters(
        optimizer_update(params, flat, config.optimizer, config.learning_rate, state));
}

AlignmentModel initial_model(std::size_t d_in, std::size_t d_out, const TrainConfig& config) {
    config.validate();
    std::vector<double> weight(d_in * d_out, 0.0);
    if (config.identity_init) {
        if (d_in != d_out) fail(ErrorCode::DimMismatch, "identity init needs d_in == d_out");
        for (std::size_t k = 0; k < d_in; ++k) weight[k * d_out + k] = 1.0;
    } else {
        Rng rng(config.seed);
        const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
        for (double& w : weight) w = rng.uniform(-bound, bound);
    }
    std::vector<double> bias;
    if (config.use_bias) bias.assign(d_out, 0.0);
    return AlignmentModel(d_in, d_out, std::move(weight), std::move(bias), std::log(config.tau_init));
}

TrainLog train(const std::vector<TrainingPair>& dataset, const TrainConfig& config,
               const TrainObserver& observer) {
    config.validate();
    if (dataset.empty()) fail(ErrorCode::Empty, "training dataset is empty");
    if (dataset.size() < 2) fail(ErrorCode::Empty, "training needs at least 2 pairs to form a batch");
    const std::size_t d_in = dataset.front().base.dim();
    const std::size_t d_out = dataset.front().caption.dim();
    for (const auto& p : dataset) {
        if (p.base.dim() != d_in || p.caption.dim() != d_out) {
            fail(ErrorCode::DimMismatch, "inconsistent dims in training dataset");
        }
    }

    auto model = initial_model(d_in, d_out, config);
    // Shuffling draws from a stream separate from initialization.
    Rng shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);
    std::size_t cursor = 0;

    OptimizerState state;
    TrainLog log{{}, model};
    log.entries.reserve(config.steps);
    for (std::size_t s = 0; s < config.steps; ++s) {
        if (dataset.size() - cursor < 2) {
            shuffle_rng.shuffle(order);
            cursor = 0;
        }
        const std::size_t end = std::min(cursor + config.batch_size, dataset.size());
        std::vector<Embedding> base;
        std::vector<NormalizedEmbedding> captions;
        for (std::size_t k = cursor; k < end; ++k) {
            base.push_back(dataset[order[k]].base);
            captions.push_back(dataset[order[k]].caption);
        }
        cursor = end;

        const auto grads = loss_gradients(model, Batch(std::move(base), std::move(captions)),
                                          config.symmetric_loss);
        if (!std::isfinite(grads.loss)) fail(ErrorCode::Internal, "loss became non-finite at step " + std::to_string(s));
        const TrainLogEntry entry{s, grads.loss, model.tau()};
        log.entries.push_back(entry);
        if (observer) observer(entry);
        model = step(model, grads, config, state);
    }
    log.model = std::move(model);
    return log;
}

EmbeddingTable model_to_table(const AlignmentModel& model) {
    EmbeddingTable table(SectionTag::Model, static_cast<std::uint32_t>(model.d_out()));
    std::vector<float> row(model.d_out());
    for (std::size_t a = 0; a < model.d_in(); ++a) {
        for (std::size_t c = 0; c < model.d_out(); ++c) row[c] = static_cast<float>(model.weight_at(a, c));
        table.append("weight/" + std::to_string(a), row);
    }
    if (model.has_bias()) {
        for (std::size_t c = 0; c < model.d_out(); ++c) row[c] = static_cast<float>(model.bias()[c]);
        table.append("bias", row);
    }
    std::fill(row.begin(), row.end(), 0.0f);
    row[0] = static_cast<float>(model.log_tau());
    table.append("log_tau", row);
    return table;
}

AlignmentModel model_from_table(const EmbeddingTable& table) {
    if (table.tag() != SectionTag::Model) fail(ErrorCode::Corrupt, "not a model section");
    if (!table.contains("log_tau")) fail(ErrorCode::Corrupt, "model has no log_tau row");
    const bool has_bias = table.contains("bias");
    const std::size_t d_in = table.size() - 1 - (has_bias ? 1 : 0);
    const std::size_t d_out = table.dim();
    if (d_in == 0) fail(ErrorCode::Corrupt, "model has no weight rows");

    std::vector<double> weight;
    weight.reserve(d_in * d_out);
    for (std::size_t a = 0; a < d_in; ++a) {
        const auto name = "weight/" + std::to_string(a);
        if (!table.contains(name)) fail(ErrorCode::Corrupt, "model is missing row " + name);
        const auto row = table.row(table.position(name));
        weight.insert(weight.end(), row.begin(), row.end());
    }
    std::vector<double> bias;
    if (has_bias) {
        const auto row = table.row(table.position("bias"));
        bias.assign(row.begin(), row.end());
    }
    const double log_tau = table.row(table.position("log_tau"))[0];
    return AlignmentModel(d_in, d_out, std::move(weight), std::move(bias), log_tau);
}

void save_model(const AlignmentModel& model, const std::string& path) {
    save_rseb(model_to_table(model), path);
}

AlignmentModel load_model(const std::string& path) { return model_from_table(load_rseb(path)); }

std::string to_json_line(const TrainLogEntry& entry) {
    return nlohmann::ordered_json{{"step", entry.step}, {"loss", entry.loss}, {"tau", entry.tau}}.dump();
}

std::string final_model_line(const std::string& model_path) {
    return nlohmann::ordered_json{{"final_model", model_path}}.dump();
}

std::string to_jsonl(const std::vector<TrainLogEntry>& entries, const std::string& model_path) {
    std::string out;
    for (const auto& e : entries) out += to_json_line(e) + "\n";
    if (!model_path.empty()) out += final_model_line(model_path) + "\n";
    return out;
}

}  // namespace relsim
