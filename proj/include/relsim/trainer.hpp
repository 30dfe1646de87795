#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relsim/embedding.hpp"
#include "relsim/rseb.hpp"

namespace relsim {

/// Linear projection head plus log-temperature. The head maps a frozen base
/// feature x (d_in) to f = Wᵀx + b (d_out); tau = exp(log_tau).
class AlignmentModel {
public:
    /// weight is row-major d_in × d_out. An empty bias means the head has none.
    AlignmentModel(std::size_t d_in, std::size_t d_out, std::vector<double> weight,
                   std::vector<double> bias, double log_tau);

    std::size_t d_in() const noexcept { return d_in_; }
    std::size_t d_out() const noexcept { return d_out_; }
    bool has_bias() const noexcept { return !bias_.empty(); }
    std::span<const double> weight() const noexcept { return weight_; }
    std::span<const double> bias() const noexcept { return bias_; }
    double weight_at(std::size_t in, std::size_t out) const { return weight_[in * d_out_ + out]; }
    double log_tau() const noexcept { return log_tau_; }
    double tau() const noexcept;

    /// Flat parameter vector: weight, then bias, then log_tau.
    std::vector<double> parameters() const;
    AlignmentModel with_parameters(std::span<const double> flat) const;
    std::size_t parameter_count() const noexcept { return weight_.size() + bias_.size() + 1; }

    bool operator==(const AlignmentModel&) const = default;

private:
    std::size_t d_in_;
    std::size_t d_out_;
    std::vector<double> weight_;
    std::vector<double> bias_;
    double log_tau_;
};

/// Head output Wᵀx + b in double precision, before normalization.
std::vector<double> project_raw(const AlignmentModel& model, std::span<const float> x);

/// normalize(Wᵀx + b). Throws DimMismatch or ZeroVector.
NormalizedEmbedding project(const AlignmentModel& model, const Embedding& x);

/// Aligned (base feature, caption embedding) pairs; index i pairs with index i.
class Batch {
public:
    Batch(std::vector<Embedding> base_features, std::vector<NormalizedEmbedding> caption_embeddings);

    std::size_t size() const noexcept { return base_.size(); }
    const std::vector<Embedding>& base_features() const noexcept { return base_; }
    const std::vector<NormalizedEmbedding>& caption_embeddings() const noexcept { return captions_; }

private:
    std::vector<Embedding> base_;
    std::vector<NormalizedEmbedding> captions_;
};

/// Image-to-text InfoNCE: mean over rows of -log softmax(s_i·)[i] with
/// s_ij = v_i·t_j / tau. With symmetric = true the text-to-image term is
/// averaged in.
double info_nce_loss(std::span<const NormalizedEmbedding> images,
                     std::span<const NormalizedEmbedding> texts, double tau, bool symmetric = false);

struct Gradients {
    std::vector<double> weight;  // d_in × d_out, row-major
    std::vector<double> bias;    // empty when the model has no bias
    double log_tau = 0.0;
    double loss = 0.0;

    std::vector<double> flat() const;
};

/// Loss and its analytic gradient with respect to every model parameter,
/// back-propagated through the normalization and the temperature.
Gradients loss_gradients(const AlignmentModel& model, const Batch& batch, bool symmetric = false);

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t steps = 1000;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    bool symmetric_loss = false;
    double tau_init = 0.07;
    bool use_bias = true;
    /// Start from W = I (requires d_in == d_out) instead of the seeded uniform init.
    bool identity_init = false;

    /// Throws InvalidArgument when a field is out of range.
    void validate() const;
};

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Optimizer moments carried alongside the model between steps.
struct OptimizerState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;
};

AlignmentModel step(const AlignmentModel& model, const Gradients& grads, const TrainConfig& config,
                    OptimizerState& state);

/// Flat-vector form of the update rule, shared with step().
std::vector<double> optimizer_update(std::span<const double> params, std::span<const double> grads,
                                     OptimizerKind kind, double learning_rate, OptimizerState& state,
                                     const AdamParams& adam = {});

struct TrainingPair {
    Embedding base;
    NormalizedEmbedding caption;
};

struct TrainLogEntry {
    std::size_t step;
    double loss;
    double tau;
    bool operator==(const TrainLogEntry&) const = default;
};

struct TrainLog {
    std::vector<TrainLogEntry> entries;
    AlignmentModel model;
};

/// {"step":..,"loss":..,"tau":..} with round-trip precision.
std::string to_json_line(const TrainLogEntry& entry);
/// {"final_model":path}, the closing line of a training log.
std::string final_model_line(const std::string& model_path);
/// One to_json_line per entry, each newline-terminated, then
/// final_model_line when a model path is given.
std::string to_jsonl(const std::vector<TrainLogEntry>& entries, const std::string& model_path = {});

/// Seeded initial model: W ~ U(-1/sqrt(d_in), 1/sqrt(d_in)), b = 0, log_tau = ln(tau_init).
AlignmentModel initial_model(std::size_t d_in, std::size_t d_out, const TrainConfig& config);

using TrainObserver = std::function<void(const TrainLogEntry&)>;

/// Runs config.steps optimizer steps over seeded per-epoch shuffles. Each
/// logged loss and tau are the values before that step's update.
TrainLog train(const std::vector<TrainingPair>& dataset, const TrainConfig& config,
               const TrainObserver& observer = {});

/// Model persistence in the RSEB container (section tag 2). Rows are
/// "weight/<i>" for each input dim, "bias" when present, and "log_tau".
EmbeddingTable model_to_table(const AlignmentModel& model);
AlignmentModel model_from_table(const EmbeddingTable& table);
void save_model(const AlignmentModel& model, const std::string& path);
AlignmentModel load_model(const std::string& path);

}  // namespace relsim
