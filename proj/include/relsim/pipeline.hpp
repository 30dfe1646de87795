#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relsim/caption.hpp"
#include "relsim/embedding.hpp"
#include "relsim/rseb.hpp"

namespace relsim {

// ---------------------------------------------------------------------------
// Interestingness filter: a logistic-regression probe over image embeddings.

enum class Label { Ordinary = 0, Interesting = 1 };

struct LabeledExample {
    std::string id;
    Embedding embedding;
    Label label;
};

class FilterModel {
public:
    FilterModel(std::vector<double> weight, double bias);

    std::size_t dim() const noexcept { return weight_.size(); }
    std::span<const double> weight() const noexcept { return weight_; }
    double bias() const noexcept { return bias_; }

    double logit(std::span<const float> x) const;
    /// sigmoid(w·x + b).
    double score(std::span<const float> x) const;

private:
    std::vector<double> weight_;
    double bias_;
};

struct FilterTrainConfig {
    std::size_t epochs = 500;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
    double heldout_fraction = 0.2;
};

struct FilterTrainResult {
    FilterModel model;
    double heldout_accuracy;
    double train_accuracy;
    std::size_t train_count;
    std::size_t heldout_count;
    /// Mean cross-entropy on the training part before each epoch, plus the final value.
    std::vector<double> loss_history;
};

/// Full-batch gradient descent on cross-entropy over a seeded 80/20 split.
/// Throws SingleClass when only one label is present.
FilterTrainResult train_filter(const std::vector<LabeledExample>& examples,
                               const FilterTrainConfig& config = {});

struct FilterDecision {
    std::vector<std::string> kept;
    std::vector<double> scores;  // per input entry, input order
    double keep_rate;
};

/// Keeps an entry iff its score >= threshold; threshold must lie in (0, 1).
FilterDecision apply_filter(const FilterModel& model,
                            const std::vector<std::pair<std::string, Embedding>>& entries,
                            double threshold = 0.5);

/// RSEB section tag 2 with rows "filter/weight" and "filter/bias".
EmbeddingTable filter_to_table(const FilterModel& model);
FilterModel filter_from_table(const EmbeddingTable& table);

// ---------------------------------------------------------------------------
// Groups and dataset records.

inline constexpr std::size_t kMinGroupSize = 2;
inline constexpr std::size_t kMaxGroupSize = 10;

struct GroupRecord {
    std::string group_id;
    std::vector<std::string> image_ids;
    CaptionTemplate caption;
};

struct DatasetRecord {
    std::string image_id;
    std::string caption_raw;
    std::optional<std::string> group_id;
    bool operator==(const DatasetRecord&) const = default;
};

struct ExpandResult {
    std::vector<DatasetRecord> records;
    std::vector<std::string> warnings;
};

/// One record per image carrying its group's caption. Group sizes outside
/// [2, 10] produce warnings; repeated image ids throw DuplicateImageAcrossGroups.
ExpandResult expand_groups(const std::vector<GroupRecord>& groups);

struct Split {
    std::vector<DatasetRecord> train;
    std::vector<DatasetRecord> test;
};

/// Seeded shuffle, then the first round(test_fraction * n) records form the
/// test part. Throws Empty, InvalidArgument or InsufficientSplit.
Split split_dataset(const std::vector<DatasetRecord>& records, double test_fraction, std::uint64_t seed);

// JSON-lines interchange. Dataset lines: {"id":..., "caption":..., "group":...}.
// Group lines: {"group":..., "images":[...], "caption":...}.
// Label lines: {"id":..., "label":"interesting"|"ordinary"}.

std::vector<DatasetRecord> parse_dataset_jsonl(std::string_view text);
std::vector<DatasetRecord> load_dataset_jsonl(const std::string& path);
std::string dataset_to_jsonl(const std::vector<DatasetRecord>& records);
void save_dataset_jsonl(const std::vector<DatasetRecord>& records, const std::string& path);

std::vector<GroupRecord> parse_groups_jsonl(std::string_view text);
std::vector<GroupRecord> load_groups_jsonl(const std::string& path);

std::vector<std::pair<std::string, Label>> parse_labels_jsonl(std::string_view text);
std::vector<std::pair<std::string, Label>> load_labels_jsonl(const std::string& path);

/// image id -> group id, from either a groups file or a dataset file whose
/// records carry "group". Records without a group are skipped.
std::map<std::string, std::string> parse_group_map(std::string_view text);
std::map<std::string, std::string> load_group_map(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace relsim
