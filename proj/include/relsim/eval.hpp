#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relsim/embedding.hpp"
#include "relsim/index.hpp"
#include "relsim/rseb.hpp"

namespace relsim {

/// Relational similarity rating in [0, 10].
class JudgeScore {
public:
    explicit JudgeScore(int value);
    int value() const noexcept { return value_; }
    bool operator==(const JudgeScore&) const = default;

private:
    int value_;
};

/// Scores a (query, retrieved) pair. Implementations signal failure by throwing.
using JudgeFn = std::function<JudgeScore(const std::string& query_id, const std::string& retrieved_id)>;

/// Deterministic judge: 10 when both ids share a group, else 0.
class GroupOracleJudge {
public:
    explicit GroupOracleJudge(std::map<std::string, std::string> groups) : groups_(std::move(groups)) {}

    /// Throws UnknownId when either id has no group.
    JudgeScore operator()(const std::string& query_id, const std::string& retrieved_id) const;

    const std::map<std::string, std::string>& groups() const noexcept { return groups_; }

private:
    std::map<std::string, std::string> groups_;
};

JudgeScore oracle_group_judge(const std::string& query_id, const std::string& retrieved_id,
                              const std::map<std::string, std::string>& groups);

struct QueryJudgement {
    std::string query_id;
    std::string retrieved_id;       // empty when nothing could be retrieved
    std::optional<JudgeScore> score;  // nullopt on judge failure
    std::string error;
};

struct RetrievalEvalReport {
    std::vector<QueryJudgement> per_query;  // query order
    double mean = 0.0;                      // over successful judgements
    std::size_t count = 0;                  // == per_query.size()
    std::size_t failures = 0;
};

/// Top-1 retrieval (query excluded) per query, then one judge call per pair.
/// Judge calls fan out over at most max_concurrency threads; results keep
/// query order. Throws UnknownId for a query id missing from the index.
RetrievalEvalReport evaluate_retrieval(const std::vector<std::string>& queries, const VectorIndex& index,
                                       const JudgeFn& judge, std::size_t max_concurrency = 8);

/// Fraction of queries whose nearest other item shares their group, computed
/// by a direct scan that does not go through VectorIndex::top_k.
double same_group_recall_at_1(const std::vector<std::string>& queries, const VectorIndex& index,
                              const std::map<std::string, std::string>& groups);

// ---------------------------------------------------------------------------

enum class ABChoice { A, B, Same };
enum class Side { A, B };

struct ABRecord {
    std::string query_id;
    std::string candidate_a_id;
    std::string candidate_b_id;
    ABChoice choice;
    Side ours_is;
};

struct PreferenceSummary {
    double ours_rate = 0.0;
    double baseline_rate = 0.0;
    double tie_rate = 0.0;
    std::size_t ours = 0;
    std::size_t baseline = 0;
    std::size_t ties = 0;
    std::size_t total = 0;
};

/// Throws Empty, or InvalidArgument when a record compares a candidate with itself.
PreferenceSummary aggregate_ab(const std::vector<ABRecord>& records);

// ---------------------------------------------------------------------------

enum class QuadrantLabel {
    SameLogicSameLook,
    SameLogicDifferentLook,
    DifferentLogicSameLook,
    Random,
};

const char* quadrant_label_name(QuadrantLabel label) noexcept;

struct ScoredPoint {
    std::string id;
    double relational;
    double attribute;
};

struct QuadrantPoint {
    std::string id;
    double relational;
    double attribute;
    QuadrantLabel label;
};

struct QuadrantThresholds {
    double relational;
    double attribute;
};

QuadrantLabel classify_point(double relational, double attribute, const QuadrantThresholds& t) noexcept;

std::vector<QuadrantPoint> quadrant_classify(const std::vector<ScoredPoint>& points,
                                             const QuadrantThresholds& thresholds);

/// Value v such that the top ceil((1 - percentile) * n) values are >= v.
/// percentile in [0, 1); values nonempty.
double percentile_threshold(const std::vector<double>& values, double percentile);

QuadrantThresholds percentile_thresholds(const std::vector<ScoredPoint>& points, double percentile = 0.9);

/// Cosine of query_id against every other id present in both tables, in the
/// relational table's order. Rows are normalized before comparison.
std::vector<ScoredPoint> similarity_profile(const EmbeddingTable& relational, const EmbeddingTable& attribute,
                                            const std::string& query_id);

std::string quadrant_csv(const std::vector<QuadrantPoint>& points);

// ---------------------------------------------------------------------------

struct MeanStd {
    double mean;
    double std;  // population
};

MeanStd mean_std(const std::vector<double>& values);

using EmbeddingPair = std::pair<NormalizedEmbedding, NormalizedEmbedding>;

struct ModelOutputs {
    std::string model_name;
    std::vector<EmbeddingPair> relational;
    std::optional<std::vector<EmbeddingPair>> attribute;
    std::optional<std::vector<EmbeddingPair>> perceptual;
};

struct AnalogicalRow {
    std::string model_name;
    MeanStd relsim;
    std::optional<MeanStd> attribute;
    std::optional<MeanStd> perceptual;
};

/// One row per model in input order; each column is mean ± population std of
/// the input/output cosine over that model's pairs.
std::vector<AnalogicalRow> analogical_benchmark(const std::vector<ModelOutputs>& models);

// JSON serializations (schemas mirror the structs above).
std::string to_json(const RetrievalEvalReport& report);
std::string to_json(const PreferenceSummary& summary);
std::string to_json(const std::vector<AnalogicalRow>& rows);

}  // namespace relsim
