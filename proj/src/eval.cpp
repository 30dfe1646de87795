#include "relsim/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "relsim/error.hpp"

namespace relsim {

using json = nlohmann::json;

JudgeScore::JudgeScore(int value) : value_(value) {
    if (value < 0 || value > 10) fail(ErrorCode::OutOfRange, "judge score " + std::to_string(value) + " outside [0, 10]");
}

JudgeScore oracle_group_judge(const std::string& query_id, const std::string& retrieved_id,
                              const std::map<std::string, std::string>& groups) {
    const auto q = groups.find(query_id);
    if (q == groups.end()) fail(ErrorCode::UnknownId, "no group for '" + query_id + "'");
    const auto r = groups.find(retrieved_id);
    if (r == groups.end()) fail(ErrorCode::UnknownId, "no group for '" + retrieved_id + "'");
    return JudgeScore(q->second == r->second ? 10 : 0);
}

JudgeScore GroupOracleJudge::operator()(const std::string& query_id, const std::string& retrieved_id) const {
    return oracle_group_judge(query_id, retrieved_id, groups_);
}

RetrievalEvalReport evaluate_retrieval(const std::vector<std::string>& queries, const VectorIndex& index,
                                       const JudgeFn& judge, std::size_t max_concurrency) {
    RetrievalEvalReport report;
    report.per_query.reserve(queries.size());
    for (const auto& q : queries) {
        if (!index.contains(q)) fail(ErrorCode::UnknownId, "query '" + q + "' is not in the index");
        QueryJudgement j{q, {}, std::nullopt, {}};
        const auto hit = index.top_k_for_id(q, 1, true);
        if (hit.ranked.empty()) {
            j.error = "no candidate besides the query";
        } else {
            j.retrieved_id = hit.ranked.front().id;
        }
        report.per_query.push_back(std::move(j));
    }

    const auto run_one = [&](QueryJudgement& j) {
        if (j.retrieved_id.empty()) return;
        try {
            j.score = judge(j.query_id, j.retrieved_id);
        } catch (const std::exception& e) {
            j.error = e.what();
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(max_concurrency, 1, std::max<std::size_t>(queries.size(), 1));
    if (workers == 1) {
        for (auto& j : report.per_query) run_one(j);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < report.per_query.size(); i = next++) run_one(report.per_query[i]);
            });
        }
    }

    double sum = 0.0;
    std::size_t scored = 0;
    for (const auto& j : report.per_query) {
        if (j.score) {
            sum += j.score->value();
            ++scored;
        } else {
            ++report.failures;
        }
    }
    report.count = report.per_query.size();
    report.mean = scored == 0 ? 0.0 : sum / static_cast<double>(scored);
    return report;
}

double same_group_recall_at_1(const std::vector<std::string>& queries, const VectorIndex& index,
                              const std::map<std::string, std::string>& groups) {
    if (queries.empty()) fail(ErrorCode::Empty, "no queries");
    const auto& table = index.table();
    std::size_t hits = 0;
    for (const auto& q : queries) {
        const auto qi = table.position(q);
        const auto query = table.row(qi);
        std::optional<std::size_t> best;
        double best_score = 0.0;
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (i == qi) continue;
            const double s = dot(query, table.row(i));
            if (!best || s > best_score || (s == best_score && table.id(i) < table.id(*best))) {
                best = i;
                best_score = s;
            }
        }
        if (!best) continue;
        const auto gq = groups.find(q);
        const auto gr = groups.find(table.id(*best));
        if (gq == groups.end() || gr == groups.end()) fail(ErrorCode::UnknownId, "missing group for '" + q + "' or its neighbour");
        hits += gq->second == gr->second ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(queries.size());
}

PreferenceSummary aggregate_ab(const std::vector<ABRecord>& records) {
    if (records.empty()) fail(ErrorCode::Empty, "no AB records");
    PreferenceSummary s;
    for (const auto& r : records) {
        if (r.candidate_a_id == r.candidate_b_id) {
            fail(ErrorCode::InvalidArgument, "record for '" + r.query_id + "' compares a candidate with itself");
        }
        if (r.choice == ABChoice::Same) {
            ++s.ties;
        } else if ((r.choice == ABChoice::A) == (r.ours_is == Side::A)) {
            ++s.ours;
        } else {
            ++s.baseline;
        }
    }
    s.total = records.size();
    const auto n = static_cast<double>(s.total);
    s.ours_rate = static_cast<double>(s.ours) / n;
    s.tie_rate = static_cast<double>(s.ties) / n;
    s.baseline_rate = static_cast<double>(s.baseline) / n;
    return s;
}

const char* quadrant_label_name(QuadrantLabel label) noexcept {
    switch (label) {
        case QuadrantLabel::SameLogicSameLook: return "SameLogicSameLook";
        case QuadrantLabel::SameLogicDifferentLook: return "SameLogicDifferentLook";
        case QuadrantLabel::DifferentLogicSameLook: return "DifferentLogicSameLook";
        case QuadrantLabel::Random: return "Random";
    }
    return "Random";
}

QuadrantLabel classify_point(double relational, double attribute, const QuadrantThresholds& t) noexcept {
    const bool rel_high = relational >= t.relational;
    const bool attr_high = attribute >= t.attribute;
    if (rel_high) return attr_high ? QuadrantLabel::SameLogicSameLook : QuadrantLabel::SameLogicDifferentLook;
    return attr_high ? QuadrantLabel::DifferentLogicSameLook : QuadrantLabel::Random;
}

std::vector<QuadrantPoint> quadrant_classify(const std::vector<ScoredPoint>& points,
                                             const QuadrantThresholds& thresholds) {
    if (!std::isfinite(thresholds.relational) || !std::isfinite(thresholds.attribute)) {
        fail(ErrorCode::InvalidArgument, "quadrant thresholds must be finite");
    }
    std::vector<QuadrantPoint> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        out.push_back({p.id, p.relational, p.attribute, classify_point(p.relational, p.attribute, thresholds)});
    }
    return out;
}

double percentile_threshold(const std::vector<double>& values, double percentile) {
    if (values.empty()) fail(ErrorCode::Empty, "no values");
    if (!(percentile >= 0.0 && percentile < 1.0)) fail(ErrorCode::InvalidArgument, "percentile must lie in [0, 1)");
    const auto n = values.size();
    auto tail = static_cast<std::size_t>(std::ceil((1.0 - percentile) * static_cast<double>(n) - 1e-9));
    tail = std::clamp<std::size_t>(tail, 1, n);
    std::vector<double> sorted = values;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(tail - 1), sorted.end(),
                     std::greater<>());
    return sorted[tail - 1];
}

QuadrantThresholds percentile_thresholds(const std::vector<ScoredPoint>& points, double percentile) {
    std::vector<double> rel;
    std::vector<double> attr;
    for (const auto& p : points) {
        rel.push_back(p.relational);
        attr.push_back(p.attribute);
    }
    return {percentile_threshold(rel, percentile), percentile_threshold(attr, percentile)};
}

std::vector<ScoredPoint> similarity_profile(const EmbeddingTable& relational, const EmbeddingTable& attribute,
                                            const std::string& query_id) {
    const auto rel_query = normalize(relational.row(relational.position(query_id)));
    const auto attr_query = normalize(attribute.row(attribute.position(query_id)));
    std::vector<ScoredPoint> points;
    for (std::size_t i = 0; i < relational.size(); ++i) {
        const auto& id = relational.id(i);
        if (id == query_id || !attribute.contains(id)) continue;
        const auto rel = normalize(relational.row(i));
        const auto attr = normalize(attribute.row(attribute.position(id)));
        points.push_back({id, cosine(rel_query, rel), cosine(attr_query, attr)});
    }
    return points;
}

std::string quadrant_csv(const std::vector<QuadrantPoint>& points) {
    std::ostringstream out;
    out << "id,relational,attribute,label\n";
    out << std::setprecision(17);
    for (const auto& p : points) {
        std::string id = p.id;
        if (id.find_first_of(",\"\n") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : id) {
                if (c == '"') quoted += '"';
                quoted += c;
            }
            id = quoted + "\"";
        }
        out << id << ',' << p.relational << ',' << p.attribute << ',' << quadrant_label_name(p.label) << '\n';
    }
    return out.str();
}

MeanStd mean_std(const std::vector<double>& values) {
    if (values.empty()) fail(ErrorCode::Empty, "no values");
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

namespace {

MeanStd pair_cosines(const std::vector<EmbeddingPair>& pairs, const std::string& what) {
    if (pairs.empty()) fail(ErrorCode::Empty, what + " has no pairs");
    std::vector<double> cos;
    cos.reserve(pairs.size());
    for (const auto& [in, out] : pairs) {
        if (in.dim() != pairs.front().first.dim() || out.dim() != in.dim()) {
            fail(ErrorCode::DimMismatch, what + " has inconsistent dims");
        }
        cos.push_back(cosine(in, out));
    }
    return mean_std(cos);
}

json mean_std_json(const MeanStd& m) { return json{{"mean", m.mean}, {"std", m.std}}; }

}  // namespace

std::vector<AnalogicalRow> analogical_benchmark(const std::vector<ModelOutputs>& models) {
    if (models.empty()) fail(ErrorCode::Empty, "no models to benchmark");
    std::vector<AnalogicalRow> rows;
    for (const auto& m : models) {
        AnalogicalRow row{m.model_name, pair_cosines(m.relational, m.model_name + " relational"), {}, {}};
        if (m.attribute) row.attribute = pair_cosines(*m.attribute, m.model_name + " attribute");
        if (m.perceptual) row.perceptual = pair_cosines(*m.perceptual, m.model_name + " perceptual");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string to_json(const RetrievalEvalReport& report) {
    json per_query = json::array();
    for (const auto& j : report.per_query) {
        json entry{{"query_id", j.query_id}, {"retrieved_id", j.retrieved_id}};
        entry["score"] = j.score ? json(j.score->value()) : json(nullptr);
        if (!j.error.empty()) entry["error"] = j.error;
        per_query.push_back(std::move(entry));
    }
    return json{{"per_query", std::move(per_query)},
                {"mean", report.mean},
                {"count", report.count},
                {"failures", report.failures}}
        .dump(2);
}

std::string to_json(const PreferenceSummary& s) {
    return json{{"ours_rate", s.ours_rate}, {"baseline_rate", s.baseline_rate}, {"tie_rate", s.tie_rate},
                {"ours", s.ours},           {"baseline", s.baseline},           {"ties", s.ties},
                {"total", s.total}}
        .dump(2);
}

std::string to_json(const std::vector<AnalogicalRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json row{{"model_name", r.model_name}, {"relsim", mean_std_json(r.relsim)}};
        if (r.attribute) row["attribute"] = mean_std_json(*r.attribute);
        if (r.perceptual) row["perceptual"] = mean_std_json(*r.perceptual);
        out.push_back(std::move(row));
    }
    return json{{"rows", std::move(out)}}.dump(2);
}

}  // namespace relsim
