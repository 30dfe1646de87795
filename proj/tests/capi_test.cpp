#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "relsim/relsim.h"
#include "test_util.hpp"

using relsim::fixtures::TempDir;

namespace {

struct Lcg {
    std::uint64_t s;
    double next() {
        s = s * 6364136223846793005ull + 1442695040888963407ull;
        return static_cast<double>(s >> 11) / 9007199254740992.0 * 2.0 - 1.0;
    }
};

std::vector<float> random_rows(std::uint64_t seed, std::size_t n, std::size_t dim) {
    Lcg g{seed};
    std::vector<float> out(n * dim);
    for (auto& v : out) v = static_cast<float>(g.next());
    return out;
}

relsim_table* make_table(const std::vector<float>& rows, std::size_t dim, const std::string& prefix = "id") {
    relsim_table* t = nullptr;
    EXPECT_EQ(relsim_table_create(static_cast<uint32_t>(dim), &t), RELSIM_OK);
    for (std::size_t i = 0; i < rows.size() / dim; ++i) {
        EXPECT_EQ(relsim_table_append(t, (prefix + std::to_string(i)).c_str(), rows.data() + i * dim, dim), RELSIM_OK);
    }
    return t;
}

}  // namespace

TEST(CApi, StatusNamesAndErrors) {
    EXPECT_STREQ(relsim_status_name(RELSIM_OK), "Ok");
    EXPECT_STREQ(relsim_status_name(RELSIM_ERR_ZERO_VECTOR), "ZeroVector");
    EXPECT_NE(std::string(relsim_version()), "");
    const float zero[3] = {0, 0, 0};
    float out[3];
    EXPECT_EQ(relsim_normalize(zero, 3, out), RELSIM_ERR_ZERO_VECTOR);
    EXPECT_NE(std::string(relsim_last_error()), "");
    EXPECT_EQ(relsim_normalize(nullptr, 3, out), RELSIM_ERR_INVALID_ARGUMENT);
}

TEST(CApi, SimilarityArithmetic) {
    const float v[2] = {3, 4};
    float u[2];
    ASSERT_EQ(relsim_normalize(v, 2, u), RELSIM_OK);
    EXPECT_FLOAT_EQ(u[0], 0.6f);
    double c = 0;
    ASSERT_EQ(relsim_cosine(u, u, 2, &c), RELSIM_OK);
    EXPECT_NEAR(c, 1.0, 1e-7);
    EXPECT_EQ(relsim_cosine(v, u, 2, &c), RELSIM_ERR_INVALID_ARGUMENT);
    const float e[4] = {1, 0, 0, 1};
    double m[4];
    ASSERT_EQ(relsim_similarity_matrix(e, 2, e, 2, 2, 0.5, m), RELSIM_OK);
    EXPECT_DOUBLE_EQ(m[0], 2.0);
    EXPECT_DOUBLE_EQ(m[1], 0.0);
    EXPECT_EQ(relsim_similarity_matrix(e, 2, e, 2, 2, 0.0, m), RELSIM_ERR_NON_POSITIVE_TEMPERATURE);
    double loss = -1;
    ASSERT_EQ(relsim_info_nce_loss(e, e, 2, 2, 1.0, 0, &loss), RELSIM_OK);
    EXPECT_NEAR(loss, std::log(1.0 + std::exp(-1.0)), 1e-6);
}

TEST(CApi, TableAndIndexRoundTrip) {
    TempDir dir("capi_index");
    const auto rows = random_rows(1, 50, 8);
    relsim_table* t = make_table(rows, 8);
    EXPECT_EQ(relsim_table_append(t, "id0", rows.data(), 8), RELSIM_ERR_DUPLICATE_ID);
    EXPECT_EQ(relsim_table_append(t, "x", rows.data(), 7), RELSIM_ERR_DIM_MISMATCH);
    ASSERT_EQ(relsim_table_save(t, dir.file("t.rseb").c_str()), RELSIM_OK);
    relsim_table* back = nullptr;
    ASSERT_EQ(relsim_table_load(dir.file("t.rseb").c_str(), &back), RELSIM_OK);
    EXPECT_EQ(relsim_table_size(back), 50u);
    EXPECT_EQ(relsim_table_section(back), RELSIM_SECTION_EMBEDDINGS);
    EXPECT_EQ(std::memcmp(relsim_table_row(back, 7), rows.data() + 56, 8 * sizeof(float)), 0);
    EXPECT_EQ(relsim_table_id(back, 50), nullptr);
    size_t pos = 0;
    EXPECT_EQ(relsim_table_find(back, "id9", &pos), RELSIM_OK);
    EXPECT_EQ(pos, 9u);
    EXPECT_EQ(relsim_table_find(back, "nope", &pos), RELSIM_ERR_UNKNOWN_ID);

    relsim_index* index = nullptr;
    ASSERT_EQ(relsim_index_build(back, &index), RELSIM_OK);
    relsim_hit hits[5];
    size_t n = 0;
    ASSERT_EQ(relsim_index_query(index, rows.data() + 3 * 8, 8, 5, nullptr, 0, hits, &n), RELSIM_OK);
    ASSERT_EQ(n, 5u);
    EXPECT_STREQ(hits[0].id, "id3");
    EXPECT_NEAR(hits[0].score, 1.0, 1e-6);
    const char* exclude[] = {"id3"};
    ASSERT_EQ(relsim_index_query(index, rows.data() + 3 * 8, 8, 5, exclude, 1, hits, &n), RELSIM_OK);
    EXPECT_STRNE(hits[0].id, "id3");
    relsim_hit self[2];
    ASSERT_EQ(relsim_index_query_id(index, "id3", 2, 1, self, &n), RELSIM_OK);
    EXPECT_STREQ(self[0].id, hits[0].id);
    EXPECT_EQ(relsim_index_query(index, rows.data(), 8, 0, nullptr, 0, hits, &n), RELSIM_ERR_INVALID_ARGUMENT);

    ASSERT_EQ(relsim_index_save(index, dir.file("i.rseb").c_str()), RELSIM_OK);
    relsim_index* loaded = nullptr;
    ASSERT_EQ(relsim_index_load(dir.file("i.rseb").c_str(), &loaded), RELSIM_OK);
    EXPECT_EQ(relsim_index_size(loaded), 50u);
    EXPECT_EQ(relsim_index_load(dir.file("missing.rseb").c_str(), &loaded), RELSIM_ERR_IO);
    relsim_index_free(loaded);
    relsim_index_free(index);
    relsim_table_free(back);
    relsim_table_free(t);
}

TEST(CApi, Captions) {
    relsim_caption* c = nullptr;
    ASSERT_EQ(relsim_caption_parse("The {Fruit} beside {Animal}, then {Fruit}", &c), RELSIM_OK);
    EXPECT_EQ(relsim_caption_placeholder_count(c), 3u);
    EXPECT_STREQ(relsim_caption_placeholder(c, 1), "Animal");
    EXPECT_STREQ(relsim_caption_render(c), "The {Fruit} beside {Animal}, then {Fruit}");
    EXPECT_STREQ(relsim_caption_signature(c), "the ⟨0⟩ beside ⟨1⟩, then ⟨0⟩");
    const char* banned[] = {"banana", "dog"};
    relsim_lexicon* lex = nullptr;
    ASSERT_EQ(relsim_lexicon_create(banned, 2, &lex), RELSIM_OK);
    size_t n = 99;
    ASSERT_EQ(relsim_caption_check(c, lex, nullptr, 0, &n), RELSIM_OK);
    EXPECT_EQ(n, 0u);
    relsim_caption* bad = nullptr;
    ASSERT_EQ(relsim_caption_parse("a Dog eats a banana", &bad), RELSIM_OK);
    relsim_banned_hit hits[1];
    ASSERT_EQ(relsim_caption_check(bad, lex, hits, 1, &n), RELSIM_OK);
    EXPECT_EQ(n, 2u);
    EXPECT_STREQ(hits[0].token, "dog");
    EXPECT_EQ(hits[0].byte_offset, 2u);
    relsim_caption* broken = nullptr;
    EXPECT_EQ(relsim_caption_parse("{a", &broken), RELSIM_ERR_UNBALANCED_BRACE);
    EXPECT_EQ(relsim_caption_parse("{}", &broken), RELSIM_ERR_EMPTY_PLACEHOLDER);
    EXPECT_EQ(relsim_caption_parse("{a{b}}", &broken), RELSIM_ERR_NESTED_BRACE);
    relsim_caption_free(bad);
    relsim_caption_free(c);
    relsim_lexicon_free(lex);
}

namespace {
void collect(void* ctx, size_t step, double loss, double tau) {
    auto* log = static_cast<std::vector<std::tuple<size_t, double, double>>*>(ctx);
    log->emplace_back(step, loss, tau);
}
}  // namespace

TEST(CApi, TrainProjectAndPersist) {
    TempDir dir("capi_model");
    const std::size_t n = 24;
    const auto base = random_rows(2, n, 6);
    const auto caps = random_rows(3, n, 4);
    relsim_train_config cfg;
    relsim_train_config_init(&cfg);
    EXPECT_EQ(cfg.batch_size, 32u);
    EXPECT_EQ(cfg.steps, 1000u);
    EXPECT_DOUBLE_EQ(cfg.tau_init, 0.07);
    cfg.batch_size = 8;
    cfg.steps = 20;
    std::vector<std::tuple<size_t, double, double>> log;
    relsim_model* model = nullptr;
    ASSERT_EQ(relsim_train(base.data(), 6, caps.data(), 4, n, &cfg, collect, &log, &model), RELSIM_OK);
    ASSERT_EQ(log.size(), 20u);
    EXPECT_EQ(std::get<0>(log[0]), 0u);
    EXPECT_NEAR(std::get<2>(log[0]), 0.07, 1e-12);
    EXPECT_EQ(relsim_model_d_in(model), 6u);
    EXPECT_EQ(relsim_model_d_out(model), 4u);

    std::vector<float> projected(n * 4);
    ASSERT_EQ(relsim_model_project(model, base.data(), n, 6, projected.data()), RELSIM_OK);
    double norm = 0;
    for (int k = 0; k < 4; ++k) norm += projected[k] * projected[k];
    EXPECT_NEAR(norm, 1.0, 1e-6);

    ASSERT_EQ(relsim_model_save(model, dir.file("m.rseb").c_str()), RELSIM_OK);
    relsim_model* loaded = nullptr;
    ASSERT_EQ(relsim_model_load(dir.file("m.rseb").c_str(), &loaded), RELSIM_OK);
    std::vector<float> again(n * 4);
    ASSERT_EQ(relsim_model_project(loaded, base.data(), n, 6, again.data()), RELSIM_OK);
    for (std::size_t i = 0; i < again.size(); ++i) EXPECT_NEAR(again[i], projected[i], 1e-5);

    relsim_table* table = make_table(base, 6);
    relsim_table* out = nullptr;
    ASSERT_EQ(relsim_model_project_table(loaded, table, &out), RELSIM_OK);
    EXPECT_EQ(relsim_table_dim(out), 4u);
    EXPECT_STREQ(relsim_table_id(out, 5), "id5");
    EXPECT_EQ(relsim_model_load(dir.file("nothing").c_str(), &loaded), RELSIM_ERR_IO);

    cfg.batch_size = 1;
    relsim_model* bad = nullptr;
    EXPECT_EQ(relsim_train(base.data(), 6, caps.data(), 4, n, &cfg, nullptr, nullptr, &bad),
              RELSIM_ERR_INVALID_ARGUMENT);
    relsim_table_free(out);
    relsim_table_free(table);
    relsim_model_free(loaded);
    relsim_model_free(model);
}

TEST(CApi, Filter) {
    TempDir dir("capi_filter");
    const std::size_t n = 400;
    const auto x = random_rows(4, n, 3);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = x[i * 3] + 0.5f * x[i * 3 + 1] > 0 ? 1 : 0;
    relsim_filter* f = nullptr;
    relsim_filter_metrics m{};
    ASSERT_EQ(relsim_filter_train(x.data(), labels.data(), n, 3, 500, 0.1, 0, &f, &m), RELSIM_OK);
    EXPECT_EQ(m.heldout_count, 80u);
    EXPECT_GT(m.heldout_accuracy, 0.9);
    EXPECT_LT(m.final_loss, m.initial_loss);
    std::vector<unsigned char> keep(n);
    double rate = 0;
    ASSERT_EQ(relsim_filter_apply(f, x.data(), n, 3, 0.5, keep.data(), &rate), RELSIM_OK);
    std::size_t kept = 0;
    for (auto k : keep) kept += k;
    EXPECT_DOUBLE_EQ(rate, static_cast<double>(kept) / n);
    ASSERT_EQ(relsim_filter_save(f, dir.file("f.rseb").c_str()), RELSIM_OK);
    relsim_filter* g = nullptr;
    ASSERT_EQ(relsim_filter_load(dir.file("f.rseb").c_str(), &g), RELSIM_OK);
    double a = 0;
    double b = 0;
    relsim_filter_score(f, x.data(), 3, &a);
    relsim_filter_score(g, x.data(), 3, &b);
    EXPECT_NEAR(a, b, 1e-6);
    std::vector<int> ones(n, 1);
    relsim_filter* h = nullptr;
    EXPECT_EQ(relsim_filter_train(x.data(), ones.data(), n, 3, 10, 0.1, 0, &h, nullptr), RELSIM_ERR_SINGLE_CLASS);
    relsim_filter_free(g);
    relsim_filter_free(f);
}

TEST(CApi, DatasetPipeline) {
    TempDir dir("capi_data");
    {
        std::ofstream out(dir.file("groups.jsonl"));
        out << R"({"group":"g1","images":["a","b","c"],"caption":"{x} inside {y}"})" << "\n"
            << R"({"group":"g2","images":["d"],"caption":"{x} atop {y}"})" << "\n"
            << R"({"group":"g3","images":["e","f"],"caption":"{p} eats {q}"})" << "\n";
    }
    relsim_dataset* ds = nullptr;
    ASSERT_EQ(relsim_expand_groups(dir.file("groups.jsonl").c_str(), &ds), RELSIM_OK);
    EXPECT_EQ(relsim_dataset_size(ds), 6u);
    EXPECT_EQ(relsim_dataset_warning_count(ds), 1u);
    const char* id = nullptr;
    const char* caption = nullptr;
    const char* group = nullptr;
    ASSERT_EQ(relsim_dataset_record(ds, 4, &id, &caption, &group), RELSIM_OK);
    EXPECT_STREQ(id, "e");
    EXPECT_STREQ(caption, "{p} eats {q}");
    EXPECT_STREQ(group, "g3");
    EXPECT_EQ(relsim_dataset_record(ds, 6, &id, &caption, &group), RELSIM_ERR_INVALID_ARGUMENT);

    relsim_dataset* train = nullptr;
    relsim_dataset* test = nullptr;
    ASSERT_EQ(relsim_split(ds, 0.5, 3, &train, &test), RELSIM_OK);
    EXPECT_EQ(relsim_dataset_size(train), 3u);
    EXPECT_EQ(relsim_dataset_size(test), 3u);
    ASSERT_EQ(relsim_dataset_save(train, dir.file("train.jsonl").c_str()), RELSIM_OK);
    relsim_dataset* reloaded = nullptr;
    ASSERT_EQ(relsim_dataset_load(dir.file("train.jsonl").c_str(), &reloaded), RELSIM_OK);
    EXPECT_EQ(relsim_dataset_size(reloaded), 3u);
    relsim_dataset* t2 = nullptr;
    relsim_dataset* t3 = nullptr;
    EXPECT_EQ(relsim_split(ds, 0.01, 3, &t2, &t3), RELSIM_ERR_INSUFFICIENT_SPLIT);
    relsim_dataset_free(reloaded);
    relsim_dataset_free(train);
    relsim_dataset_free(test);
    relsim_dataset_free(ds);
}

namespace {
int constant_judge(void* ctx, const char* q, const char*, int* score) {
    if (std::string(q) == "id0") return 1;
    *score = *static_cast<int*>(ctx);
    return 0;
}
}  // namespace

TEST(CApi, RetrievalEvaluation) {
    const auto rows = random_rows(5, 20, 4);
    relsim_table* t = make_table(rows, 4);
    relsim_index* index = nullptr;
    ASSERT_EQ(relsim_index_build(t, &index), RELSIM_OK);
    std::vector<std::string> ids;
    std::vector<std::string> groups;
    for (int i = 0; i < 20; ++i) {
        ids.push_back("id" + std::to_string(i));
        groups.push_back("g" + std::to_string(i % 4));
    }
    std::vector<const char*> id_ptrs;
    std::vector<const char*> group_ptrs;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        id_ptrs.push_back(ids[i].c_str());
        group_ptrs.push_back(groups[i].c_str());
    }
    relsim_judge* oracle = nullptr;
    ASSERT_EQ(relsim_judge_create_oracle(id_ptrs.data(), group_ptrs.data(), 20, &oracle), RELSIM_OK);
    int score = -1;
    ASSERT_EQ(relsim_judge_score(oracle, "id0", "id4", &score), RELSIM_OK);
    EXPECT_EQ(score, 10);
    relsim_retrieval_report* report = nullptr;
    ASSERT_EQ(relsim_evaluate_retrieval(index, oracle, id_ptrs.data(), 20, 2, &report), RELSIM_OK);
    double recall = -1;
    ASSERT_EQ(relsim_same_group_recall_at_1(index, oracle, id_ptrs.data(), 20, &recall), RELSIM_OK);
    EXPECT_NEAR(relsim_retrieval_report_mean(report), 10 * recall, 1e-12);
    EXPECT_EQ(relsim_retrieval_report_count(report), 20u);
    const auto parsed = nlohmann::json::parse(relsim_retrieval_report_json(report));
    EXPECT_EQ(parsed["count"], 20);

    int seven = 7;
    relsim_judge* cb = nullptr;
    ASSERT_EQ(relsim_judge_create_callback(constant_judge, &seven, &cb), RELSIM_OK);
    relsim_retrieval_report* r2 = nullptr;
    ASSERT_EQ(relsim_evaluate_retrieval(index, cb, id_ptrs.data(), 20, 1, &r2), RELSIM_OK);
    EXPECT_EQ(relsim_retrieval_report_failures(r2), 1u);
    EXPECT_DOUBLE_EQ(relsim_retrieval_report_mean(r2), 7.0);
    const char* q = nullptr;
    const char* r = nullptr;
    ASSERT_EQ(relsim_retrieval_report_entry(r2, 0, &q, &r, &score), RELSIM_OK);
    EXPECT_STREQ(q, "id0");
    EXPECT_EQ(score, -1);
    EXPECT_EQ(relsim_same_group_recall_at_1(index, cb, id_ptrs.data(), 20, &recall), RELSIM_ERR_INVALID_ARGUMENT);

    relsim_retrieval_report_free(r2);
    relsim_retrieval_report_free(report);
    relsim_judge_free(cb);
    relsim_judge_free(oracle);
    relsim_index_free(index);
    relsim_table_free(t);
}

TEST(CApi, HttpJudgeConfig) {
    relsim_http_judge_config cfg;
    relsim_http_judge_config_init(&cfg);
    EXPECT_EQ(cfg.max_retries, 3);
    EXPECT_EQ(cfg.initial_backoff_ms, 1000u);
    cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    cfg.initial_backoff_ms = 0;
    cfg.max_retries = 0;
    relsim_judge* j = nullptr;
    ASSERT_EQ(relsim_judge_create_http(&cfg, &j), RELSIM_OK);
    int score = 0;
    EXPECT_EQ(relsim_judge_score(j, "a", "b", &score), RELSIM_ERR_TRANSPORT);
    relsim_judge_free(j);
    EXPECT_NE(std::string(relsim_default_judge_prompt()).find("Please directly output the score."),
              std::string::npos);
}

TEST(CApi, PreferenceQuadrantsAnalogical) {
    const relsim_ab_record records[] = {
        {"q1", "x", "y", RELSIM_CHOICE_A, RELSIM_SIDE_A},
        {"q2", "x", "y", RELSIM_CHOICE_A, RELSIM_SIDE_B},
        {"q3", "x", "y", RELSIM_CHOICE_SAME, RELSIM_SIDE_B},
        {"q4", "x", "y", RELSIM_CHOICE_B, RELSIM_SIDE_B},
    };
    relsim_preference p{};
    char* json = nullptr;
    ASSERT_EQ(relsim_aggregate_ab(records, 4, &p, &json), RELSIM_OK);
    EXPECT_DOUBLE_EQ(p.ours_rate, 0.5);
    EXPECT_EQ(p.ties, 1u);
    EXPECT_EQ(nlohmann::json::parse(json)["total"], 4);
    relsim_string_free(json);
    EXPECT_EQ(relsim_aggregate_ab(records, 0, &p, nullptr), RELSIM_ERR_EMPTY);

    const double rel[] = {0.9, 0.9, 0.1, 0.1};
    const double attr[] = {0.9, 0.1, 0.9, 0.1};
    relsim_quadrant labels[4];
    ASSERT_EQ(relsim_quadrant_classify(rel, attr, 4, 0.5, 0.5, labels), RELSIM_OK);
    EXPECT_EQ(labels[0], RELSIM_QUADRANT_SAME_LOGIC_SAME_LOOK);
    EXPECT_EQ(labels[1], RELSIM_QUADRANT_SAME_LOGIC_DIFFERENT_LOOK);
    EXPECT_EQ(labels[2], RELSIM_QUADRANT_DIFFERENT_LOGIC_SAME_LOOK);
    EXPECT_EQ(labels[3], RELSIM_QUADRANT_RANDOM);
    double t = 0;
    const double values[] = {5, 1, 4, 2, 3};
    ASSERT_EQ(relsim_percentile_threshold(values, 5, 0.6, &t), RELSIM_OK);
    EXPECT_EQ(t, 4.0);

    const auto rows = random_rows(6, 30, 5);
    relsim_table* r = make_table(rows, 5);
    relsim_table* a = make_table(random_rows(7, 30, 5), 5);
    char* csv = nullptr;
    ASSERT_EQ(relsim_quadrant_profile(r, a, "id0", RELSIM_THRESHOLD_PERCENTILE, 0.9, 0.9, &csv), RELSIM_OK);
    std::string text(csv);
    relsim_string_free(csv);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 30);
    EXPECT_EQ(relsim_quadrant_profile(r, a, "zzz", RELSIM_THRESHOLD_ABSOLUTE, 0.5, 0.5, &csv),
              RELSIM_ERR_UNKNOWN_ID);
    relsim_table_free(r);
    relsim_table_free(a);

    const float in[] = {1, 0, 1, 0};
    const float out[] = {0.5f, std::sqrt(0.75f), 0.7f, std::sqrt(0.51f)};
    relsim_analogical_input m{"m", 2, 2, in, out, 0, nullptr, nullptr, 0, nullptr, nullptr};
    relsim_analogical_row row{};
    char* bench = nullptr;
    ASSERT_EQ(relsim_analogical_benchmark(&m, 1, &row, &bench), RELSIM_OK);
    EXPECT_NEAR(row.relsim_mean, 0.6, 1e-6);
    EXPECT_NEAR(row.relsim_std, 0.1, 1e-6);
    EXPECT_EQ(row.has_attribute, 0);
    EXPECT_EQ(nlohmann::json::parse(bench)["rows"][0]["model_name"], "m");
    relsim_string_free(bench);
}
