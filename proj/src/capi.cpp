#include "relsim/relsim.h"

#include <cstdlib>
#include <cmath>
#include <cstring>
#include <span>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "relsim/caption.hpp"
#include "relsim/embedding.hpp"
#include "relsim/error.hpp"
#include "relsim/eval.hpp"
#include "relsim/index.hpp"
#include "relsim/judge_http.hpp"
#include "relsim/pipeline.hpp"
#include "relsim/rseb.hpp"
#include "relsim/trainer.hpp"

struct relsim_table {
    relsim::EmbeddingTable table;
};

struct relsim_index {
    relsim::VectorIndex index;
};

struct relsim_caption {
    relsim::CaptionTemplate caption;
    std::vector<std::string> names;
    std::string signature;
    std::string rendered;
};

struct relsim_lexicon {
    relsim::Lexicon lexicon;
};

struct relsim_model {
    relsim::AlignmentModel model;
};

struct relsim_filter {
    relsim::FilterModel filter;
};

struct relsim_dataset {
    std::vector<relsim::DatasetRecord> records;
    std::vector<std::string> warnings;
};

struct relsim_judge {
    relsim::JudgeFn fn;
    std::optional<relsim::GroupOracleJudge> oracle;
};

struct relsim_retrieval_report {
    relsim::RetrievalEvalReport report;
    std::string json;
};

namespace {

using relsim::ErrorCode;
using relsim::fail;

thread_local std::string g_last_error;

relsim_status set_error(ErrorCode code, const char* message) {
    g_last_error = message;
    return static_cast<relsim_status>(code);
}

template <typename F>
relsim_status guarded(F&& body) noexcept {
    try {
        body();
        return RELSIM_OK;
    } catch (const relsim::Error& e) {
        return set_error(e.code(), e.what());
    } catch (const std::bad_alloc&) {
        return set_error(ErrorCode::Internal, "out of memory");
    } catch (const std::exception& e) {
        return set_error(ErrorCode::Internal, e.what());
    } catch (...) {
        return set_error(ErrorCode::Internal, "unknown error");
    }
}

template <typename T>
void require(const T* p, const char* what) {
    if (p == nullptr) fail(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

// Caller-supplied vectors that must already be unit length.
relsim::NormalizedEmbedding unit_arg(const float* p, std::size_t dim, const char* what) {
    require(p, what);
    if (std::abs(relsim::l2_norm(std::span<const float>(p, dim)) - 1.0) > relsim::kUnitNormTolerance) {
        fail(ErrorCode::InvalidArgument, std::string(what) + " is not unit length");
    }
    return relsim::NormalizedEmbedding::from_unit({p, p + dim});
}

char* dup_string(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

std::span<const float> rows(const float* data, std::size_t n, std::size_t dim) {
    if (n * dim > 0) require(data, "buffer");
    return {data, n * dim};
}

std::vector<relsim::NormalizedEmbedding> normalized_rows(const float* data, std::size_t n, std::size_t dim) {
    const auto all = rows(data, n, dim);
    std::vector<relsim::NormalizedEmbedding> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(relsim::normalize(all.subspan(i * dim, dim)));
    return out;
}

void fill_hits(const relsim::RetrievalResult& result, const relsim::VectorIndex& index, relsim_hit* hits,
               std::size_t* n_hits) {
    for (std::size_t i = 0; i < result.ranked.size(); ++i) {
        // Point at the index's copy so the string outlives the result.
        hits[i].id = index.id(index.table().position(result.ranked[i].id)).c_str();
        hits[i].score = result.ranked[i].score;
    }
    *n_hits = result.ranked.size();
}

}  // namespace

extern "C" {

const char* relsim_version(void) { return "1.0.0"; }

const char* relsim_status_name(relsim_status status) {
    return relsim::error_code_name(static_cast<ErrorCode>(status));
}

const char* relsim_last_error(void) { return g_last_error.c_str(); }

void relsim_string_free(char* s) { std::free(s); }

relsim_status relsim_normalize(const float* in, size_t dim, float* out) {
    return guarded([&] {
        require(out, "out");
        const auto n = relsim::normalize(rows(in, 1, dim));
        std::copy(n.values().begin(), n.values().end(), out);
    });
}

relsim_status relsim_cosine(const float* a, const float* b, size_t dim, double* out) {
    return guarded([&] {
        require(out, "out");
        const auto va = unit_arg(a, dim, "a");
        const auto vb = unit_arg(b, dim, "b");
        *out = relsim::cosine(va, vb);
    });
}

relsim_status relsim_similarity_matrix(const float* images, size_t n_images, const float* texts, size_t n_texts,
                                       size_t dim, double tau, double* out) {
    return guarded([&] {
        require(out, "out");
        std::vector<relsim::NormalizedEmbedding> v;
        std::vector<relsim::NormalizedEmbedding> t;
        for (std::size_t i = 0; i < n_images; ++i) {
            v.push_back(unit_arg(images + i * dim, dim, "image row"));
        }
        for (std::size_t j = 0; j < n_texts; ++j) {
            t.push_back(unit_arg(texts + j * dim, dim, "text row"));
        }
        const auto m = relsim::similarity_matrix(v, t, tau);
        std::copy(m.entries().begin(), m.entries().end(), out);
    });
}

// ---- tables ---------------------------------------------------------------

relsim_status relsim_table_create(uint32_t dim, relsim_table** out) {
    return guarded([&] {
        require(out, "out");
        *out = new relsim_table{relsim::EmbeddingTable(relsim::SectionTag::Embeddings, dim)};
    });
}

relsim_status relsim_table_append(relsim_table* table, const char* id, const float* row, size_t dim) {
    return guarded([&] {
        require(table, "table");
        require(id, "id");
        table->table.append(id, rows(row, 1, dim));
    });
}

relsim_status relsim_table_load(const char* path, relsim_table** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new relsim_table{relsim::load_rseb(path)};
    });
}

relsim_status relsim_table_save(const relsim_table* table, const char* path) {
    return guarded([&] {
        require(table, "table");
        require(path, "path");
        relsim::save_rseb(table->table, path);
    });
}

void relsim_table_free(relsim_table* table) { delete table; }
size_t relsim_table_size(const relsim_table* table) { return table ? table->table.size() : 0; }
uint32_t relsim_table_dim(const relsim_table* table) { return table ? table->table.dim() : 0; }

relsim_section relsim_table_section(const relsim_table* table) {
    return static_cast<relsim_section>(table->table.tag());
}

const char* relsim_table_id(const relsim_table* table, size_t i) {
    if (table == nullptr || i >= table->table.size()) return nullptr;
    return table->table.id(i).c_str();
}

const float* relsim_table_row(const relsim_table* table, size_t i) {
    if (table == nullptr || i >= table->table.size()) return nullptr;
    return table->table.row(i).data();
}

relsim_status relsim_table_find(const relsim_table* table, const char* id, size_t* position) {
    return guarded([&] {
        require(table, "table");
        require(id, "id");
        require(position, "position");
        *position = table->table.position(id);
    });
}

// ---- index ----------------------------------------------------------------

relsim_status relsim_index_build(const relsim_table* raw, relsim_index** out) {
    return guarded([&] {
        require(raw, "raw");
        require(out, "out");
        *out = new relsim_index{relsim::VectorIndex::from_raw(raw->table)};
    });
}

relsim_status relsim_index_load(const char* path, relsim_index** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new relsim_index{relsim::VectorIndex::load(path)};
    });
}

relsim_status relsim_index_save(const relsim_index* index, const char* path) {
    return guarded([&] {
        require(index, "index");
        require(path, "path");
        index->index.save(path);
    });
}

void relsim_index_free(relsim_index* index) { delete index; }
size_t relsim_index_size(const relsim_index* index) { return index ? index->index.size() : 0; }
uint32_t relsim_index_dim(const relsim_index* index) {
    return index ? static_cast<uint32_t>(index->index.dim()) : 0;
}

const char* relsim_index_id(const relsim_index* index, size_t i) {
    if (index == nullptr || i >= index->index.size()) return nullptr;
    return index->index.id(i).c_str();
}

relsim_status relsim_index_query(const relsim_index* index, const float* query, size_t dim, size_t k,
                                 const char* const* exclude, size_t n_exclude, relsim_hit* hits, size_t* n_hits) {
    return guarded([&] {
        require(index, "index");
        require(hits, "hits");
        require(n_hits, "n_hits");
        std::set<std::string> excluded;
        for (std::size_t i = 0; i < n_exclude; ++i) {
            require(exclude[i], "exclude entry");
            excluded.insert(exclude[i]);
        }
        const auto q = relsim::normalize(rows(query, 1, dim));
        fill_hits(index->index.top_k(q, k, excluded), index->index, hits, n_hits);
    });
}

relsim_status relsim_index_query_id(const relsim_index* index, const char* id, size_t k, int exclude_self,
                                    relsim_hit* hits, size_t* n_hits) {
    return guarded([&] {
        require(index, "index");
        require(id, "id");
        require(hits, "hits");
        require(n_hits, "n_hits");
        fill_hits(index->index.top_k_for_id(id, k, exclude_self != 0), index->index, hits, n_hits);
    });
}

// ---- captions -------------------------------------------------------------

relsim_status relsim_caption_parse(const char* text, relsim_caption** out) {
    return guarded([&] {
        require(text, "text");
        require(out, "out");
        auto caption = relsim::parse_caption(text);
        auto names = caption.placeholder_names();
        auto signature = relsim::template_signature(caption);
        auto rendered = caption.render();
        *out = new relsim_caption{std::move(caption), std::move(names), std::move(signature), std::move(rendered)};
    });
}

void relsim_caption_free(relsim_caption* caption) { delete caption; }

size_t relsim_caption_placeholder_count(const relsim_caption* caption) {
    return caption ? caption->names.size() : 0;
}

const char* relsim_caption_placeholder(const relsim_caption* caption, size_t i) {
    if (caption == nullptr || i >= caption->names.size()) return nullptr;
    return caption->names[i].c_str();
}

const char* relsim_caption_signature(const relsim_caption* caption) {
    return caption ? caption->signature.c_str() : nullptr;
}

const char* relsim_caption_render(const relsim_caption* caption) {
    return caption ? caption->rendered.c_str() : nullptr;
}

relsim_status relsim_lexicon_load(const char* path, relsim_lexicon** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new relsim_lexicon{relsim::Lexicon::load(path)};
    });
}

relsim_status relsim_lexicon_create(const char* const* tokens, size_t n, relsim_lexicon** out) {
    return guarded([&] {
        require(out, "out");
        std::vector<std::string> list;
        for (std::size_t i = 0; i < n; ++i) {
            require(tokens[i], "token");
            list.emplace_back(tokens[i]);
        }
        *out = new relsim_lexicon{relsim::Lexicon(list)};
    });
}

void relsim_lexicon_free(relsim_lexicon* lexicon) { delete lexicon; }

relsim_status relsim_caption_check(const relsim_caption* caption, const relsim_lexicon* lexicon,
                                   relsim_banned_hit* hits, size_t capacity, size_t* n_hits) {
    return guarded([&] {
        require(caption, "caption");
        require(lexicon, "lexicon");
        require(n_hits, "n_hits");
        if (capacity > 0) require(hits, "hits");
        const auto report = relsim::validate_anonymity(caption->caption, lexicon->lexicon);
        *n_hits = report.banned_hits.size();
        for (std::size_t i = 0; i < report.banned_hits.size() && i < capacity; ++i) {
            hits[i].token = lexicon->lexicon.tokens().find(report.banned_hits[i].token)->c_str();
            hits[i].byte_offset = report.banned_hits[i].byte_offset;
        }
    });
}

// ---- training ---------------------------------------------------------------

void relsim_train_config_init(relsim_train_config* config) {
    if (config == nullptr) return;
    const relsim::TrainConfig d;
    config->batch_size = d.batch_size;
    config->steps = d.steps;
    config->learning_rate = d.learning_rate;
    config->seed = d.seed;
    config->optimizer = RELSIM_OPTIMIZER_ADAM;
    config->symmetric_loss = d.symmetric_loss ? 1 : 0;
    config->tau_init = d.tau_init;
    config->use_bias = d.use_bias ? 1 : 0;
    config->identity_init = d.identity_init ? 1 : 0;
}

relsim_status relsim_info_nce_loss(const float* images, const float* texts, size_t n, size_t dim, double tau,
                                   int symmetric, double* out) {
    return guarded([&] {
        require(out, "out");
        const auto v = normalized_rows(images, n, dim);
        const auto t = normalized_rows(texts, n, dim);
        *out = relsim::info_nce_loss(v, t, tau, symmetric != 0);
    });
}

relsim_status relsim_train(const float* base, size_t d_in, const float* captions, size_t d_out, size_t n,
                           const relsim_train_config* config, relsim_train_log_fn log, void* ctx,
                           relsim_model** out) {
    return guarded([&] {
        require(config, "config");
        require(out, "out");
        if (d_in == 0 || d_out == 0) fail(ErrorCode::InvalidArgument, "dims must be >= 1");
        const auto x = rows(base, n, d_in);
        const auto t = normalized_rows(captions, n, d_out);
        std::vector<relsim::TrainingPair> dataset;
        dataset.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = x.subspan(i * d_in, d_in);
            dataset.push_back({relsim::Embedding({row.begin(), row.end()}), t[i]});
        }
        relsim::TrainConfig cfg;
        cfg.batch_size = config->batch_size;
        cfg.steps = config->steps;
        cfg.learning_rate = config->learning_rate;
        cfg.seed = config->seed;
        cfg.optimizer = config->optimizer == RELSIM_OPTIMIZER_SGD ? relsim::OptimizerKind::Sgd
                                                                  : relsim::OptimizerKind::Adam;
        cfg.symmetric_loss = config->symmetric_loss != 0;
        cfg.tau_init = config->tau_init;
        cfg.use_bias = config->use_bias != 0;
        cfg.identity_init = config->identity_init != 0;
        relsim::TrainObserver observer;
        if (log != nullptr) {
            observer = [log, ctx](const relsim::TrainLogEntry& e) { log(ctx, e.step, e.loss, e.tau); };
        }
        auto result = relsim::train(dataset, cfg, observer);
        *out = new relsim_model{std::move(result.model)};
    });
}

relsim_status relsim_model_load(const char* path, relsim_model** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new relsim_model{relsim::load_model(path)};
    });
}

relsim_status relsim_model_save(const relsim_model* model, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        relsim::save_model(model->model, path);
    });
}

void relsim_model_free(relsim_model* model) { delete model; }
size_t relsim_model_d_in(const relsim_model* model) { return model ? model->model.d_in() : 0; }
size_t relsim_model_d_out(const relsim_model* model) { return model ? model->model.d_out() : 0; }
double relsim_model_tau(const relsim_model* model) { return model ? model->model.tau() : 0.0; }

relsim_status relsim_model_project(const relsim_model* model, const float* x, size_t n, size_t d_in, float* out) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        const auto all = rows(x, n, d_in);
        const auto d_out = model->model.d_out();
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = all.subspan(i * d_in, d_in);
            const auto v = relsim::project(model->model, relsim::Embedding({row.begin(), row.end()}));
            std::copy(v.values().begin(), v.values().end(), out + i * d_out);
        }
    });
}

relsim_status relsim_model_project_table(const relsim_model* model, const relsim_table* base, relsim_table** out) {
    return guarded([&] {
        require(model, "model");
        require(base, "base");
        require(out, "out");
        relsim::EmbeddingTable projected(relsim::SectionTag::Embeddings,
                                         static_cast<std::uint32_t>(model->model.d_out()));
        for (std::size_t i = 0; i < base->table.size(); ++i) {
            const auto row = base->table.row(i);
            const auto v = relsim::project(model->model, relsim::Embedding({row.begin(), row.end()}));
            projected.append(base->table.id(i), v.values());
        }
        *out = new relsim_table{std::move(projected)};
    });
}

// ---- filter -------------------------------------------------------------------

relsim_status relsim_filter_train(const float* x, const int* labels, size_t n, size_t dim, size_t epochs,
                                  double learning_rate, uint64_t seed, relsim_filter** out,
                                  relsim_filter_metrics* metrics) {
    return guarded([&] {
        require(out, "out");
        if (n > 0) require(labels, "labels");
        const auto all = rows(x, n, dim);
        std::vector<relsim::LabeledExample> examples;
        examples.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = all.subspan(i * dim, dim);
            examples.push_back({std::to_string(i), relsim::Embedding({row.begin(), row.end()}),
                                labels[i] != 0 ? relsim::Label::Interesting : relsim::Label::Ordinary});
        }
        relsim::FilterTrainConfig cfg;
        cfg.epochs = epochs;
        cfg.learning_rate = learning_rate;
        cfg.seed = seed;
        auto result = relsim::train_filter(examples, cfg);
        if (metrics != nullptr) {
            metrics->heldout_accuracy = result.heldout_accuracy;
            metrics->train_accuracy = result.train_accuracy;
            metrics->train_count = result.train_count;
            metrics->heldout_count = result.heldout_count;
            metrics->initial_loss = result.loss_history.front();
            metrics->final_loss = result.loss_history.back();
        }
        *out = new relsim_filter{std::move(result.model)};
    });
}

relsim_status relsim_filter_load(const char* path, relsim_filter** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new relsim_filter{relsim::filter_from_table(relsim::load_rseb(path))};
    });
}

relsim_status relsim_filter_save(const relsim_filter* filter, const char* path) {
    return guarded([&] {
        require(filter, "filter");
        require(path, "path");
        relsim::save_rseb(relsim::filter_to_table(filter->filter), path);
    });
}

void relsim_filter_free(relsim_filter* filter) { delete filter; }
size_t relsim_filter_dim(const relsim_filter* filter) { return filter ? filter->filter.dim() : 0; }

relsim_status relsim_filter_score(const relsim_filter* filter, const float* x, size_t dim, double* out) {
    return guarded([&] {
        require(filter, "filter");
        require(out, "out");
        *out = filter->filter.score(rows(x, 1, dim));
    });
}

relsim_status relsim_filter_apply(const relsim_filter* filter, const float* x, size_t n, size_t dim,
                                  double threshold, unsigned char* keep, double* keep_rate) {
    return guarded([&] {
        require(filter, "filter");
        if (n > 0) require(keep, "keep");
        const auto all = rows(x, n, dim);
        std::vector<std::pair<std::string, relsim::Embedding>> entries;
        entries.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = all.subspan(i * dim, dim);
            entries.emplace_back(std::to_string(i), relsim::Embedding({row.begin(), row.end()}));
        }
        const auto decision = relsim::apply_filter(filter->filter, entries, threshold);
        for (std::size_t i = 0; i < n; ++i) keep[i] = decision.scores[i] >= threshold ? 1 : 0;
        if (keep_rate != nullptr) *keep_rate = decision.keep_rate;
    });
}

// ---- pipeline -------------------------------------------------------------------

relsim_status relsim_dataset_load(const char* path, relsim_dataset** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new relsim_dataset{relsim::load_dataset_jsonl(path), {}};
    });
}

relsim_status relsim_dataset_save(const relsim_dataset* dataset, const char* path) {
    return guarded([&] {
        require(dataset, "dataset");
        require(path, "path");
        relsim::save_dataset_jsonl(dataset->records, path);
    });
}

void relsim_dataset_free(relsim_dataset* dataset) { delete dataset; }
size_t relsim_dataset_size(const relsim_dataset* dataset) { return dataset ? dataset->records.size() : 0; }

relsim_status relsim_dataset_record(const relsim_dataset* dataset, size_t i, const char** id, const char** caption,
                                    const char** group) {
    return guarded([&] {
        require(dataset, "dataset");
        if (i >= dataset->records.size()) fail(ErrorCode::InvalidArgument, "record index out of range");
        const auto& r = dataset->records[i];
        if (id) *id = r.image_id.c_str();
        if (caption) *caption = r.caption_raw.c_str();
        if (group) *group = r.group_id ? r.group_id->c_str() : nullptr;
    });
}

size_t relsim_dataset_warning_count(const relsim_dataset* dataset) { return dataset ? dataset->warnings.size() : 0; }

const char* relsim_dataset_warning(const relsim_dataset* dataset, size_t i) {
    if (dataset == nullptr || i >= dataset->warnings.size()) return nullptr;
    return dataset->warnings[i].c_str();
}

relsim_status relsim_expand_groups(const char* groups_path, relsim_dataset** out) {
    return guarded([&] {
        require(groups_path, "groups_path");
        require(out, "out");
        auto result = relsim::expand_groups(relsim::load_groups_jsonl(groups_path));
        *out = new relsim_dataset{std::move(result.records), std::move(result.warnings)};
    });
}

relsim_status relsim_split(const relsim_dataset* dataset, double test_fraction, uint64_t seed,
                           relsim_dataset** train, relsim_dataset** test) {
    return guarded([&] {
        require(dataset, "dataset");
        require(train, "train");
        require(test, "test");
        auto split = relsim::split_dataset(dataset->records, test_fraction, seed);
        auto train_set = std::make_unique<relsim_dataset>(relsim_dataset{std::move(split.train), {}});
        *test = new relsim_dataset{std::move(split.test), {}};
        *train = train_set.release();
    });
}

// ---- evaluation -------------------------------------------------------------------

void relsim_http_judge_config_init(relsim_http_judge_config* config) {
    if (config == nullptr) return;
    const relsim::HttpJudgeConfig d;
    *config = relsim_http_judge_config{nullptr, nullptr, nullptr, nullptr, nullptr, d.max_retries,
                                       static_cast<uint32_t>(d.initial_backoff.count()),
                                       static_cast<uint32_t>(d.timeout.count())};
}

const char* relsim_default_judge_prompt(void) {
    static const std::string prompt(relsim::default_judge_prompt());
    return prompt.c_str();
}

relsim_status relsim_judge_create_oracle(const char* const* ids, const char* const* groups, size_t n,
                                         relsim_judge** out) {
    return guarded([&] {
        require(out, "out");
        std::map<std::string, std::string> map;
        for (std::size_t i = 0; i < n; ++i) {
            require(ids[i], "id");
            require(groups[i], "group");
            map[ids[i]] = groups[i];
        }
        relsim::GroupOracleJudge oracle(std::move(map));
        *out = new relsim_judge{oracle, oracle};
    });
}

relsim_status relsim_judge_create_oracle_from_file(const char* path, relsim_judge** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        relsim::GroupOracleJudge oracle(relsim::load_group_map(path));
        *out = new relsim_judge{oracle, oracle};
    });
}

relsim_status relsim_judge_create_callback(relsim_judge_fn fn, void* ctx, relsim_judge** out) {
    return guarded([&] {
        require(out, "out");
        if (fn == nullptr) fail(ErrorCode::InvalidArgument, "judge callback must not be NULL");
        auto wrapped = [fn, ctx](const std::string& q, const std::string& r) {
            int score = -1;
            if (fn(ctx, q.c_str(), r.c_str(), &score) != 0) {
                fail(ErrorCode::Internal, "judge callback reported failure");
            }
            return relsim::JudgeScore(score);
        };
        *out = new relsim_judge{wrapped, std::nullopt};
    });
}

relsim_status relsim_judge_create_http(const relsim_http_judge_config* config, relsim_judge** out) {
    return guarded([&] {
        require(config, "config");
        require(out, "out");
        auto cfg = relsim::http_judge_config_from_env(config->token_env ? config->token_env : "RELSIM_JUDGE_TOKEN");
        if (config->endpoint) cfg.endpoint = config->endpoint;
        if (config->model) cfg.model = config->model;
        if (config->prompt) cfg.prompt = config->prompt;
        if (config->image_ref_template) cfg.image_ref_template = config->image_ref_template;
        cfg.max_retries = config->max_retries;
        cfg.initial_backoff = std::chrono::milliseconds(config->initial_backoff_ms);
        cfg.timeout = std::chrono::seconds(config->timeout_s);
        auto judge = std::make_shared<relsim::HttpJudge>(std::move(cfg));
        *out = new relsim_judge{[judge](const std::string& q, const std::string& r) { return judge->score(q, r); },
                                std::nullopt};
    });
}

void relsim_judge_free(relsim_judge* judge) { delete judge; }

relsim_status relsim_judge_score(const relsim_judge* judge, const char* query_id, const char* retrieved_id,
                                 int* score) {
    return guarded([&] {
        require(judge, "judge");
        require(query_id, "query_id");
        require(retrieved_id, "retrieved_id");
        require(score, "score");
        *score = judge->fn(query_id, retrieved_id).value();
    });
}

relsim_status relsim_evaluate_retrieval(const relsim_index* index, const relsim_judge* judge,
                                        const char* const* queries, size_t n, size_t max_concurrency,
                                        relsim_retrieval_report** out) {
    return guarded([&] {
        require(index, "index");
        require(judge, "judge");
        require(out, "out");
        std::vector<std::string> q;
        for (std::size_t i = 0; i < n; ++i) {
            require(queries[i], "query");
            q.emplace_back(queries[i]);
        }
        auto report = relsim::evaluate_retrieval(q, index->index, judge->fn, max_concurrency);
        auto json = relsim::to_json(report);
        *out = new relsim_retrieval_report{std::move(report), std::move(json)};
    });
}

void relsim_retrieval_report_free(relsim_retrieval_report* report) { delete report; }
double relsim_retrieval_report_mean(const relsim_retrieval_report* r) { return r ? r->report.mean : 0.0; }
size_t relsim_retrieval_report_count(const relsim_retrieval_report* r) { return r ? r->report.count : 0; }
size_t relsim_retrieval_report_failures(const relsim_retrieval_report* r) { return r ? r->report.failures : 0; }

relsim_status relsim_retrieval_report_entry(const relsim_retrieval_report* report, size_t i, const char** query_id,
                                            const char** retrieved_id, int* score) {
    return guarded([&] {
        require(report, "report");
        if (i >= report->report.per_query.size()) fail(ErrorCode::InvalidArgument, "entry index out of range");
        const auto& e = report->report.per_query[i];
        if (query_id) *query_id = e.query_id.c_str();
        if (retrieved_id) *retrieved_id = e.retrieved_id.c_str();
        if (score) *score = e.score ? e.score->value() : -1;
    });
}

const char* relsim_retrieval_report_json(const relsim_retrieval_report* report) {
    return report ? report->json.c_str() : nullptr;
}

relsim_status relsim_same_group_recall_at_1(const relsim_index* index, const relsim_judge* oracle,
                                            const char* const* queries, size_t n, double* out) {
    return guarded([&] {
        require(index, "index");
        require(oracle, "oracle");
        require(out, "out");
        if (!oracle->oracle) fail(ErrorCode::InvalidArgument, "recall needs an oracle judge");
        std::vector<std::string> q;
        for (std::size_t i = 0; i < n; ++i) q.emplace_back(queries[i]);
        *out = relsim::same_group_recall_at_1(q, index->index, oracle->oracle->groups());
    });
}

relsim_status relsim_aggregate_ab(const relsim_ab_record* records, size_t n, relsim_preference* out, char** json) {
    return guarded([&] {
        if (n > 0) require(records, "records");
        std::vector<relsim::ABRecord> list;
        list.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = records[i];
            require(r.query_id, "query_id");
            require(r.candidate_a_id, "candidate_a_id");
            require(r.candidate_b_id, "candidate_b_id");
            if (r.choice < RELSIM_CHOICE_A || r.choice > RELSIM_CHOICE_SAME) fail(ErrorCode::InvalidArgument, "bad choice");
            list.push_back({r.query_id, r.candidate_a_id, r.candidate_b_id, static_cast<relsim::ABChoice>(r.choice),
                            r.ours_is == RELSIM_SIDE_B ? relsim::Side::B : relsim::Side::A});
        }
        const auto s = relsim::aggregate_ab(list);
        if (out) *out = relsim_preference{s.ours_rate, s.baseline_rate, s.tie_rate, s.ours, s.baseline, s.ties, s.total};
        if (json) *json = dup_string(relsim::to_json(s));
    });
}

relsim_status relsim_quadrant_classify(const double* relational, const double* attribute, size_t n,
                                       double rel_threshold, double attr_threshold, relsim_quadrant* labels) {
    return guarded([&] {
        if (n > 0) {
            require(relational, "relational");
            require(attribute, "attribute");
            require(labels, "labels");
        }
        std::vector<relsim::ScoredPoint> points;
        for (std::size_t i = 0; i < n; ++i) points.push_back({std::to_string(i), relational[i], attribute[i]});
        const auto out = relsim::quadrant_classify(points, {rel_threshold, attr_threshold});
        for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<relsim_quadrant>(out[i].label);
    });
}

relsim_status relsim_percentile_threshold(const double* values, size_t n, double percentile, double* out) {
    return guarded([&] {
        require(out, "out");
        if (n > 0) require(values, "values");
        *out = relsim::percentile_threshold(std::vector<double>(values, values + n), percentile);
    });
}

relsim_status relsim_quadrant_profile(const relsim_table* relational, const relsim_table* attribute,
                                      const char* query_id, relsim_threshold_mode mode, double rel_param,
                                      double attr_param, char** csv) {
    return guarded([&] {
        require(relational, "relational");
        require(attribute, "attribute");
        require(query_id, "query_id");
        require(csv, "csv");
        const auto points = relsim::similarity_profile(relational->table, attribute->table, query_id);
        relsim::QuadrantThresholds t{rel_param, attr_param};
        if (mode == RELSIM_THRESHOLD_PERCENTILE) {
            const auto rel = relsim::percentile_thresholds(points, rel_param);
            const auto attr = relsim::percentile_thresholds(points, attr_param);
            t = {rel.relational, attr.attribute};
        }
        *csv = dup_string(relsim::quadrant_csv(relsim::quadrant_classify(points, t)));
    });
}

relsim_status relsim_analogical_benchmark(const relsim_analogical_input* models, size_t n_models,
                                          relsim_analogical_row* rows_out, char** json) {
    return guarded([&] {
        if (n_models > 0) require(models, "models");
        const auto pairs = [](const float* in, const float* out, std::size_t n, std::size_t dim) {
            const auto a = normalized_rows(in, n, dim);
            const auto b = normalized_rows(out, n, dim);
            std::vector<relsim::EmbeddingPair> p;
            for (std::size_t i = 0; i < n; ++i) p.emplace_back(a[i], b[i]);
            return p;
        };
        std::vector<relsim::ModelOutputs> inputs;
        for (std::size_t m = 0; m < n_models; ++m) {
            const auto& in = models[m];
            require(in.model_name, "model_name");
            relsim::ModelOutputs mo{in.model_name, pairs(in.rel_in, in.rel_out, in.n_pairs, in.rel_dim), {}, {}};
            if (in.attr_dim > 0) mo.attribute = pairs(in.attr_in, in.attr_out, in.n_pairs, in.attr_dim);
            if (in.perc_dim > 0) mo.perceptual = pairs(in.perc_in, in.perc_out, in.n_pairs, in.perc_dim);
            inputs.push_back(std::move(mo));
        }
        const auto result = relsim::analogical_benchmark(inputs);
        if (rows_out != nullptr) {
            for (std::size_t m = 0; m < result.size(); ++m) {
                const auto& r = result[m];
                rows_out[m] = relsim_analogical_row{r.relsim.mean,
                                                    r.relsim.std,
                                                    r.attribute ? 1 : 0,
                                                    r.attribute ? r.attribute->mean : 0.0,
                                                    r.attribute ? r.attribute->std : 0.0,
                                                    r.perceptual ? 1 : 0,
                                                    r.perceptual ? r.perceptual->mean : 0.0,
                                                    r.perceptual ? r.perceptual->std : 0.0};
            }
        }
        if (json) *json = dup_string(relsim::to_json(result));
    });
}

}  // extern "C"
