/*
 * relsim C API.
 *
 * Every fallible call returns relsim_status; on failure a message for the
 * calling thread is available from relsim_last_error() until the next failing
 * call on that thread. Objects are opaque handles released with their
 * matching *_free function (NULL is accepted). Strings returned as
 * `const char*` are owned by the handle they came from; strings returned
 * through `char**` are owned by the caller and released with
 * relsim_string_free(). Float buffers are row-major.
 */
#ifndef RELSIM_H
#define RELSIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(RELSIM_BUILDING)
#    define RELSIM_API __declspec(dllexport)
#  else
#    define RELSIM_API __declspec(dllimport)
#  endif
#else
#  define RELSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum relsim_status {
    RELSIM_OK = 0,
    RELSIM_ERR_INVALID_ARGUMENT = 1,
    RELSIM_ERR_DIM_MISMATCH = 2,
    RELSIM_ERR_ZERO_VECTOR = 3,
    RELSIM_ERR_NON_POSITIVE_TEMPERATURE = 4,
    RELSIM_ERR_EMPTY = 5,
    RELSIM_ERR_DUPLICATE_ID = 6,
    RELSIM_ERR_UNKNOWN_ID = 7,
    RELSIM_ERR_IO = 8,
    RELSIM_ERR_BAD_MAGIC = 9,
    RELSIM_ERR_UNSUPPORTED_VERSION = 10,
    RELSIM_ERR_CORRUPT = 11,
    RELSIM_ERR_UNBALANCED_BRACE = 12,
    RELSIM_ERR_EMPTY_PLACEHOLDER = 13,
    RELSIM_ERR_NESTED_BRACE = 14,
    RELSIM_ERR_SINGLE_CLASS = 15,
    RELSIM_ERR_INSUFFICIENT_SPLIT = 16,
    RELSIM_ERR_DUPLICATE_IMAGE_ACROSS_GROUPS = 17,
    RELSIM_ERR_UNPARSEABLE_CAPTION = 18,
    RELSIM_ERR_TRANSPORT = 19,
    RELSIM_ERR_PARSE_FAILURE = 20,
    RELSIM_ERR_OUT_OF_RANGE = 21,
    RELSIM_ERR_INTERNAL = 22
} relsim_status;

RELSIM_API const char* relsim_version(void);
RELSIM_API const char* relsim_status_name(relsim_status status);
RELSIM_API const char* relsim_last_error(void);
RELSIM_API void relsim_string_free(char* s);

/* ---- similarity arithmetic -------------------------------------------- */

RELSIM_API relsim_status relsim_normalize(const float* in, size_t dim, float* out);
/* a and b must be unit length. */
RELSIM_API relsim_status relsim_cosine(const float* a, const float* b, size_t dim, double* out);
/* out receives n_images * n_texts scores cosine(image_i, text_j) / tau. */
RELSIM_API relsim_status relsim_similarity_matrix(const float* images, size_t n_images, const float* texts,
                                                  size_t n_texts, size_t dim, double tau, double* out);

/* ---- RSEB tables -------------------------------------------------------- */

typedef struct relsim_table relsim_table;

typedef enum relsim_section {
    RELSIM_SECTION_EMBEDDINGS = 1,
    RELSIM_SECTION_MODEL = 2
} relsim_section;

RELSIM_API relsim_status relsim_table_create(uint32_t dim, relsim_table** out);
RELSIM_API relsim_status relsim_table_append(relsim_table* table, const char* id, const float* row, size_t dim);
RELSIM_API relsim_status relsim_table_load(const char* path, relsim_table** out);
RELSIM_API relsim_status relsim_table_save(const relsim_table* table, const char* path);
RELSIM_API void relsim_table_free(relsim_table* table);
RELSIM_API size_t relsim_table_size(const relsim_table* table);
RELSIM_API uint32_t relsim_table_dim(const relsim_table* table);
RELSIM_API relsim_section relsim_table_section(const relsim_table* table);
/* NULL when i is out of range. */
RELSIM_API const char* relsim_table_id(const relsim_table* table, size_t i);
RELSIM_API const float* relsim_table_row(const relsim_table* table, size_t i);
RELSIM_API relsim_status relsim_table_find(const relsim_table* table, const char* id, size_t* position);

/* ---- exact cosine index ------------------------------------------------- */

typedef struct relsim_index relsim_index;

typedef struct relsim_hit {
    const char* id; /* owned by the index */
    double score;
} relsim_hit;

/* Normalizes every row of raw. */
RELSIM_API relsim_status relsim_index_build(const relsim_table* raw, relsim_index** out);
RELSIM_API relsim_status relsim_index_load(const char* path, relsim_index** out);
RELSIM_API relsim_status relsim_index_save(const relsim_index* index, const char* path);
RELSIM_API void relsim_index_free(relsim_index* index);
RELSIM_API size_t relsim_index_size(const relsim_index* index);
RELSIM_API uint32_t relsim_index_dim(const relsim_index* index);
RELSIM_API const char* relsim_index_id(const relsim_index* index, size_t i);
/* The query is normalized first. hits must hold k entries; *n_hits <= k. */
RELSIM_API relsim_status relsim_index_query(const relsim_index* index, const float* query, size_t dim, size_t k,
                                            const char* const* exclude, size_t n_exclude, relsim_hit* hits,
                                            size_t* n_hits);
RELSIM_API relsim_status relsim_index_query_id(const relsim_index* index, const char* id, size_t k,
                                               int exclude_self, relsim_hit* hits, size_t* n_hits);

/* ---- anonymous captions ------------------------------------------------- */

typedef struct relsim_caption relsim_caption;
typedef struct relsim_lexicon relsim_lexicon;

typedef struct relsim_banned_hit {
    const char* token; /* owned by the lexicon */
    size_t byte_offset;
} relsim_banned_hit;

RELSIM_API relsim_status relsim_caption_parse(const char* text, relsim_caption** out);
RELSIM_API void relsim_caption_free(relsim_caption* caption);
RELSIM_API size_t relsim_caption_placeholder_count(const relsim_caption* caption);
RELSIM_API const char* relsim_caption_placeholder(const relsim_caption* caption, size_t i);
RELSIM_API const char* relsim_caption_signature(const relsim_caption* caption);
RELSIM_API const char* relsim_caption_render(const relsim_caption* caption);

RELSIM_API relsim_status relsim_lexicon_load(const char* path, relsim_lexicon** out);
RELSIM_API relsim_status relsim_lexicon_create(const char* const* tokens, size_t n, relsim_lexicon** out);
RELSIM_API void relsim_lexicon_free(relsim_lexicon* lexicon);

/* *n_hits receives the total hit count; at most capacity hits are written. */
RELSIM_API relsim_status relsim_caption_check(const relsim_caption* caption, const relsim_lexicon* lexicon,
                                              relsim_banned_hit* hits, size_t capacity, size_t* n_hits);

/* ---- alignment training -------------------------------------------------- */

typedef struct relsim_model relsim_model;

typedef enum relsim_optimizer {
    RELSIM_OPTIMIZER_ADAM = 0,
    RELSIM_OPTIMIZER_SGD = 1
} relsim_optimizer;

typedef struct relsim_train_config {
    size_t batch_size;
    size_t steps;
    double learning_rate;
    uint64_t seed;
    relsim_optimizer optimizer;
    int symmetric_loss;
    double tau_init;
    int use_bias;
    int identity_init;
} relsim_train_config;

typedef void (*relsim_train_log_fn)(void* ctx, size_t step, double loss, double tau);

/* Defaults: batch 32, 1000 steps, Adam 1e-3, seed 0, tau 0.07, bias on. */
RELSIM_API void relsim_train_config_init(relsim_train_config* config);

RELSIM_API relsim_status relsim_info_nce_loss(const float* images, const float* texts, size_t n, size_t dim,
                                              double tau, int symmetric, double* out);

/* base: n × d_in features; captions: n × d_out (re-normalized internally).
 * log may be NULL. */
RELSIM_API relsim_status relsim_train(const float* base, size_t d_in, const float* captions, size_t d_out, size_t n,
                                      const relsim_train_config* config, relsim_train_log_fn log, void* ctx,
                                      relsim_model** out);

RELSIM_API relsim_status relsim_model_load(const char* path, relsim_model** out);
RELSIM_API relsim_status relsim_model_save(const relsim_model* model, const char* path);
RELSIM_API void relsim_model_free(relsim_model* model);
RELSIM_API size_t relsim_model_d_in(const relsim_model* model);
RELSIM_API size_t relsim_model_d_out(const relsim_model* model);
RELSIM_API double relsim_model_tau(const relsim_model* model);
/* x: n × d_in; out: n × d_out unit rows. */
RELSIM_API relsim_status relsim_model_project(const relsim_model* model, const float* x, size_t n, size_t d_in,
                                              float* out);
/* Projects every row of base into a new embeddings table with the same ids. */
RELSIM_API relsim_status relsim_model_project_table(const relsim_model* model, const relsim_table* base,
                                                    relsim_table** out);

/* ---- interestingness filter -------------------------------------------- */

typedef struct relsim_filter relsim_filter;

typedef struct relsim_filter_metrics {
    double heldout_accuracy;
    double train_accuracy;
    size_t train_count;
    size_t heldout_count;
    double initial_loss;
    double final_loss;
} relsim_filter_metrics;

/* labels: 1 = interesting, 0 = ordinary. */
RELSIM_API relsim_status relsim_filter_train(const float* x, const int* labels, size_t n, size_t dim, size_t epochs,
                                             double learning_rate, uint64_t seed, relsim_filter** out,
                                             relsim_filter_metrics* metrics);
RELSIM_API relsim_status relsim_filter_load(const char* path, relsim_filter** out);
RELSIM_API relsim_status relsim_filter_save(const relsim_filter* filter, const char* path);
RELSIM_API void relsim_filter_free(relsim_filter* filter);
RELSIM_API size_t relsim_filter_dim(const relsim_filter* filter);
RELSIM_API relsim_status relsim_filter_score(const relsim_filter* filter, const float* x, size_t dim, double* out);
/* keep[i] = score(x_i) >= threshold. */
RELSIM_API relsim_status relsim_filter_apply(const relsim_filter* filter, const float* x, size_t n, size_t dim,
                                             double threshold, unsigned char* keep, double* keep_rate);

/* ---- dataset pipeline --------------------------------------------------- */

typedef struct relsim_dataset relsim_dataset;

RELSIM_API relsim_status relsim_dataset_load(const char* path, relsim_dataset** out);
RELSIM_API relsim_status relsim_dataset_save(const relsim_dataset* dataset, const char* path);
RELSIM_API void relsim_dataset_free(relsim_dataset* dataset);
RELSIM_API size_t relsim_dataset_size(const relsim_dataset* dataset);
/* group receives NULL for records without a group. */
RELSIM_API relsim_status relsim_dataset_record(const relsim_dataset* dataset, size_t i, const char** id,
                                               const char** caption, const char** group);
RELSIM_API size_t relsim_dataset_warning_count(const relsim_dataset* dataset);
RELSIM_API const char* relsim_dataset_warning(const relsim_dataset* dataset, size_t i);

RELSIM_API relsim_status relsim_expand_groups(const char* groups_path, relsim_dataset** out);
RELSIM_API relsim_status relsim_split(const relsim_dataset* dataset, double test_fraction, uint64_t seed,
                                      relsim_dataset** train, relsim_dataset** test);

/* ---- evaluation ---------------------------------------------------------- */

typedef struct relsim_judge relsim_judge;
typedef struct relsim_retrieval_report relsim_retrieval_report;

/* Return 0 and set *score (0..10) on success; nonzero marks a failed judgement. */
typedef int (*relsim_judge_fn)(void* ctx, const char* query_id, const char* retrieved_id, int* score);

typedef struct relsim_http_judge_config {
    const char* endpoint;           /* NULL: read RELSIM_JUDGE_URL */
    const char* model;              /* NULL: "gpt-4o" */
    const char* token_env;          /* NULL: "RELSIM_JUDGE_TOKEN" */
    const char* prompt;             /* NULL: bundled prompt */
    const char* image_ref_template; /* NULL: "{id}" */
    int max_retries;
    uint32_t initial_backoff_ms;
    uint32_t timeout_s;
} relsim_http_judge_config;

RELSIM_API void relsim_http_judge_config_init(relsim_http_judge_config* config);
RELSIM_API const char* relsim_default_judge_prompt(void);

RELSIM_API relsim_status relsim_judge_create_oracle(const char* const* ids, const char* const* groups, size_t n,
                                                    relsim_judge** out);
/* Accepts a groups file or a dataset file. */
RELSIM_API relsim_status relsim_judge_create_oracle_from_file(const char* path, relsim_judge** out);
RELSIM_API relsim_status relsim_judge_create_callback(relsim_judge_fn fn, void* ctx, relsim_judge** out);
RELSIM_API relsim_status relsim_judge_create_http(const relsim_http_judge_config* config, relsim_judge** out);
RELSIM_API void relsim_judge_free(relsim_judge* judge);
RELSIM_API relsim_status relsim_judge_score(const relsim_judge* judge, const char* query_id,
                                            const char* retrieved_id, int* score);

RELSIM_API relsim_status relsim_evaluate_retrieval(const relsim_index* index, const relsim_judge* judge,
                                                   const char* const* queries, size_t n, size_t max_concurrency,
                                                   relsim_retrieval_report** out);
RELSIM_API void relsim_retrieval_report_free(relsim_retrieval_report* report);
RELSIM_API double relsim_retrieval_report_mean(const relsim_retrieval_report* report);
RELSIM_API size_t relsim_retrieval_report_count(const relsim_retrieval_report* report);
RELSIM_API size_t relsim_retrieval_report_failures(const relsim_retrieval_report* report);
/* score receives -1 for a failed judgement. */
RELSIM_API relsim_status relsim_retrieval_report_entry(const relsim_retrieval_report* report, size_t i,
                                                       const char** query_id, const char** retrieved_id, int* score);
RELSIM_API const char* relsim_retrieval_report_json(const relsim_retrieval_report* report);

/* judge must be an oracle judge. */
RELSIM_API relsim_status relsim_same_group_recall_at_1(const relsim_index* index, const relsim_judge* oracle,
                                                       const char* const* queries, size_t n, double* out);

typedef enum relsim_ab_choice { RELSIM_CHOICE_A = 0, RELSIM_CHOICE_B = 1, RELSIM_CHOICE_SAME = 2 } relsim_ab_choice;
typedef enum relsim_side { RELSIM_SIDE_A = 0, RELSIM_SIDE_B = 1 } relsim_side;

typedef struct relsim_ab_record {
    const char* query_id;
    const char* candidate_a_id;
    const char* candidate_b_id;
    relsim_ab_choice choice;
    relsim_side ours_is;
} relsim_ab_record;

typedef struct relsim_preference {
    double ours_rate;
    double baseline_rate;
    double tie_rate;
    size_t ours;
    size_t baseline;
    size_t ties;
    size_t total;
} relsim_preference;

RELSIM_API relsim_status relsim_aggregate_ab(const relsim_ab_record* records, size_t n, relsim_preference* out,
                                             char** json);

typedef enum relsim_quadrant {
    RELSIM_QUADRANT_SAME_LOGIC_SAME_LOOK = 0,
    RELSIM_QUADRANT_SAME_LOGIC_DIFFERENT_LOOK = 1,
    RELSIM_QUADRANT_DIFFERENT_LOGIC_SAME_LOOK = 2,
    RELSIM_QUADRANT_RANDOM = 3
} relsim_quadrant;

typedef enum relsim_threshold_mode { RELSIM_THRESHOLD_PERCENTILE = 0, RELSIM_THRESHOLD_ABSOLUTE = 1 } relsim_threshold_mode;

RELSIM_API relsim_status relsim_quadrant_classify(const double* relational, const double* attribute, size_t n,
                                                  double rel_threshold, double attr_threshold,
                                                  relsim_quadrant* labels);
RELSIM_API relsim_status relsim_percentile_threshold(const double* values, size_t n, double percentile, double* out);
/* Scores query_id against every other shared id in both tables and labels the
 * points. In percentile mode rel_param/attr_param are percentiles in [0, 1);
 * in absolute mode they are the thresholds. *csv receives
 * "id,relational,attribute,label" rows. */
RELSIM_API relsim_status relsim_quadrant_profile(const relsim_table* relational, const relsim_table* attribute,
                                                 const char* query_id, relsim_threshold_mode mode, double rel_param,
                                                 double attr_param, char** csv);

typedef struct relsim_analogical_input {
    const char* model_name;
    size_t n_pairs;
    size_t rel_dim;
    const float* rel_in;  /* n_pairs × rel_dim */
    const float* rel_out;
    size_t attr_dim;      /* 0: no attribute column */
    const float* attr_in;
    const float* attr_out;
    size_t perc_dim;      /* 0: no perceptual column */
    const float* perc_in;
    const float* perc_out;
} relsim_analogical_input;

typedef struct relsim_analogical_row {
    double relsim_mean;
    double relsim_std;
    int has_attribute;
    double attribute_mean;
    double attribute_std;
    int has_perceptual;
    double perceptual_mean;
    double perceptual_std;
} relsim_analogical_row;

/* Rows are normalized internally. rows must hold n_models entries; json may be NULL. */
RELSIM_API relsim_status relsim_analogical_benchmark(const relsim_analogical_input* models, size_t n_models,
                                                     relsim_analogical_row* rows, char** json);

#ifdef __cplusplus
}
#endif

#endif /* RELSIM_H */
