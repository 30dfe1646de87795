// relsim command-line front end. Talks to the engine only through relsim.h.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error
// (I/O, transport, internal). Machine output goes to stdout or --out;
// diagnostics go to stderr.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "relsim/relsim.h"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

struct CliError : std::runtime_error {
    CliError(int code, const std::string& message) : std::runtime_error(message), exit_code(code) {}
    int exit_code;
};

int exit_code_for(relsim_status s) {
    switch (s) {
        case RELSIM_ERR_IO:
        case RELSIM_ERR_TRANSPORT:
        case RELSIM_ERR_INTERNAL:
            return kExitRuntime;
        default:
            return kExitData;
    }
}

void check(relsim_status s, const std::string& context) {
    if (s == RELSIM_OK) return;
    throw CliError(exit_code_for(s), context + ": " + relsim_status_name(s) + ": " + relsim_last_error());
}

[[noreturn]] void data_error(const std::string& message) { throw CliError(kExitData, message); }

template <typename T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using Table = std::unique_ptr<relsim_table, Deleter<relsim_table, relsim_table_free>>;
using Index = std::unique_ptr<relsim_index, Deleter<relsim_index, relsim_index_free>>;
using Model = std::unique_ptr<relsim_model, Deleter<relsim_model, relsim_model_free>>;
using Filter = std::unique_ptr<relsim_filter, Deleter<relsim_filter, relsim_filter_free>>;
using Dataset = std::unique_ptr<relsim_dataset, Deleter<relsim_dataset, relsim_dataset_free>>;
using Judge = std::unique_ptr<relsim_judge, Deleter<relsim_judge, relsim_judge_free>>;
using Report = std::unique_ptr<relsim_retrieval_report, Deleter<relsim_retrieval_report, relsim_retrieval_report_free>>;
using Caption = std::unique_ptr<relsim_caption, Deleter<relsim_caption, relsim_caption_free>>;
using Lexicon = std::unique_ptr<relsim_lexicon, Deleter<relsim_lexicon, relsim_lexicon_free>>;

struct OwnedString {
    char* p = nullptr;
    ~OwnedString() { relsim_string_free(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

Table load_table(const std::string& path) {
    relsim_table* t = nullptr;
    check(relsim_table_load(path.c_str(), &t), path);
    return Table(t);
}

Index load_index(const std::string& path) {
    relsim_index* i = nullptr;
    check(relsim_index_load(path.c_str(), &i), path);
    return Index(i);
}

Model load_model(const std::string& path) {
    relsim_model* m = nullptr;
    check(relsim_model_load(path.c_str(), &m), path);
    return Model(m);
}

Dataset load_dataset(const std::string& path) {
    relsim_dataset* d = nullptr;
    check(relsim_dataset_load(path.c_str(), &d), path);
    return Dataset(d);
}

std::size_t find_row(const relsim_table* table, const std::string& id, const std::string& what) {
    std::size_t pos = 0;
    check(relsim_table_find(table, id.c_str(), &pos), what + " '" + id + "'");
    return pos;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError(kExitRuntime, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text) || !out.flush()) throw CliError(kExitRuntime, "cannot write " + path);
}

// Writes to --out when given, else stdout.
void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        std::cout.flush();
    } else {
        write_file(out_path, text.empty() || text.back() == '\n' ? text : text + "\n");
        std::cerr << "wrote " << out_path << "\n";
    }
}

// Non-blank lines of a JSONL file, parsed; line numbers are 1-based.
std::vector<std::pair<std::size_t, json>> read_jsonl(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<std::pair<std::size_t, json>> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.emplace_back(n, json::parse(line));
        } catch (const json::exception& e) {
            data_error(path + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::string string_field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
        data_error(where + ": missing string field \"" + key + "\"");
    }
    return j[key].get<std::string>();
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
    std::vector<const char*> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(s.c_str());
    return out;
}

// ---------------------------------------------------------------------------
// validate-captions

struct ValidateArgs {
    std::string data;
    std::string lexicon;
    bool lenient = false;
};

int cmd_validate_captions(const ValidateArgs& a) {
    Lexicon lexicon;
    if (!a.lexicon.empty()) {
        relsim_lexicon* l = nullptr;
        check(relsim_lexicon_load(a.lexicon.c_str(), &l), a.lexicon);
        lexicon.reset(l);
    } else {
        relsim_lexicon* l = nullptr;
        check(relsim_lexicon_create(nullptr, 0, &l), "lexicon");
        lexicon.reset(l);
    }
    std::size_t checked = 0;
    std::size_t violations = 0;
    std::size_t parse_errors = 0;
    for (const auto& [line, j] : read_jsonl(a.data)) {
        const std::string where = a.data + ":" + std::to_string(line);
        const auto text = string_field(j, "caption", where);
        const std::string id = j.contains("id") && j["id"].is_string()     ? j["id"].get<std::string>()
                               : j.contains("group") && j["group"].is_string() ? j["group"].get<std::string>()
                                                                           : "line " + std::to_string(line);
        ++checked;
        relsim_caption* c = nullptr;
        const auto s = relsim_caption_parse(text.c_str(), &c);
        if (s != RELSIM_OK) {
            ++parse_errors;
            std::cerr << (a.lenient ? "warning: " : "error: ") << id << ": " << relsim_status_name(s) << ": "
                      << relsim_last_error() << "\n";
            continue;
        }
        Caption caption(c);
        std::size_t n_hits = 0;
        check(relsim_caption_check(caption.get(), lexicon.get(), nullptr, 0, &n_hits), id);
        if (n_hits == 0) continue;
        std::vector<relsim_banned_hit> hits(n_hits);
        check(relsim_caption_check(caption.get(), lexicon.get(), hits.data(), hits.size(), &n_hits), id);
        ++violations;
        for (const auto& h : hits) {
            std::cerr << (a.lenient ? "warning: " : "error: ") << id << ": banned token '" << h.token
                      << "' at byte " << h.byte_offset << "\n";
        }
    }
    // A caption that fails to parse counts as one violation.
    violations += parse_errors;
    emit(json{{"checked", checked}, {"violations", violations}}.dump(), "");
    return (violations > 0 && !a.lenient) ? kExitData : 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string data;
    std::string image_emb;
    std::string text_emb;
    std::string config;
    std::string out;
    std::string log;
    std::size_t batch_size = 0;
    std::size_t steps = 0;
    double lr = 0;
    std::uint64_t seed = 0;
    std::string optimizer;
    bool symmetric = false;
    double tau_init = 0;
    bool no_bias = false;
    bool identity_init = false;
};

relsim_optimizer parse_optimizer(const std::string& name) {
    if (name == "adam") return RELSIM_OPTIMIZER_ADAM;
    if (name == "sgd") return RELSIM_OPTIMIZER_SGD;
    data_error("unknown optimizer '" + name + "' (expected adam or sgd)");
}

// Precedence: flags > config file > defaults.
relsim_train_config resolve_train_config(const TrainArgs& a, const CLI::App& cmd) {
    relsim_train_config cfg;
    relsim_train_config_init(&cfg);
    if (!a.config.empty()) {
        json j;
        try {
            j = json::parse(read_file(a.config));
        } catch (const json::exception& e) {
            data_error(a.config + ": " + e.what());
        }
        static const std::set<std::string> known{"batch_size", "steps",    "learning_rate", "seed",         "optimizer",
                                                 "symmetric_loss", "tau_init", "use_bias",      "identity_init"};
        try {
            for (const auto& [key, value] : j.items()) {
                if (!known.count(key)) data_error(a.config + ": unknown key '" + key + "'");
            }
            if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
            if (j.contains("steps")) cfg.steps = j["steps"].get<std::size_t>();
            if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
            if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
            if (j.contains("optimizer")) cfg.optimizer = parse_optimizer(j["optimizer"].get<std::string>());
            if (j.contains("symmetric_loss")) cfg.symmetric_loss = j["symmetric_loss"].get<bool>();
            if (j.contains("tau_init")) cfg.tau_init = j["tau_init"].get<double>();
            if (j.contains("use_bias")) cfg.use_bias = j["use_bias"].get<bool>();
            if (j.contains("identity_init")) cfg.identity_init = j["identity_init"].get<bool>();
        } catch (const json::exception& e) {
            data_error(a.config + ": " + e.what());
        }
    }
    if (cmd.count("--batch-size")) cfg.batch_size = a.batch_size;
    if (cmd.count("--steps")) cfg.steps = a.steps;
    if (cmd.count("--lr")) cfg.learning_rate = a.lr;
    if (cmd.count("--seed")) cfg.seed = a.seed;
    if (cmd.count("--optimizer")) cfg.optimizer = parse_optimizer(a.optimizer);
    if (cmd.count("--symmetric")) cfg.symmetric_loss = 1;
    if (cmd.count("--tau-init")) cfg.tau_init = a.tau_init;
    if (cmd.count("--no-bias")) cfg.use_bias = 0;
    if (cmd.count("--identity-init")) cfg.identity_init = 1;
    return cfg;
}

struct LogSink {
    std::ostream* out;
};

void log_step(void* ctx, size_t step, double loss, double tau) {
    auto* sink = static_cast<LogSink*>(ctx);
    *sink->out << json{{"step", step}, {"loss", loss}, {"tau", tau}}.dump() << '\n';
}

int cmd_train(const TrainArgs& a, const CLI::App& cmd) {
    const auto cfg = resolve_train_config(a, cmd);
    const auto dataset = load_dataset(a.data);
    const auto images = load_table(a.image_emb);
    const auto texts = load_table(a.text_emb);
    const std::size_t n = relsim_dataset_size(dataset.get());
    const std::size_t d_in = relsim_table_dim(images.get());
    const std::size_t d_out = relsim_table_dim(texts.get());

    // Caption rows are keyed by group id when the table has it, else by image id.
    std::vector<float> base;
    std::vector<float> captions;
    base.reserve(n * d_in);
    captions.reserve(n * d_out);
    for (std::size_t i = 0; i < n; ++i) {
        const char* id = nullptr;
        const char* caption = nullptr;
        const char* group = nullptr;
        check(relsim_dataset_record(dataset.get(), i, &id, &caption, &group), a.data);
        const float* x = relsim_table_row(images.get(), find_row(images.get(), id, "image embedding"));
        base.insert(base.end(), x, x + d_in);
        std::size_t pos = 0;
        if (group == nullptr || relsim_table_find(texts.get(), group, &pos) != RELSIM_OK) {
            pos = find_row(texts.get(), id, "text embedding");
        }
        const float* t = relsim_table_row(texts.get(), pos);
        captions.insert(captions.end(), t, t + d_out);
    }

    std::ofstream log_file;
    LogSink sink{&std::cout};
    if (!a.log.empty()) {
        log_file.open(a.log, std::ios::binary);
        if (!log_file) throw CliError(kExitRuntime, "cannot write " + a.log);
        sink.out = &log_file;
    }
    std::cerr << "training on " << n << " pairs (" << d_in << " -> " << d_out << "), " << cfg.steps
              << " steps, batch " << cfg.batch_size << ", seed " << cfg.seed << "\n";
    relsim_model* m = nullptr;
    check(relsim_train(base.data(), d_in, captions.data(), d_out, n, &cfg, log_step, &sink, &m), "train");
    const Model model(m);
    sink.out->flush();
    if (log_file.is_open() && !log_file) throw CliError(kExitRuntime, "cannot write " + a.log);
    check(relsim_model_save(model.get(), a.out.c_str()), a.out);
    *sink.out << json{{"final_model", a.out}}.dump() << '\n';
    sink.out->flush();
    if (log_file.is_open() && !log_file) throw CliError(kExitRuntime, "cannot write " + a.log);
    std::cerr << "saved model to " << a.out << " (tau " << relsim_model_tau(model.get()) << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// project, index

int cmd_project(const std::string& model_path, const std::string& emb_path, const std::string& out) {
    const auto model = load_model(model_path);
    const auto base = load_table(emb_path);
    relsim_table* t = nullptr;
    check(relsim_model_project_table(model.get(), base.get(), &t), "project");
    const Table projected(t);
    check(relsim_table_save(projected.get(), out.c_str()), out);
    std::cerr << "projected " << relsim_table_size(projected.get()) << " rows to " << out << "\n";
    return 0;
}

int cmd_index_build(const std::string& emb_path, const std::string& out) {
    const auto raw = load_table(emb_path);
    relsim_index* i = nullptr;
    check(relsim_index_build(raw.get(), &i), emb_path);
    const Index index(i);
    check(relsim_index_save(index.get(), out.c_str()), out);
    std::cerr << "indexed " << relsim_index_size(index.get()) << " rows to " << out << "\n";
    return 0;
}

int cmd_index_query(const std::string& index_path, const std::string& query_id, std::size_t k, bool exclude_self,
                    const std::string& out) {
    const auto index = load_index(index_path);
    std::vector<relsim_hit> hits(k);
    std::size_t n = 0;
    check(relsim_index_query_id(index.get(), query_id.c_str(), k, exclude_self ? 1 : 0, hits.data(), &n), "query");
    json results = json::array();
    for (std::size_t i = 0; i < n; ++i) results.push_back({{"id", hits[i].id}, {"score", hits[i].score}});
    emit(json{{"query_id", query_id}, {"k", k}, {"exclude_self", exclude_self}, {"results", results}}.dump(2), out);
    return 0;
}

// ---------------------------------------------------------------------------
// eval-retrieval

struct EvalRetrievalArgs {
    std::string index;
    std::string queries;
    std::string judge = "oracle";
    std::string groups;
    std::string out;
    std::size_t sample = 0;
    std::uint64_t seed = 0;
    std::size_t concurrency = 8;
    std::string endpoint;
    std::string judge_model;
    std::string token_env;
    std::string image_ref_template;
};

// One id per line; lines that are JSON objects contribute their "id".
std::vector<std::string> read_query_ids(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<std::string> ids;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        if (line.front() == '{') {
            try {
                ids.push_back(string_field(json::parse(line), "id", path + ":" + std::to_string(n)));
            } catch (const json::exception& ex) {
                data_error(path + ":" + std::to_string(n) + ": " + ex.what());
            }
        } else {
            ids.push_back(line);
        }
    }
    return ids;
}

int cmd_eval_retrieval(const EvalRetrievalArgs& a) {
    const auto index = load_index(a.index);
    std::vector<std::string> queries;
    if (a.queries.empty()) {
        for (std::size_t i = 0; i < relsim_index_size(index.get()); ++i) queries.emplace_back(relsim_index_id(index.get(), i));
    } else {
        queries = read_query_ids(a.queries);
    }
    if (a.sample > 0 && a.sample < queries.size()) {
        // Seeded sample without replacement, kept in input order.
        std::mt19937_64 rng(a.seed);
        std::vector<std::size_t> order(queries.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::swap(order[i], order[static_cast<std::size_t>(rng() % (i + 1))]);
        }
        order.resize(a.sample);
        std::sort(order.begin(), order.end());
        std::vector<std::string> picked;
        for (auto i : order) picked.push_back(queries[i]);
        queries = std::move(picked);
    }

    relsim_judge* j = nullptr;
    if (a.judge == "oracle") {
        if (a.groups.empty()) throw CliError(kExitUsage, "--judge oracle requires --groups");
        check(relsim_judge_create_oracle_from_file(a.groups.c_str(), &j), a.groups);
    } else {
        relsim_http_judge_config cfg;
        relsim_http_judge_config_init(&cfg);
        if (!a.endpoint.empty()) cfg.endpoint = a.endpoint.c_str();
        if (!a.judge_model.empty()) cfg.model = a.judge_model.c_str();
        if (!a.token_env.empty()) cfg.token_env = a.token_env.c_str();
        if (!a.image_ref_template.empty()) cfg.image_ref_template = a.image_ref_template.c_str();
        check(relsim_judge_create_http(&cfg, &j), "http judge");
    }
    const Judge judge(j);

    const auto ptrs = c_strings(queries);
    relsim_retrieval_report* r = nullptr;
    check(relsim_evaluate_retrieval(index.get(), judge.get(), ptrs.data(), ptrs.size(), a.concurrency, &r),
          "eval-retrieval");
    const Report report(r);
    std::cerr << "judged " << relsim_retrieval_report_count(report.get()) << " queries, mean "
              << relsim_retrieval_report_mean(report.get()) << ", failures "
              << relsim_retrieval_report_failures(report.get()) << "\n";
    emit(relsim_retrieval_report_json(report.get()), a.out);
    return 0;
}

// ---------------------------------------------------------------------------
// eval-ab

relsim_ab_choice parse_choice(const std::string& s, const std::string& where) {
    if (s == "A" || s == "a") return RELSIM_CHOICE_A;
    if (s == "B" || s == "b") return RELSIM_CHOICE_B;
    if (s == "Same" || s == "same" || s == "SAME") return RELSIM_CHOICE_SAME;
    data_error(where + ": choice must be A, B or Same");
}

int cmd_eval_ab(const std::string& records_path, const std::string& out) {
    // Lines: {"query":..,"a":..,"b":..,"choice":"A"|"B"|"Same","ours":"A"|"B"}
    struct Owned {
        std::string query, a, b;
    };
    std::vector<Owned> owned;
    std::vector<relsim_ab_record> records;
    const auto lines = read_jsonl(records_path);
    owned.reserve(lines.size());
    for (const auto& [line, j] : lines) {
        const std::string where = records_path + ":" + std::to_string(line);
        owned.push_back({string_field(j, "query", where), string_field(j, "a", where), string_field(j, "b", where)});
        const auto choice = parse_choice(string_field(j, "choice", where), where);
        const auto ours = string_field(j, "ours", where);
        if (ours != "A" && ours != "B") data_error(where + ": ours must be A or B");
        records.push_back({nullptr, nullptr, nullptr, choice, ours == "A" ? RELSIM_SIDE_A : RELSIM_SIDE_B});
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].query_id = owned[i].query.c_str();
        records[i].candidate_a_id = owned[i].a.c_str();
        records[i].candidate_b_id = owned[i].b.c_str();
    }
    relsim_preference p{};
    OwnedString text;
    check(relsim_aggregate_ab(records.data(), records.size(), &p, &text.p), records_path);
    emit(text.str(), out);
    return 0;
}

// ---------------------------------------------------------------------------
// quadrant

struct QuadrantArgs {
    std::string rel;
    std::string attr;
    std::string query_id;
    std::string mode = "percentile";
    double percentile = 0.9;
    std::optional<double> rel_threshold;
    std::optional<double> attr_threshold;
    std::string out;
};

int cmd_quadrant(const QuadrantArgs& a) {
    const auto rel = load_table(a.rel);
    const auto attr = load_table(a.attr);
    OwnedString csv;
    if (a.mode == "percentile") {
        check(relsim_quadrant_profile(rel.get(), attr.get(), a.query_id.c_str(), RELSIM_THRESHOLD_PERCENTILE,
                                      a.percentile, a.percentile, &csv.p),
              "quadrant");
    } else {
        if (!a.rel_threshold || !a.attr_threshold) {
            throw CliError(kExitUsage, "--mode absolute requires --rel-threshold and --attr-threshold");
        }
        check(relsim_quadrant_profile(rel.get(), attr.get(), a.query_id.c_str(), RELSIM_THRESHOLD_ABSOLUTE,
                                      *a.rel_threshold, *a.attr_threshold, &csv.p),
              "quadrant");
    }
    emit(csv.str(), a.out);
    return 0;
}

// ---------------------------------------------------------------------------
// filter

struct FilterTrainArgs {
    std::string emb;
    std::string labels;
    std::string out;
    std::size_t epochs = 500;
    double lr = 0.1;
    std::uint64_t seed = 0;
};

int cmd_filter_train(const FilterTrainArgs& a) {
    const auto table = load_table(a.emb);
    const std::size_t dim = relsim_table_dim(table.get());
    std::vector<float> x;
    std::vector<int> labels;
    for (const auto& [line, j] : read_jsonl(a.labels)) {
        const std::string where = a.labels + ":" + std::to_string(line);
        const auto id = string_field(j, "id", where);
        const auto label = string_field(j, "label", where);
        if (label != "interesting" && label != "ordinary") data_error(where + ": label must be interesting or ordinary");
        const float* row = relsim_table_row(table.get(), find_row(table.get(), id, "embedding"));
        x.insert(x.end(), row, row + dim);
        labels.push_back(label == "interesting" ? 1 : 0);
    }
    relsim_filter* f = nullptr;
    relsim_filter_metrics m{};
    check(relsim_filter_train(x.data(), labels.data(), labels.size(), dim, a.epochs, a.lr, a.seed, &f, &m),
          "filter train");
    const Filter filter(f);
    check(relsim_filter_save(filter.get(), a.out.c_str()), a.out);
    std::cerr << "saved filter to " << a.out << "\n";
    emit(json{{"heldout_accuracy", m.heldout_accuracy},
              {"train_accuracy", m.train_accuracy},
              {"train_count", m.train_count},
              {"heldout_count", m.heldout_count},
              {"initial_loss", m.initial_loss},
              {"final_loss", m.final_loss}}
             .dump(2),
         "");
    return 0;
}

int cmd_filter_apply(const std::string& filter_path, const std::string& emb_path, double threshold,
                     const std::string& out) {
    relsim_filter* f = nullptr;
    check(relsim_filter_load(filter_path.c_str(), &f), filter_path);
    const Filter filter(f);
    const auto table = load_table(emb_path);
    const std::size_t n = relsim_table_size(table.get());
    const std::size_t dim = relsim_table_dim(table.get());
    std::vector<float> x;
    x.reserve(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const float* row = relsim_table_row(table.get(), i);
        x.insert(x.end(), row, row + dim);
    }
    std::vector<unsigned char> keep(n);
    double rate = 0.0;
    check(relsim_filter_apply(filter.get(), x.data(), n, dim, threshold, keep.data(), &rate), "filter apply");
    json kept = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) kept.push_back(relsim_table_id(table.get(), i));
    }
    std::cerr << "kept " << kept.size() << " of " << n << " (keep rate " << rate << ")\n";
    emit(json{{"threshold", threshold}, {"total", n}, {"keep_rate", rate}, {"kept", kept}}.dump(2), out);
    return 0;
}

// ---------------------------------------------------------------------------
// expand-groups, split

int cmd_expand_groups(const std::string& groups, const std::string& out) {
    relsim_dataset* d = nullptr;
    check(relsim_expand_groups(groups.c_str(), &d), groups);
    const Dataset dataset(d);
    for (std::size_t i = 0; i < relsim_dataset_warning_count(dataset.get()); ++i) {
        std::cerr << "warning: " << relsim_dataset_warning(dataset.get(), i) << "\n";
    }
    check(relsim_dataset_save(dataset.get(), out.c_str()), out);
    emit(json{{"records", relsim_dataset_size(dataset.get())},
              {"warnings", relsim_dataset_warning_count(dataset.get())}}
             .dump(),
         "");
    return 0;
}

int cmd_split(const std::string& data, double fraction, std::uint64_t seed, const std::string& train_out,
              const std::string& test_out) {
    const auto dataset = load_dataset(data);
    relsim_dataset* tr = nullptr;
    relsim_dataset* te = nullptr;
    check(relsim_split(dataset.get(), fraction, seed, &tr, &te), "split");
    const Dataset train(tr);
    const Dataset test(te);
    check(relsim_dataset_save(train.get(), train_out.c_str()), train_out);
    check(relsim_dataset_save(test.get(), test_out.c_str()), test_out);
    emit(json{{"train", relsim_dataset_size(train.get())}, {"test", relsim_dataset_size(test.get())}}.dump(), "");
    return 0;
}

// ---------------------------------------------------------------------------
// analogical

struct AnalogicalArgs {
    std::string pairs;
    std::string model;
    std::string rel_emb;
    std::string attr_emb;
    std::string perc_emb;
    std::string out;
};

struct ModelPairs {
    std::string name;
    std::vector<std::pair<std::string, std::string>> pairs;
};

// Rows of `table` for the given ids, concatenated.
std::vector<float> gather(const relsim_table* table, const std::vector<std::string>& ids, const std::string& what) {
    const std::size_t dim = relsim_table_dim(table);
    std::vector<float> out;
    out.reserve(ids.size() * dim);
    for (const auto& id : ids) {
        const float* row = relsim_table_row(table, find_row(table, id, what));
        out.insert(out.end(), row, row + dim);
    }
    return out;
}

int cmd_analogical(const AnalogicalArgs& a) {
    // Manifest lines: {"model":"name","input":"image id","output":"image id"}
    std::vector<ModelPairs> models;
    std::map<std::string, std::size_t> slot;
    for (const auto& [line, j] : read_jsonl(a.pairs)) {
        const std::string where = a.pairs + ":" + std::to_string(line);
        const auto name = string_field(j, "model", where);
        auto [it, inserted] = slot.emplace(name, models.size());
        if (inserted) models.push_back({name, {}});
        models[it->second].pairs.emplace_back(string_field(j, "input", where), string_field(j, "output", where));
    }
    if (models.empty()) data_error(a.pairs + ": no pairs");

    const auto projection = load_model(a.model);
    const auto base = load_table(a.rel_emb);
    Table attr;
    Table perc;
    if (!a.attr_emb.empty()) attr = load_table(a.attr_emb);
    if (!a.perc_emb.empty()) perc = load_table(a.perc_emb);

    const std::size_t d_in = relsim_model_d_in(projection.get());
    const std::size_t d_out = relsim_model_d_out(projection.get());
    struct Buffers {
        std::vector<float> rel_in, rel_out, attr_in, attr_out, perc_in, perc_out;
    };
    std::vector<Buffers> buffers(models.size());
    std::vector<relsim_analogical_input> inputs;
    for (std::size_t m = 0; m < models.size(); ++m) {
        std::vector<std::string> in_ids;
        std::vector<std::string> out_ids;
        for (const auto& [i, o] : models[m].pairs) {
            in_ids.push_back(i);
            out_ids.push_back(o);
        }
        const std::size_t n = in_ids.size();
        auto& b = buffers[m];
        const auto project = [&](const std::vector<std::string>& ids, std::vector<float>& dst) {
            const auto x = gather(base.get(), ids, "base embedding");
            dst.resize(n * d_out);
            check(relsim_model_project(projection.get(), x.data(), n, d_in, dst.data()), "project");
        };
        project(in_ids, b.rel_in);
        project(out_ids, b.rel_out);
        relsim_analogical_input in{models[m].name.c_str(), n, d_out, b.rel_in.data(), b.rel_out.data(), 0,
                                   nullptr, nullptr, 0, nullptr, nullptr};
        if (attr) {
            b.attr_in = gather(attr.get(), in_ids, "attribute embedding");
            b.attr_out = gather(attr.get(), out_ids, "attribute embedding");
            in.attr_dim = relsim_table_dim(attr.get());
            in.attr_in = b.attr_in.data();
            in.attr_out = b.attr_out.data();
        }
        if (perc) {
            b.perc_in = gather(perc.get(), in_ids, "perceptual embedding");
            b.perc_out = gather(perc.get(), out_ids, "perceptual embedding");
            in.perc_dim = relsim_table_dim(perc.get());
            in.perc_in = b.perc_in.data();
            in.perc_out = b.perc_out.data();
        }
        inputs.push_back(in);
    }
    std::vector<relsim_analogical_row> rows(inputs.size());
    OwnedString text;
    check(relsim_analogical_benchmark(inputs.data(), inputs.size(), rows.data(), &text.p), "analogical");
    emit(text.str(), a.out);
    return 0;
}

// Help text of the deepest subcommand that was selected on the command line.
const CLI::App* deepest(const CLI::App* app) {
    for (const auto* sub : app->get_subcommands()) return deepest(sub);
    return app;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relsim: relational visual similarity engine"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(relsim_version()));

    ValidateArgs validate;
    auto* v = app.add_subcommand("validate-captions", "Check caption templates for syntax and banned tokens");
    v->add_option("--data", validate.data, "JSONL with a \"caption\" field per line")->required();
    v->add_option("--lexicon", validate.lexicon, "Banned-token list, one per line ('#' comments)");
    v->add_flag("--lenient", validate.lenient, "Report problems as warnings and exit 0");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train the relational projection head");
    t->add_option("--data", train.data, "Dataset JSONL (id, caption, group)")->required();
    t->add_option("--image-emb", train.image_emb, "RSEB base image features keyed by image id")->required();
    t->add_option("--text-emb", train.text_emb, "RSEB caption embeddings keyed by group or image id")->required();
    t->add_option("--config", train.config, "JSON training config");
    t->add_option("--out", train.out, "Output model (RSEB)")->required();
    t->add_option("--log", train.log, "Write the JSONL training log here instead of stdout");
    t->add_option("--batch-size", train.batch_size);
    t->add_option("--steps", train.steps);
    t->add_option("--lr", train.lr);
    t->add_option("--seed", train.seed);
    t->add_option("--optimizer", train.optimizer, "adam or sgd");
    t->add_flag("--symmetric", train.symmetric, "Average image->text and text->image losses");
    t->add_option("--tau-init", train.tau_init);
    t->add_flag("--no-bias", train.no_bias);
    t->add_flag("--identity-init", train.identity_init, "Start from W = I (requires d_in == d_out)");

    std::string project_model;
    std::string project_emb;
    std::string project_out;
    auto* p = app.add_subcommand("project", "Project base features into the relational space");
    p->add_option("--model", project_model)->required();
    p->add_option("--image-emb", project_emb)->required();
    p->add_option("--out", project_out)->required();

    auto* idx = app.add_subcommand("index", "Build or query an exact cosine index");
    idx->require_subcommand(1);
    std::string build_emb;
    std::string build_out;
    auto* ib = idx->add_subcommand("build", "Normalize embeddings into an index file");
    ib->add_option("--emb", build_emb)->required();
    ib->add_option("--out", build_out)->required();
    std::string query_index;
    std::string query_id;
    std::size_t query_k = 10;
    bool exclude_self = false;
    std::string query_out;
    auto* iq = idx->add_subcommand("query", "Top-k neighbours of an indexed id");
    iq->add_option("--index", query_index)->required();
    iq->add_option("--query-id", query_id)->required();
    iq->add_option("--k", query_k)->capture_default_str();
    iq->add_flag("--exclude-self", exclude_self);
    iq->add_option("--out", query_out);

    EvalRetrievalArgs eval;
    auto* er = app.add_subcommand("eval-retrieval", "Judge top-1 retrievals");
    er->add_option("--index", eval.index)->required();
    er->add_option("--queries", eval.queries, "Query ids, one per line (default: every indexed id)");
    er->add_option("--judge", eval.judge)->check(CLI::IsMember({"oracle", "http"}))->capture_default_str();
    er->add_option("--groups", eval.groups, "Groups or dataset JSONL for the oracle judge");
    er->add_option("--out", eval.out);
    er->add_option("--sample", eval.sample, "Judge a seeded random subset of this many queries");
    er->add_option("--seed", eval.seed)->capture_default_str();
    er->add_option("--concurrency", eval.concurrency)->capture_default_str();
    er->add_option("--endpoint", eval.endpoint, "Judge URL (default: $RELSIM_JUDGE_URL)");
    er->add_option("--judge-model", eval.judge_model);
    er->add_option("--token-env", eval.token_env, "Environment variable holding the judge token");
    er->add_option("--image-ref-template", eval.image_ref_template, "Image URL pattern, {id} is replaced");

    std::string ab_records;
    std::string ab_out;
    auto* ab = app.add_subcommand("eval-ab", "Aggregate pairwise preference records");
    ab->add_option("--records", ab_records)->required();
    ab->add_option("--out", ab_out);

    QuadrantArgs quadrant;
    auto* q = app.add_subcommand("quadrant", "Relational vs attribute similarity profile of a query");
    q->add_option("--rel", quadrant.rel)->required();
    q->add_option("--attr", quadrant.attr)->required();
    q->add_option("--query-id", quadrant.query_id)->required();
    q->add_option("--mode", quadrant.mode)->check(CLI::IsMember({"percentile", "absolute"}))->capture_default_str();
    q->add_option("--percentile", quadrant.percentile)->capture_default_str();
    q->add_option("--rel-threshold", quadrant.rel_threshold);
    q->add_option("--attr-threshold", quadrant.attr_threshold);
    q->add_option("--out", quadrant.out);

    auto* f = app.add_subcommand("filter", "Interestingness filter");
    f->require_subcommand(1);
    FilterTrainArgs filter_train;
    auto* ft = f->add_subcommand("train", "Fit the logistic probe");
    ft->add_option("--emb", filter_train.emb)->required();
    ft->add_option("--labels", filter_train.labels, "JSONL {\"id\", \"label\": interesting|ordinary}")->required();
    ft->add_option("--out", filter_train.out)->required();
    ft->add_option("--epochs", filter_train.epochs)->capture_default_str();
    ft->add_option("--lr", filter_train.lr)->capture_default_str();
    ft->add_option("--seed", filter_train.seed)->capture_default_str();
    std::string apply_filter;
    std::string apply_emb;
    double apply_threshold = 0.5;
    std::string apply_out;
    auto* fa = f->add_subcommand("apply", "Score embeddings and keep the interesting ones");
    fa->add_option("--filter", apply_filter)->required();
    fa->add_option("--emb", apply_emb)->required();
    fa->add_option("--threshold", apply_threshold)->capture_default_str();
    fa->add_option("--out", apply_out);

    std::string expand_in;
    std::string expand_out;
    auto* eg = app.add_subcommand("expand-groups", "One dataset record per grouped image");
    eg->add_option("--groups", expand_in)->required();
    eg->add_option("--out", expand_out)->required();

    std::string split_data;
    double split_fraction = 0.0;
    std::uint64_t split_seed = 0;
    std::string split_train;
    std::string split_test;
    auto* sp = app.add_subcommand("split", "Seeded train/test split");
    sp->add_option("--data", split_data)->required();
    sp->add_option("--test-fraction", split_fraction)->required();
    sp->add_option("--seed", split_seed)->capture_default_str();
    sp->add_option("--train-out", split_train)->required();
    sp->add_option("--test-out", split_test)->required();

    AnalogicalArgs analogical;
    auto* an = app.add_subcommand("analogical", "Score input/output pairs of generation models");
    an->add_option("--pairs", analogical.pairs, "JSONL {\"model\", \"input\", \"output\"}")->required();
    an->add_option("--model", analogical.model, "Relational projection (RSEB)")->required();
    an->add_option("--rel-emb", analogical.rel_emb, "Base features of every referenced image")->required();
    an->add_option("--attr-emb", analogical.attr_emb, "Attribute embeddings (optional column)");
    an->add_option("--perc-emb", analogical.perc_emb, "Perceptual embeddings (optional column)");
    an->add_option("--out", analogical.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n\n" << deepest(&app)->help();
        return kExitUsage;
    }

    try {
        if (*v) return cmd_validate_captions(validate);
        if (*t) return cmd_train(train, *t);
        if (*p) return cmd_project(project_model, project_emb, project_out);
        if (*ib) return cmd_index_build(build_emb, build_out);
        if (*iq) return cmd_index_query(query_index, query_id, query_k, exclude_self, query_out);
        if (*er) return cmd_eval_retrieval(eval);
        if (*ab) return cmd_eval_ab(ab_records, ab_out);
        if (*q) return cmd_quadrant(quadrant);
        if (*ft) return cmd_filter_train(filter_train);
        if (*fa) return cmd_filter_apply(apply_filter, apply_emb, apply_threshold, apply_out);
        if (*eg) return cmd_expand_groups(expand_in, expand_out);
        if (*sp) return cmd_split(split_data, split_fraction, split_seed, split_train, split_test);
        if (*an) return cmd_analogical(analogical);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (e.exit_code == kExitUsage) std::cerr << "\n" << deepest(&app)->help();
        return e.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
