#include "relsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "relsim/error.hpp"
#include "relsim/random.hpp"

namespace relsim {

using json = nlohmann::json;

namespace {

double sigmoid(double z) {
    // Split by sign so exp never overflows.
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// -log sigmoid(z) for y = 1, -log(1 - sigmoid(z)) for y = 0, overflow-free.
double cross_entropy(double z, double y) {
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return softplus - y * z;
}

template <typename F>
void for_each_jsonl_line(std::string_view text, F&& handle) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(ErrorCode::Corrupt, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object()) fail(ErrorCode::Corrupt, "line " + std::to_string(line_no) + ": expected an object");
        try {
            handle(j, line_no);
        } catch (const json::exception& e) {
            fail(ErrorCode::Corrupt, "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::string id_field(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return v.dump();
    fail(ErrorCode::Corrupt, std::string("field '") + key + "' must be a string or integer");
}

CaptionTemplate parse_record_caption(const std::string& raw, const std::string& where) {
    try {
        return parse_caption(raw);
    } catch (const Error& e) {
        fail(ErrorCode::UnparseableCaption, where + ": " + error_code_name(e.code()) + ": " + e.what());
    }
}

}  // namespace

FilterModel::FilterModel(std::vector<double> weight, double bias) : weight_(std::move(weight)), bias_(bias) {
    if (weight_.empty()) fail(ErrorCode::InvalidArgument, "filter weight must be nonempty");
    const bool finite = std::all_of(weight_.begin(), weight_.end(), [](double w) { return std::isfinite(w); });
    if (!finite || !std::isfinite(bias_)) fail(ErrorCode::InvalidArgument, "filter parameters must be finite");
}

double FilterModel::logit(std::span<const float> x) const {
    if (x.size() != weight_.size()) {
        fail(ErrorCode::DimMismatch, "filter input dim " + std::to_string(x.size()) + " != " +
                                         std::to_string(weight_.size()));
    }
    double z = bias_;
    for (std::size_t k = 0; k < x.size(); ++k) z += weight_[k] * static_cast<double>(x[k]);
    return z;
}

double FilterModel::score(std::span<const float> x) const { return sigmoid(logit(x)); }

FilterTrainResult train_filter(const std::vector<LabeledExample>& examples, const FilterTrainConfig& config) {
    if (examples.empty()) fail(ErrorCode::Empty, "no labelled examples");
    const bool has_pos = std::any_of(examples.begin(), examples.end(),
                                     [](const LabeledExample& e) { return e.label == Label::Interesting; });
    const bool has_neg = std::any_of(examples.begin(), examples.end(),
                                     [](const LabeledExample& e) { return e.label == Label::Ordinary; });
    if (!has_pos || !has_neg) fail(ErrorCode::SingleClass, "filter training needs both labels");
    if (!(config.learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning rate must be > 0");
    if (!(config.heldout_fraction > 0.0 && config.heldout_fraction < 1.0)) {
        fail(ErrorCode::InvalidArgument, "heldout fraction must lie in (0, 1)");
    }
    const std::size_t dim = examples.front().embedding.dim();
    for (const auto& e : examples) {
        if (e.embedding.dim() != dim) fail(ErrorCode::DimMismatch, "inconsistent example dims");
    }

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(config.seed);
    rng.shuffle(order);
    const auto n = examples.size();
    auto heldout = static_cast<std::size_t>(std::llround(config.heldout_fraction * static_cast<double>(n)));
    heldout = std::clamp<std::size_t>(heldout, 1, n - 1);
    const std::span<const std::size_t> test_idx(order.data(), heldout);
    const std::span<const std::size_t> train_idx(order.data() + heldout, n - heldout);

    std::vector<double> w(dim, 0.0);
    double b = 0.0;
    const auto inv_n = 1.0 / static_cast<double>(train_idx.size());
    const auto mean_loss = [&](std::vector<double>* grad_w, double* grad_b) {
        double loss = 0.0;
        for (std::size_t i : train_idx) {
            const auto x = examples[i].embedding.values();
            double z = b;
            for (std::size_t k = 0; k < dim; ++k) z += w[k] * x[k];
            const double y = examples[i].label == Label::Interesting ? 1.0 : 0.0;
            loss += cross_entropy(z, y);
            if (grad_w) {
                const double r = sigmoid(z) - y;
                for (std::size_t k = 0; k < dim; ++k) (*grad_w)[k] += r * x[k];
                *grad_b += r;
            }
        }
        return loss * inv_n;
    };

    std::vector<double> history;
    history.reserve(config.epochs + 1);
    std::vector<double> grad_w(dim);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        double grad_b = 0.0;
        history.push_back(mean_loss(&grad_w, &grad_b));
        for (std::size_t k = 0; k < dim; ++k) w[k] -= config.learning_rate * grad_w[k] * inv_n;
        b -= config.learning_rate * grad_b * inv_n;
    }
    history.push_back(mean_loss(nullptr, nullptr));

    FilterModel model(std::move(w), b);
    const auto accuracy = [&](std::span<const std::size_t> idx) {
        std::size_t correct = 0;
        for (std::size_t i : idx) {
            const bool predicted = model.score(examples[i].embedding.values()) >= 0.5;
            correct += predicted == (examples[i].label == Label::Interesting) ? 1 : 0;
        }
        return static_cast<double>(correct) / static_cast<double>(idx.size());
    };
    return FilterTrainResult{model, accuracy(test_idx), accuracy(train_idx), train_idx.size(),
                             test_idx.size(), std::move(history)};
}

FilterDecision apply_filter(const FilterModel& model,
                            const std::vector<std::pair<std::string, Embedding>>& entries, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::InvalidArgument, "threshold must lie in (0, 1)");
    FilterDecision out;
    out.scores.reserve(entries.size());
    for (const auto& [id, e] : entries) {
        const double s = model.score(e.values());
        out.scores.push_back(s);
        if (s >= threshold) out.kept.push_back(id);
    }
    out.keep_rate = entries.empty() ? 0.0
                                    : static_cast<double>(out.kept.size()) / static_cast<double>(entries.size());
    return out;
}

EmbeddingTable filter_to_table(const FilterModel& model) {
    EmbeddingTable table(SectionTag::Model, static_cast<std::uint32_t>(model.dim()));
    std::vector<float> row(model.dim());
    for (std::size_t k = 0; k < model.dim(); ++k) row[k] = static_cast<float>(model.weight()[k]);
    table.append("filter/weight", row);
    std::fill(row.begin(), row.end(), 0.0f);
    row[0] = static_cast<float>(model.bias());
    table.append("filter/bias", row);
    return table;
}

FilterModel filter_from_table(const EmbeddingTable& table) {
    if (table.tag() != SectionTag::Model || table.size() != 2 || !table.contains("filter/weight") ||
        !table.contains("filter/bias")) {
        fail(ErrorCode::Corrupt, "not a filter model section");
    }
    const auto w = table.row(table.position("filter/weight"));
    return FilterModel(std::vector<double>(w.begin(), w.end()), table.row(table.position("filter/bias"))[0]);
}

ExpandResult expand_groups(const std::vector<GroupRecord>& groups) {
    ExpandResult out;
    std::set<std::string> seen;
    for (const auto& g : groups) {
        const auto n = g.image_ids.size();
        if (n < kMinGroupSize || n > kMaxGroupSize) {
            out.warnings.push_back("group '" + g.group_id + "' has " + std::to_string(n) +
                                   " images, outside [2, 10]");
        }
        // Re-parse so a caption that was mutated after construction is still checked.
        parse_record_caption(g.caption.raw(), "group '" + g.group_id + "'");
        for (const auto& image : g.image_ids) {
            if (!seen.insert(image).second) {
                fail(ErrorCode::DuplicateImageAcrossGroups,
                     "image '" + image + "' appears more than once (group '" + g.group_id + "')");
            }
            out.records.push_back({image, g.caption.raw(), g.group_id});
        }
    }
    return out;
}

Split split_dataset(const std::vector<DatasetRecord>& records, double test_fraction, std::uint64_t seed) {
    if (records.empty()) fail(ErrorCode::Empty, "cannot split an empty dataset");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        fail(ErrorCode::InvalidArgument, "test fraction must lie in (0, 1)");
    }
    const auto n = records.size();
    const auto test_size = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    if (test_size == 0 || test_size == n) {
        fail(ErrorCode::InsufficientSplit, "test fraction " + std::to_string(test_fraction) + " of " +
                                               std::to_string(n) + " records leaves one side empty");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    Split out;
    out.test.reserve(test_size);
    out.train.reserve(n - test_size);
    for (std::size_t k = 0; k < n; ++k) {
        (k < test_size ? out.test : out.train).push_back(records[order[k]]);
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot open " + path + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

std::vector<DatasetRecord> parse_dataset_jsonl(std::string_view text) {
    std::vector<DatasetRecord> records;
    for_each_jsonl_line(text, [&](const json& j, std::size_t line_no) {
        DatasetRecord r;
        r.image_id = id_field(j, "id");
        r.caption_raw = j.at("caption").get<std::string>();
        if (j.contains("group") && !j.at("group").is_null()) r.group_id = id_field(j, "group");
        parse_record_caption(r.caption_raw, "line " + std::to_string(line_no));
        records.push_back(std::move(r));
    });
    return records;
}

std::vector<DatasetRecord> load_dataset_jsonl(const std::string& path) {
    return parse_dataset_jsonl(read_text_file(path));
}

std::string dataset_to_jsonl(const std::vector<DatasetRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        json j{{"id", r.image_id}, {"caption", r.caption_raw}};
        if (r.group_id) j["group"] = *r.group_id;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_dataset_jsonl(const std::vector<DatasetRecord>& records, const std::string& path) {
    write_text_file(path, dataset_to_jsonl(records));
}

std::vector<GroupRecord> parse_groups_jsonl(std::string_view text) {
    std::vector<GroupRecord> groups;
    for_each_jsonl_line(text, [&](const json& j, std::size_t line_no) {
        GroupRecord g{id_field(j, "group"), {}, {}};
        for (const auto& image : j.at("images")) {
            if (!image.is_string()) fail(ErrorCode::Corrupt, "line " + std::to_string(line_no) + ": image ids must be strings");
            g.image_ids.push_back(image.get<std::string>());
        }
        g.caption = parse_record_caption(j.at("caption").get<std::string>(), "line " + std::to_string(line_no));
        groups.push_back(std::move(g));
    });
    return groups;
}

std::vector<GroupRecord> load_groups_jsonl(const std::string& path) {
    return parse_groups_jsonl(read_text_file(path));
}

std::vector<std::pair<std::string, Label>> parse_labels_jsonl(std::string_view text) {
    std::vector<std::pair<std::string, Label>> labels;
    for_each_jsonl_line(text, [&](const json& j, std::size_t line_no) {
        const auto label = j.at("label").get<std::string>();
        if (label != "interesting" && label != "ordinary") {
            fail(ErrorCode::Corrupt, "line " + std::to_string(line_no) + ": unknown label '" + label + "'");
        }
        labels.emplace_back(id_field(j, "id"), label == "interesting" ? Label::Interesting : Label::Ordinary);
    });
    return labels;
}

std::vector<std::pair<std::string, Label>> load_labels_jsonl(const std::string& path) {
    return parse_labels_jsonl(read_text_file(path));
}

std::map<std::string, std::string> parse_group_map(std::string_view text) {
    std::map<std::string, std::string> groups;
    const auto add = [&](const std::string& image, const std::string& group) {
        const auto [it, inserted] = groups.emplace(image, group);
        if (!inserted && it->second != group) {
            fail(ErrorCode::DuplicateImageAcrossGroups, "image '" + image + "' belongs to several groups");
        }
    };
    for_each_jsonl_line(text, [&](const json& j, std::size_t) {
        if (j.contains("images")) {
            const auto group = id_field(j, "group");
            for (const auto& image : j.at("images")) add(image.get<std::string>(), group);
        } else if (j.contains("group") && !j.at("group").is_null()) {
            add(id_field(j, "id"), id_field(j, "group"));
        }
    });
    return groups;
}

std::map<std::string, std::string> load_group_map(const std::string& path) {
    return parse_group_map(read_text_file(path));
}

}  // namespace relsim
