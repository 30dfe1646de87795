#include "relsim/judge_http.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "relsim/error.hpp"

namespace relsim {

using json = nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n\f\v");
    return s.substr(first, last - first + 1);
}

std::string render_ref(const std::string& tmpl, const std::string& id) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto hit = tmpl.find("{id}", pos);
        if (hit == std::string::npos) break;
        out.append(tmpl, pos, hit - pos);
        out += id;
        pos = hit + 4;
    }
    out.append(tmpl, pos);
    return out;
}

// Chat-completions replies carry the text in choices[0].message.content; any
// other body is taken as the reply text itself.
std::string reply_text(const std::string& body) {
    const auto j = json::parse(body, nullptr, false);
    if (j.is_object() && j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const auto& msg = j["choices"][0].value("message", json::object());
        if (msg.contains("content") && msg["content"].is_string()) return msg["content"].get<std::string>();
    }
    return body;
}

}  // namespace

JudgeScore parse_judge_reply(std::string_view reply) {
    const auto text = trim(reply);
    std::size_t k = 0;
    if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
    const bool digits = k < text.size() &&
                        std::all_of(text.begin() + static_cast<std::ptrdiff_t>(k), text.end(),
                                    [](char c) { return c >= '0' && c <= '9'; });
    if (!digits) fail(ErrorCode::ParseFailure, "judge reply is not an integer: '" + std::string(text) + "'");
    // Long digit strings are out of range rather than unparseable.
    if (text.size() - k > 3) fail(ErrorCode::OutOfRange, "judge score '" + std::string(text) + "' outside [0, 10]");
    const int value = std::stoi(std::string(text));
    if (value < 0 || value > 10) fail(ErrorCode::OutOfRange, "judge score " + std::to_string(value) + " outside [0, 10]");
    return JudgeScore(value);
}

HttpJudgeConfig http_judge_config_from_env(const std::string& token_env) {
    HttpJudgeConfig config;
    if (const char* url = std::getenv("RELSIM_JUDGE_URL")) config.endpoint = url;
    if (const char* token = std::getenv(token_env.c_str())) config.auth_token = token;
    return config;
}

HttpJudge::HttpJudge(HttpJudgeConfig config)
    : config_(std::move(config)), sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    const auto scheme_end = config_.endpoint.find("://");
    if (config_.endpoint.empty() || scheme_end == std::string::npos) {
        fail(ErrorCode::InvalidArgument, "judge endpoint must be an absolute URL, got '" + config_.endpoint + "'");
    }
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    scheme_host_port_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
    if (config_.max_retries < 0) fail(ErrorCode::InvalidArgument, "max_retries must be >= 0");
}

std::string HttpJudge::request_body(const std::string& query_id, const std::string& retrieved_id) const {
    const auto image = [&](const std::string& id) {
        return json{{"type", "image_url"}, {"image_url", {{"url", render_ref(config_.image_ref_template, id)}}}};
    };
    json content = json::array({json{{"type", "text"}, {"text", config_.prompt}}, image(query_id), image(retrieved_id)});
    return json{{"model", config_.model},
                {"temperature", 0},
                {"messages", json::array({json{{"role", "user"}, {"content", std::move(content)}}})}}
        .dump();
}

JudgeScore HttpJudge::score(const std::string& query_id, const std::string& retrieved_id) const {
    const auto body = request_body(query_id, retrieved_id);
    httplib::Headers headers;
    if (!config_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + config_.auth_token);

    auto backoff = config_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            sleeper_(backoff);
            backoff *= 2;
        }
        httplib::Client client(scheme_host_port_);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);
        const auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            fail(ErrorCode::Transport, "judge endpoint returned HTTP " + std::to_string(res->status));
        }
        return parse_judge_reply(reply_text(res->body));
    }
    fail(ErrorCode::Transport, "judge endpoint unreachable after " + std::to_string(config_.max_retries + 1) +
                                   " attempts: " + last_error);
}

}  // namespace relsim
