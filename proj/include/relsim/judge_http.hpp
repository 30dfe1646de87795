#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <string_view>

#include "relsim/eval.hpp"

namespace relsim {

/// The automated-judgment prompt shipped in assets/judge_prompt.txt.
std::string_view default_judge_prompt() noexcept;

/// Parses a judge reply: surrounding whitespace is trimmed and the rest must
/// be a base-10 integer (ParseFailure) within [0, 10] (OutOfRange).
JudgeScore parse_judge_reply(std::string_view reply);

struct HttpJudgeConfig {
    /// Full URL of an OpenAI-compatible chat completions endpoint.
    std::string endpoint;
    std::string model = "gpt-4o";
    /// Bearer token; empty sends no Authorization header.
    std::string auth_token;
    std::string prompt{default_judge_prompt()};
    /// Turns an image id into the URL sent to the judge. "{id}" is replaced.
    std::string image_ref_template = "{id}";
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::seconds timeout{60};
};

/// Reads the endpoint from RELSIM_JUDGE_URL and the token from the variable
/// named by token_env (default RELSIM_JUDGE_TOKEN).
HttpJudgeConfig http_judge_config_from_env(const std::string& token_env = "RELSIM_JUDGE_TOKEN");

/// Scores image pairs with a remote vision-language model. Transport errors
/// (connection failures, HTTP 429 and 5xx) are retried max_retries times with
/// doubling backoff; other failures throw immediately.
class HttpJudge {
public:
    explicit HttpJudge(HttpJudgeConfig config);

    JudgeScore score(const std::string& query_id, const std::string& retrieved_id) const;
    JudgeScore operator()(const std::string& q, const std::string& r) const { return score(q, r); }

    /// Request body sent for a pair; exposed for tests.
    std::string request_body(const std::string& query_id, const std::string& retrieved_id) const;

    /// Replaces the sleep between retries (tests).
    void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleeper_ = std::move(sleeper); }

private:
    HttpJudgeConfig config_;
    std::string scheme_host_port_;
    std::string path_;
    std::function<void(std::chrono::milliseconds)> sleeper_;
};

}  // namespace relsim
