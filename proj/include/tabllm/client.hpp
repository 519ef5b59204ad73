#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
// httplib drags in resolv.h, whose `_res` macro breaks later Eigen includes
#ifdef _res
#undef _res
#endif

#include <nlohmann/json.hpp>

#include "tabllm/error.hpp"

namespace tabllm {

inline constexpr size_t kModelContextLimit = 16385;
inline constexpr const char* kApiKeyVariable = "TABLLM_API_KEY";

struct ApiConfig {
    std::string base_url;  // scheme://host[:port]
    std::string model_name = "gpt-3.5-turbo-0125";
    size_t max_output_tokens = 1385;
    double request_timeout_seconds = 60;
    size_t max_retries = 3;
    std::string api_key;  // from the environment only, never flags or files
    size_t context_limit = kModelContextLimit;

    // The local GPT-2 count only approximates the remote tokenizer, so 5% of
    // the context limit is held back as a safety margin.
    size_t prompt_token_limit() const {
        const size_t margin = context_limit / 20;
        if (context_limit < margin + max_output_tokens)
            fail(errc::bad_config, "max_output_tokens leaves no room for the prompt");
        return context_limit - margin - max_output_tokens;
    }

    static ApiConfig from_environment(std::string base_url) {
        ApiConfig c;
        c.base_url = std::move(base_url);
        if (const char* key = std::getenv(kApiKeyVariable)) c.api_key = key;
        return c;
    }
};

struct PromptRecord {
    int64_t timestamp_ms = 0;
    std::string dataset;
    std::string prompt;
    size_t prompt_tokens = 0;
    std::string response;
    double latency_seconds = 0;
    std::string status;  // "ok" or the error name

    nlohmann::json to_json() const {
        return {{"timestamp_ms", timestamp_ms},   {"dataset", dataset},
                {"prompt", prompt},               {"prompt_tokens", prompt_tokens},
                {"response", response},           {"latency_seconds", latency_seconds},
                {"status", status}};
    }

    static PromptRecord from_json(const nlohmann::json& j) {
        PromptRecord r;
        r.timestamp_ms = j.at("timestamp_ms").get<int64_t>();
        r.dataset = j.at("dataset").get<std::string>();
        r.prompt = j.at("prompt").get<std::string>();
        r.prompt_tokens = j.at("prompt_tokens").get<size_t>();
        r.response = j.at("response").get<std::string>();
        r.latency_seconds = j.at("latency_seconds").get<double>();
        r.status = j.at("status").get<std::string>();
        return r;
    }
};

struct SendOptions {
    // attempt-level hooks, injectable for tests
    std::function<void(std::chrono::milliseconds)> sleep =
        [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    uint64_t jitter_seed = 0;
    std::vector<int>* attempt_statuses = nullptr;  // filled with per-attempt HTTP codes, 0 = no connection
};

// POSTs a single-user-message chat completion at temperature 0. Retries
// rate-limit and transient failures with exponential backoff (base 1s,
// factor 2, multiplicative jitter) up to max_retries additional attempts.
// prompt_tokens must come from the caller's local BPE count.
inline std::string send_prompt(const ApiConfig& config, const std::string& prompt,
                               size_t prompt_tokens, const SendOptions& options = {}) {
    if (prompt_tokens > config.prompt_token_limit())
        fail(errc::budget_exceeded,
             "prompt of " + std::to_string(prompt_tokens) + " tokens exceeds the limit of " +
                 std::to_string(config.prompt_token_limit()));

    httplib::Client http(config.base_url);
    http.set_connection_timeout(std::chrono::duration<double>(config.request_timeout_seconds));
    http.set_read_timeout(std::chrono::duration<double>(config.request_timeout_seconds));

    nlohmann::json body = {{"model", config.model_name},
                           {"messages", {{{"role", "user"}, {"content", prompt}}}},
                           {"temperature", 0},
                           {"max_tokens", config.max_output_tokens}};
    httplib::Headers headers;
    if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);

    std::mt19937_64 rng(options.jitter_seed);
    std::uniform_real_distribution<double> jitter(1.0, 1.5);
    errc last_error = errc::timeout;
    std::string last_detail = "no attempt made";

    for (size_t attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
            const double backoff_ms = 1000.0 * std::pow(2.0, static_cast<double>(attempt - 1));
            options.sleep(std::chrono::milliseconds(
                static_cast<int64_t>(backoff_ms * jitter(rng))));
        }
        auto res = http.Post("/v1/chat/completions", headers, body.dump(), "application/json");
        if (options.attempt_statuses)
            options.attempt_statuses->push_back(res ? res->status : 0);
        if (!res) {
            last_error = errc::timeout;
            last_detail = "connection failed or timed out";
            continue;
        }
        if (res->status == 401 || res->status == 403)
            fail(errc::auth_failure, "endpoint rejected the API key (HTTP " +
                                         std::to_string(res->status) + ")");
        if (res->status == 429 || res->status >= 500) {
            last_error = res->status == 429 ? errc::rate_limited : errc::timeout;
            last_detail = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            fail(errc::malformed_response, "unexpected HTTP " + std::to_string(res->status));
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            fail(errc::malformed_response, std::string("cannot parse response: ") + e.what());
        }
    }
    fail(last_error, "retries exhausted: " + last_detail);
}

namespace detail {

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace detail

// One JSON file per record, named <timestamp>-<content hash>.json. Writing
// the same record twice lands on the same path without a duplicate.
inline std::string record_session(const PromptRecord& record, const std::string& store) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(store, ec);
    const std::string payload = record.to_json().dump(2);
    const std::string filename = std::to_string(record.timestamp_ms) + "-" +
                                 detail::hex64(detail::fnv1a64(payload)) + ".json";
    const fs::path path = fs::path(store) / filename;
    if (fs::exists(path, ec)) return path.string();
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot write " + path.string());
    out << payload << '\n';
    if (!out) fail(errc::io_failure, "write failed for " + path.string());
    return path.string();
}

inline PromptRecord load_record(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_failure, "cannot open " + path);
    nlohmann::json j;
    in >> j;
    return PromptRecord::from_json(j);
}

}  // namespace tabllm
