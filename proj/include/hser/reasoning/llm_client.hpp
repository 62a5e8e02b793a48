#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "hser/error.hpp"
#include "hser/text.hpp"

namespace hser {

struct LlmEndpointConfig {
    std::string base_url = "http://127.0.0.1:8000/v1";
    std::string model_name = "qwen2.5-7b-instruct";
    std::string api_key_env = "HSER_API_KEY";  // name of the variable, never the key itself
    double timeout_s = 60.0;
    int max_retries = 3;
    double temperature = 0.0;
    int max_in_flight = 4;
    double backoff_initial_s = 0.5;
    double backoff_max_s = 8.0;
};

inline nlohmann::json to_json(const LlmEndpointConfig& c) {
    return {{"base_url", c.base_url},       {"model_name", c.model_name},   {"api_key_env", c.api_key_env},
            {"timeout_s", c.timeout_s},     {"max_retries", c.max_retries}, {"temperature", c.temperature},
            {"max_in_flight", c.max_in_flight}, {"backoff_initial_s", c.backoff_initial_s},
            {"backoff_max_s", c.backoff_max_s}};
}

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// POSTs a JSON body to the chat-completions route of an endpoint. Throws
/// LlmError(Timeout | TransportError) when no HTTP response was obtained.
/// Implementations must be safe to call from several threads.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post_chat(const LlmEndpointConfig& cfg, const std::string& body) = 0;
};

/// Transport backed by a callable; used for in-process endpoints.
class FunctionTransport : public Transport {
public:
    using Handler = std::function<HttpResponse(const std::string& body)>;
    explicit FunctionTransport(Handler handler) : handler_(std::move(handler)) {}
    HttpResponse post_chat(const LlmEndpointConfig&, const std::string& body) override { return handler_(body); }

private:
    Handler handler_;
};

inline std::string chat_request_body(const LlmEndpointConfig& cfg, const std::string& prompt) {
    nlohmann::ordered_json j;
    j["model"] = cfg.model_name;
    j["temperature"] = cfg.temperature;
    j["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
    return j.dump();
}

/// Extracts the user prompt from a chat request body (last user message).
inline std::string prompt_from_chat_request(const std::string& body) {
    const auto j = nlohmann::json::parse(body);
    std::string prompt;
    for (const auto& m : j.at("messages"))
        if (m.value("role", "") == "user") prompt = m.at("content").get<std::string>();
    return prompt;
}

inline std::string chat_response_body(const std::string& content) {
    nlohmann::ordered_json j;
    j["object"] = "chat.completion";
    j["choices"] = nlohmann::ordered_json::array(
        {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", "stop"}}});
    return j.dump();
}

inline std::optional<std::string> content_from_chat_response(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        const auto& msg = j.at("choices").at(0).at("message").at("content");
        if (msg.is_string()) return msg.get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
    return std::nullopt;
}

struct Attempt {
    int status = 0;  // 0 when no HTTP response arrived
    std::string error;
};

struct QueryOutcome {
    std::string sample_id;
    std::optional<std::string> text;
    std::optional<ErrorKind> error;
    std::string error_message;
    std::vector<Attempt> attempts;
    double latency_ms = 0.0;
    bool cache_hit = false;
    std::string cache_key;

    bool ok() const { return text.has_value(); }
};

namespace llm_detail {

inline bool retryable_status(int status) { return status == 429 || status >= 500; }

inline void backoff_sleep(const LlmEndpointConfig& cfg, int attempt) {
    const double s = std::min(cfg.backoff_max_s, cfg.backoff_initial_s * std::pow(2.0, attempt));
    if (s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
}

}  // namespace llm_detail

/// Sends one prompt, retrying transport failures, 429 and 5xx responses with
/// exponential backoff, up to `max_retries` retries. Never throws; the
/// outcome carries the failure kind instead.
inline QueryOutcome query_llm_outcome(const std::string& prompt, const LlmEndpointConfig& cfg, Transport& transport,
                                      const std::string& sample_id = {}) {
    QueryOutcome out;
    out.sample_id = sample_id;
    const std::string body = chat_request_body(cfg, prompt);
    const auto t0 = std::chrono::steady_clock::now();
    ErrorKind last_kind = ErrorKind::TransportError;
    std::string last_message;
    const int max_attempts = std::max(0, cfg.max_retries) + 1;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        if (attempt > 0) llm_detail::backoff_sleep(cfg, attempt - 1);
        try {
            const auto resp = transport.post_chat(cfg, body);
            out.attempts.push_back({resp.status, {}});
            if (resp.status == 200) {
                if (auto content = content_from_chat_response(resp.body)) {
                    out.text = std::move(content);
                    break;
                }
                last_kind = ErrorKind::TransportError;
                last_message = "malformed chat-completion response";
                out.attempts.back().error = last_message;
                break;
            }
            last_kind = resp.status == 429 ? ErrorKind::RateLimited : ErrorKind::TransportError;
            last_message = "HTTP " + std::to_string(resp.status);
            if (!llm_detail::retryable_status(resp.status)) break;
        } catch (const LlmError& e) {
            last_kind = e.kind();
            last_message = e.what();
            out.attempts.push_back({0, last_message});
        }
    }
    out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!out.text) {
        out.error = last_kind;
        out.error_message = last_message;
    }
    return out;
}

/// Throwing form of query_llm_outcome.
inline std::string query_llm(const std::string& prompt, const LlmEndpointConfig& cfg, Transport& transport,
                             const std::string& sample_id = {}) {
    auto out = query_llm_outcome(prompt, cfg, transport, sample_id);
    if (!out.text) throw LlmError(*out.error, out.error_message, sample_id);
    return *out.text;
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::IoError, "sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

inline std::string cache_key(const std::string& model_name, const std::string& prompt) {
    return sha256_hex(model_name + prompt);
}

/// Content-addressed store of successful responses: <dir>/<sha256>.json.
class ResponseCache {
public:
    struct Entry {
        std::string model;
        std::string prompt;
        std::string response;
        double latency_ms = 0.0;
    };

    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }

    std::optional<Entry> get(const std::string& key) const {
        const auto p = path_for(key);
        if (!std::filesystem::exists(p)) return std::nullopt;
        try {
            const auto j = nlohmann::json::parse(text::read_file(p));
            return Entry{j.at("model").get<std::string>(), j.at("prompt").get<std::string>(),
                         j.at("response").get<std::string>(), j.value("latency_ms", 0.0)};
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }

    void put(const std::string& key, const Entry& e) const {
        nlohmann::ordered_json j;
        j["model"] = e.model;
        j["prompt"] = e.prompt;
        j["response"] = e.response;
        j["latency_ms"] = e.latency_ms;
        std::filesystem::create_directories(dir_);
        // Write-then-rename keeps concurrent readers from seeing partial files.
        const auto tmp = dir_ / (key + ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
        text::write_file(tmp, j.dump(2) + "\n");
        std::filesystem::rename(tmp, path_for(key));
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

struct LlmRequest {
    std::string sample_id;
    std::string prompt;
};

/// Endpoint + optional cache. Batches run with at most `max_in_flight`
/// concurrent requests and come back in input order.
class LlmClient {
public:
    LlmClient(LlmEndpointConfig cfg, std::shared_ptr<Transport> transport,
              std::optional<ResponseCache> cache = std::nullopt)
        : cfg_(std::move(cfg)), transport_(std::move(transport)), cache_(std::move(cache)) {
        if (cfg_.max_in_flight < 1) throw Error(ErrorKind::ConfigError, "max_in_flight must be >= 1");
    }

    QueryOutcome query(const LlmRequest& req) {
        const std::string key = cache_key(cfg_.model_name, req.prompt);
        if (cache_) {
            if (auto hit = cache_->get(key); hit && hit->prompt == req.prompt) {
                QueryOutcome out;
                out.sample_id = req.sample_id;
                out.text = hit->response;
                out.latency_ms = hit->latency_ms;
                out.cache_hit = true;
                out.cache_key = key;
                return out;
            }
        }
        calls_.fetch_add(1);
        auto out = query_llm_outcome(req.prompt, cfg_, *transport_, req.sample_id);
        out.cache_key = key;
        if (out.ok() && cache_) cache_->put(key, {cfg_.model_name, req.prompt, *out.text, out.latency_ms});
        return out;
    }

    std::vector<QueryOutcome> query_batch(const std::vector<LlmRequest>& requests) {
        std::vector<QueryOutcome> results(requests.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1))
                results[i] = query(requests[i]);
        };
        const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg_.max_in_flight), requests.size());
        if (n_workers <= 1) {
            worker();
            return results;
        }
        std::vector<std::jthread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        pool.clear();
        return results;
    }

    /// Requests that actually reached the transport (cache misses).
    std::size_t transport_calls() const { return calls_.load(); }
    const LlmEndpointConfig& config() const { return cfg_; }
    const std::optional<ResponseCache>& cache() const { return cache_; }

private:
    LlmEndpointConfig cfg_;
    std::shared_ptr<Transport> transport_;
    std::optional<ResponseCache> cache_;
    std::atomic<std::size_t> calls_{0};
};

}  // namespace hser
