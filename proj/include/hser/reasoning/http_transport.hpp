#pragma once

#include <chrono>
#include <cstdlib>
#include <regex>
#include <string>

#include "httplib.h"

#include "hser/error.hpp"
#include "hser/reasoning/llm_client.hpp"

namespace hser {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path_prefix;
};

inline ParsedUrl parse_base_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw Error(ErrorKind::ConfigError, "bad endpoint URL '" + url + "'");
    std::string prefix = m[2].matched ? m[2].str() : "";
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {m[1].str(), prefix};
}

/// Chat-completions over HTTP: POST <base_url>/chat/completions.
/// The bearer token is read from the environment variable named in the config.
class HttpTransport : public Transport {
public:
    HttpResponse post_chat(const LlmEndpointConfig& cfg, const std::string& body) override {
        const auto url = parse_base_url(cfg.base_url);
        httplib::Client client(url.origin);
        const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
            std::chrono::duration<double>(cfg.timeout_s));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        if (!cfg.api_key_env.empty())
            if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
                headers.emplace("Authorization", std::string("Bearer ") + key);
        const auto t0 = std::chrono::steady_clock::now();
        auto res = client.Post(url.path_prefix + "/chat/completions", headers, body, "application/json");
        if (!res) {
            const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const auto err = res.error();
            const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                                   (err == httplib::Error::Read && elapsed >= 0.9 * cfg.timeout_s);
            throw LlmError(timed_out ? ErrorKind::Timeout : ErrorKind::TransportError,
                           "POST " + cfg.base_url + ": " + httplib::to_string(err));
        }
        return {res->status, res->body};
    }
};

}  // namespace hser
