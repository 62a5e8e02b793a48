#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <string>

#include "hser/error.hpp"
#include "hser/features.hpp"
#include "hser/label.hpp"
#include "hser/reasoning/auto_rules.hpp"
#include "hser/reasoning/http_transport.hpp"
#include "hser/reasoning/llm_client.hpp"
#include "hser/reasoning/rules.hpp"
#include "hser/text.hpp"

namespace hser {

/// What a prompt tells a reader that follows it literally.
struct PromptReading {
    std::array<double, kFeatureDim> z{};
    bool has_cues = false;
    RuleSet rules;
    std::optional<EmotionLabel> ml_label;
};

inline PromptReading read_prompt(const std::string& prompt) {
    static const std::regex cue(R"(^  ([a-z_0-9]+): [a-z ]+ \(z=([+-][0-9]+\.[0-9]+)\)$)");
    static const std::regex rule(R"(^Rule R[0-9]+ \[([^\]]+)\] \(strength ([0-9.]+)\):)");
    static const std::regex cond(R"(^  Condition: (.*) => (calm|angry|panic)$)");
    static const std::regex clause(R"(^([a-z_0-9]+) z (<=|>=|<|>) ([+-]?[0-9]+\.[0-9]+)$)");
    static const std::regex ml(R"(predicted (calm|angry|panic) with confidence)");

    PromptReading reading;
    std::istringstream in(prompt);
    std::string line;
    std::optional<Rule> pending;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_match(line, m, cue)) {
            if (const auto idx = feature_index(m[1].str())) {
                reading.z[*idx] = std::stod(m[2].str());
                reading.has_cues = true;
            }
        } else if (std::regex_search(line, m, rule)) {
            pending = Rule{};
            pending->id = m[1].str();
            pending->strength = std::stod(m[2].str());
        } else if (pending && std::regex_match(line, m, cond)) {
            std::string conds = m[1].str();
            pending->implied_label = *try_parse_label(m[2].str());
            std::size_t pos = 0;
            while (true) {
                const auto next = conds.find(" AND ", pos);
                const std::string part = conds.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
                std::smatch c;
                if (std::regex_match(part, c, clause))
                    pending->conditions.push_back({c[1].str(), *parse_comparator(c[2].str()), std::stod(c[3].str())});
                if (next == std::string::npos) break;
                pos = next + 5;
            }
            reading.rules.rules.push_back(std::move(*pending));
            pending.reset();
        } else if (std::regex_search(line, m, ml)) {
            reading.ml_label = try_parse_label(m[1].str());
        }
    }
    return reading;
}

/// Deterministic stand-in for an LLM that applies the prompt's rules
/// literally: satisfied rules vote with their strength, the classifier's
/// label decides when no rule fires, and otherwise it declines to answer.
/// Asked to write rules, it returns a fixed, weakly grounded rule set.
inline std::string rules_literal_reply(const std::string& prompt) {
    if (prompt.rfind(kRuleGenerationMarker, 0) == 0) {
        return R"([
  {"id": "auto_spectral_anger", "statement": "A bright spectrum signals anger.",
   "conditions": [{"dimension": "mfcc_mean_2", "comparator": ">", "threshold_z": 0.0}],
   "implied_label": "angry", "strength": 0.9},
  {"id": "auto_pauses_panic", "statement": "Frequent pauses signal panic.",
   "conditions": [{"dimension": "voiced_ratio", "comparator": "<", "threshold_z": 0.0}],
   "implied_label": "panic", "strength": 0.9},
  {"id": "auto_low_floor_calm", "statement": "A low pitch floor means the speaker is relaxed.",
   "conditions": [{"dimension": "pitch_min", "comparator": "<", "threshold_z": 0.5}],
   "implied_label": "calm", "strength": 0.7},
  {"id": "auto_rate_panic", "statement": "Fast speech signals panic.",
   "conditions": [{"dimension": "speaking_rate", "comparator": ">", "threshold_z": 1.0}],
   "implied_label": "panic", "strength": 0.8}
])";
    }
    const auto reading = read_prompt(prompt);
    std::array<double, kNumClasses> votes{};
    std::string fired;
    if (reading.has_cues) {
        for (const auto& r : reading.rules.rules) {
            if (r.satisfied(reading.z)) {
                votes[index_of(r.implied_label)] += r.strength;
                fired += (fired.empty() ? "" : ", ") + r.id;
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < kNumClasses; ++k)
        if (votes[k] > votes[best]) best = k;
    if (votes[best] > 0.0)
        return "Satisfied rules: " + fired + ".\nLABEL: " + std::string(to_string(kAllLabels[best]));
    if (reading.ml_label)
        return "No rule applies; deferring to the classifier evidence.\nLABEL: " +
               std::string(to_string(*reading.ml_label));
    return "None of the provided rules apply, so I cannot determine the emotion.";
}

/// Chat handler that always answers through rules_literal_reply.
inline HttpResponse rules_literal_handler(const std::string& body) {
    return {200, chat_response_body(rules_literal_reply(prompt_from_chat_request(body)))};
}

/// Resolves an endpoint URL to a transport. Besides http(s) URLs, offline
/// endpoints are available for dry runs:
///   mock://rules-literal  follow prompt rules literally (see rules_literal_reply)
///   mock://timeout        every request times out
///   mock://unavailable    every request gets HTTP 503
inline std::shared_ptr<Transport> make_transport(const LlmEndpointConfig& cfg) {
    const std::string& url = cfg.base_url;
    if (url.rfind("mock://", 0) == 0) {
        const std::string kind = url.substr(7);
        if (kind == "rules-literal") return std::make_shared<FunctionTransport>(rules_literal_handler);
        if (kind == "timeout")
            return std::make_shared<FunctionTransport>([](const std::string&) -> HttpResponse {
                throw LlmError(ErrorKind::Timeout, "mock endpoint timed out");
            });
        if (kind == "unavailable")
            return std::make_shared<FunctionTransport>(
                [](const std::string&) { return HttpResponse{503, "service unavailable"}; });
        throw Error(ErrorKind::ConfigError, "unknown mock endpoint '" + url + "'");
    }
    parse_base_url(url);
    return std::make_shared<HttpTransport>();
}

}  // namespace hser
