#pragma once

#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hser/error.hpp"
#include "hser/features.hpp"
#include "hser/reasoning/llm_client.hpp"
#include "hser/reasoning/prompt.hpp"
#include "hser/reasoning/rules.hpp"

namespace hser {

inline constexpr std::string_view kRuleGenerationMarker = "Propose heuristic rules";

inline std::string build_rule_generation_prompt(const std::vector<std::string>& dimensions) {
    std::string out = std::string(kRuleGenerationMarker) +
                      " for classifying speech emotion (calm, angry, panic) from acoustic features.\n"
                      "Each feature is given as a z-score relative to a reference corpus. Available features:\n";
    for (const auto& d : dimensions) out += "- " + d + "\n";
    out += "\nReply with a JSON array only. Each element must look like:\n"
           R"({"id": "auto_1", "statement": "...", "conditions": [{"dimension": "<feature>", "comparator": ">", )"
           R"("threshold_z": 1.0}], "implied_label": "panic", "strength": 0.8})"
           "\nComparators are <, <=, > or >=. Strength is in (0, 1].\n";
    return out;
}

struct AutoRuleResult {
    RuleSet rules;
    std::vector<std::string> warnings;
};

/// Pulls rule objects out of a model reply. Anything that fails the rule
/// schema (unknown dimension, bad comparator, ...) is dropped with a warning.
inline AutoRuleResult parse_generated_rules(const std::string& reply) {
    AutoRuleResult result;
    result.rules.version = 1;
    const auto open = reply.find('[');
    const auto close = reply.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw Error(ErrorKind::EmptyGeneration, "reply contains no JSON array of rules");
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(reply.substr(open, close - open + 1));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::EmptyGeneration, std::string("unparseable rule array: ") + e.what());
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        try {
            auto r = rule_from_json(arr[i], "generated", "[" + std::to_string(i) + "]");
            r.origin = RuleOrigin::auto_generated;
            if (!ids.insert(r.id).second) {
                r.id += "_" + std::to_string(i);
                ids.insert(r.id);
            }
            result.rules.rules.push_back(std::move(r));
        } catch (const Error& e) {
            result.warnings.push_back(std::string("dropped generated rule: ") + e.what());
        }
    }
    if (result.rules.empty()) throw Error(ErrorKind::EmptyGeneration, "no generated rule passed the schema");
    return result;
}

/// Asks the model to write its own rule set (the v5 ablation).
inline AutoRuleResult auto_generate_rules(LlmClient& client, const std::vector<std::string>& dimensions) {
    const auto outcome = client.query({"auto_rules", build_rule_generation_prompt(dimensions)});
    if (!outcome.ok()) throw LlmError(*outcome.error, outcome.error_message, "auto_rules");
    return parse_generated_rules(*outcome.text);
}

}  // namespace hser
