#pragma once

#include <optional>
#include <regex>
#include <string>
#include <string_view>

#include "hser/classifier.hpp"
#include "hser/describe.hpp"
#include "hser/error.hpp"
#include "hser/label.hpp"
#include "hser/reasoning/rules.hpp"
#include "hser/text.hpp"

namespace hser {

enum class PromptVersion { v1_basic, v2_rules, v3_refined, v4_hybrid, v5_auto };

inline constexpr std::array<PromptVersion, 5> kAllVersions{PromptVersion::v1_basic, PromptVersion::v2_rules,
                                                           PromptVersion::v3_refined, PromptVersion::v4_hybrid,
                                                           PromptVersion::v5_auto};

constexpr std::string_view to_string(PromptVersion v) {
    switch (v) {
        case PromptVersion::v1_basic: return "v1_basic";
        case PromptVersion::v2_rules: return "v2_rules";
        case PromptVersion::v3_refined: return "v3_refined";
        case PromptVersion::v4_hybrid: return "v4_hybrid";
        case PromptVersion::v5_auto: return "v5_auto";
    }
    return "v1_basic";
}

inline std::optional<PromptVersion> parse_prompt_version(std::string_view s) {
    for (auto v : kAllVersions)
        if (s == to_string(v) || s == to_string(v).substr(0, 2)) return v;
    return std::nullopt;
}

constexpr bool uses_rules(PromptVersion v) {
    return v == PromptVersion::v2_rules || v == PromptVersion::v3_refined || v == PromptVersion::v4_hybrid ||
           v == PromptVersion::v5_auto;
}

inline constexpr std::string_view kAnswerInstruction =
    "Answer format: end your reply with exactly one line of the form\nLABEL: <calm|angry|panic>";

namespace prompt_detail {

inline std::string task_framing() {
    return "You are assisting with speech emotion annotation. Decide which emotion the speaker expresses, "
           "choosing exactly one of: calm, angry, panic.\n"
           "The utterance is summarized by acoustic cues expressed as levels relative to a reference corpus.\n";
}

inline std::string render_rules(const RuleSet& rules, std::string_view heading) {
    std::string out(heading);
    out += "\n";
    for (std::size_t i = 0; i < rules.rules.size(); ++i) {
        const auto& r = rules.rules[i];
        out += text::format("Rule R%zu [%s] (strength %.2f): %s\n", i + 1, r.id.c_str(), r.strength,
                            r.statement.c_str());
        out += "  Condition: " + r.condition_text() + " => " + std::string(to_string(r.implied_label)) + "\n";
    }
    if (!rules.confusion_notes.empty()) {
        out += "Known confusion patterns:\n";
        for (const auto& n : rules.confusion_notes)
            out += "- " + std::string(to_string(n.first)) + " vs " + std::string(to_string(n.second)) + ": " +
                   n.text + "\n";
    }
    return out;
}

inline std::string render_evidence(const MlEvidence& ml) {
    return text::format(
        "Auxiliary evidence from the acoustic classifier (supporting signal, not ground truth): predicted %s "
        "with confidence %.2f (angry %.2f, calm %.2f, panic %.2f).\n",
        std::string(to_string(ml.label)).c_str(), ml.confidence, ml.probs[0], ml.probs[1], ml.probs[2]);
}

}  // namespace prompt_detail

/// Deterministic prompt text for one sample. v1 carries no rules; v2, v3 and
/// v5 add the given rule set; v4 adds rules plus classifier evidence.
inline std::string build_prompt(PromptVersion version, const StructuredDescription& desc, const RuleSet& rules,
                                const std::optional<MlEvidence>& ml = std::nullopt) {
    if (version == PromptVersion::v4_hybrid && !ml)
        throw Error(ErrorKind::MissingEvidence, "v4_hybrid prompts need classifier evidence");
    if ((version == PromptVersion::v2_rules || version == PromptVersion::v3_refined ||
         version == PromptVersion::v5_auto) &&
        rules.empty())
        throw Error(ErrorKind::EmptyRules, std::string(to_string(version)) + " prompts need at least one rule");

    std::string out = prompt_detail::task_framing();
    out += "\n" + desc.text;
    switch (version) {
        case PromptVersion::v1_basic:
            break;
        case PromptVersion::v2_rules:
            out += "\n" + prompt_detail::render_rules(rules, "Human-derived rules:");
            break;
        case PromptVersion::v3_refined:
            out += "\n" + prompt_detail::render_rules(
                              rules, text::format("Refined human-derived rules (rule set version %d):", rules.version));
            break;
        case PromptVersion::v4_hybrid:
            if (!rules.empty())
                out += "\n" + prompt_detail::render_rules(
                                  rules, text::format("Human-derived rules (rule set version %d):", rules.version));
            out += "\n" + prompt_detail::render_evidence(*ml);
            out += "Weigh the rules first and use the classifier evidence to settle what the rules leave open.\n";
            break;
        case PromptVersion::v5_auto:
            out += "\n" + prompt_detail::render_rules(rules, "Self-generated rules:");
            break;
    }
    out += "\nBriefly reason about the cues, then answer.\n";
    out += kAnswerInstruction;
    return out;
}

/// Prompt for the transcript-only baseline.
inline std::string build_text_prompt(std::string_view transcript) {
    std::string out = "You are assisting with speech emotion annotation. Decide which emotion the speaker "
                      "expresses, choosing exactly one of: calm, angry, panic.\n"
                      "Only the transcript of the utterance is available.\n\nTranscript:\n\"";
    out += transcript;
    out += "\"\n\nBriefly reason about the wording, then answer.\n";
    out += kAnswerInstruction;
    return out;
}

/// Case-insensitive: the last `LABEL: <class>` line wins; otherwise the last
/// class word anywhere in the text. nullopt means the reply is unusable.
inline std::optional<EmotionLabel> parse_label(std::string_view raw) {
    const std::string lower = text::to_lower(raw);
    static const std::regex schema(R"(label\s*:\s*\**\s*<?\s*(calm|angry|panic)\b)");
    std::optional<EmotionLabel> found;
    for (auto it = std::sregex_iterator(lower.begin(), lower.end(), schema); it != std::sregex_iterator(); ++it)
        found = try_parse_label((*it)[1].str());
    if (found) return found;
    static const std::regex word(R"(\b(calm|angry|panic)\b)");
    for (auto it = std::sregex_iterator(lower.begin(), lower.end(), word); it != std::sregex_iterator(); ++it)
        found = try_parse_label((*it)[1].str());
    return found;
}

}  // namespace hser
