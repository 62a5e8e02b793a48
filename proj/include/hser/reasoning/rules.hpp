#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hser/error.hpp"
#include "hser/features.hpp"
#include "hser/label.hpp"
#include "hser/text.hpp"

namespace hser {

enum class Comparator { lt, le, gt, ge };

constexpr std::string_view to_string(Comparator c) {
    switch (c) {
        case Comparator::lt: return "<";
        case Comparator::le: return "<=";
        case Comparator::gt: return ">";
        case Comparator::ge: return ">=";
    }
    return ">";
}

inline std::optional<Comparator> parse_comparator(std::string_view s) {
    if (s == "<") return Comparator::lt;
    if (s == "<=" || s == "≤") return Comparator::le;
    if (s == ">") return Comparator::gt;
    if (s == ">=" || s == "≥") return Comparator::ge;
    return std::nullopt;
}

constexpr bool compare(double lhs, Comparator c, double rhs) {
    switch (c) {
        case Comparator::lt: return lhs < rhs;
        case Comparator::le: return lhs <= rhs;
        case Comparator::gt: return lhs > rhs;
        case Comparator::ge: return lhs >= rhs;
    }
    return false;
}

/// One clause of a rule: `<dimension> z <comparator> <threshold_z>`.
struct Predicate {
    std::string dimension;
    Comparator comparator = Comparator::gt;
    double threshold_z = 0.0;

    bool holds(const std::array<double, kFeatureDim>& z) const {
        const auto idx = feature_index(dimension);
        return idx && compare(z[*idx], comparator, threshold_z);
    }
};

enum class RuleOrigin { human, refined, auto_generated };

constexpr std::string_view to_string(RuleOrigin o) {
    switch (o) {
        case RuleOrigin::human: return "human";
        case RuleOrigin::refined: return "refined";
        case RuleOrigin::auto_generated: return "auto";
    }
    return "human";
}

inline std::optional<RuleOrigin> parse_origin(std::string_view s) {
    if (s == "human") return RuleOrigin::human;
    if (s == "refined") return RuleOrigin::refined;
    if (s == "auto") return RuleOrigin::auto_generated;
    return std::nullopt;
}

/// A heuristic: conjunction of z-score predicates implying a label.
struct Rule {
    std::string id;
    std::string statement;
    std::vector<Predicate> conditions;
    EmotionLabel implied_label = EmotionLabel::calm;
    double strength = 1.0;
    RuleOrigin origin = RuleOrigin::human;

    bool satisfied(const std::array<double, kFeatureDim>& z) const {
        return !conditions.empty() &&
               std::all_of(conditions.begin(), conditions.end(), [&](const Predicate& p) { return p.holds(z); });
    }
    std::string condition_text() const {
        std::string out;
        for (std::size_t i = 0; i < conditions.size(); ++i) {
            if (i) out += " AND ";
            const auto& p = conditions[i];
            out += text::format("%s z %s %+.2f", p.dimension.c_str(), std::string(to_string(p.comparator)).c_str(),
                                p.threshold_z);
        }
        return out;
    }
};

struct ConfusionNote {
    EmotionLabel first = EmotionLabel::angry;
    EmotionLabel second = EmotionLabel::panic;
    std::string text;
};

struct RuleSet {
    int version = 1;
    std::vector<Rule> rules;
    std::vector<ConfusionNote> confusion_notes;

    bool empty() const { return rules.empty(); }
    const Rule* find(std::string_view id) const {
        for (const auto& r : rules)
            if (r.id == id) return &r;
        return nullptr;
    }
};

/// Satisfied rule with the highest strength; earlier rules win ties.
inline const Rule* strongest_satisfied(const RuleSet& rules, const std::array<double, kFeatureDim>& z) {
    const Rule* best = nullptr;
    for (const auto& r : rules.rules)
        if (r.satisfied(z) && (best == nullptr || r.strength > best->strength)) best = &r;
    return best;
}

inline constexpr std::string_view kRuleSchema = "hser.rules/1";

inline nlohmann::ordered_json to_json(const Rule& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["statement"] = r.statement;
    auto& conds = j["conditions"] = nlohmann::ordered_json::array();
    for (const auto& p : r.conditions) {
        nlohmann::ordered_json c;
        c["dimension"] = p.dimension;
        c["comparator"] = to_string(p.comparator);
        c["threshold_z"] = p.threshold_z;
        conds.push_back(c);
    }
    j["implied_label"] = to_string(r.implied_label);
    j["strength"] = r.strength;
    j["origin"] = to_string(r.origin);
    return j;
}

inline nlohmann::ordered_json to_json(const RuleSet& rs) {
    nlohmann::ordered_json j;
    j["schema"] = kRuleSchema;
    j["version"] = rs.version;
    auto& rules = j["rules"] = nlohmann::ordered_json::array();
    for (const auto& r : rs.rules) rules.push_back(to_json(r));
    auto& notes = j["confusion_notes"] = nlohmann::ordered_json::array();
    for (const auto& n : rs.confusion_notes) {
        nlohmann::ordered_json o;
        o["labels"] = {to_string(n.first), to_string(n.second)};
        o["text"] = n.text;
        notes.push_back(o);
    }
    return j;
}

namespace rules_detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& field, const std::string& what) {
    throw Error(ErrorKind::SchemaError, where + ": " + field + ": " + what);
}

template <typename J>
const J& require(const J& obj, const char* key, const std::string& where, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) fail(where, path + "." + key, "missing");
    return obj[key];
}

}  // namespace rules_detail

/// Parses one rule object. Unknown dimensions, bad comparators, non-finite
/// thresholds and strengths outside (0, 1] are schema errors.
template <typename J>
Rule rule_from_json(const J& jr, const std::string& where, const std::string& path) {
    using rules_detail::fail;
    using rules_detail::require;
    Rule r;
    const auto& id = require(jr, "id", where, path);
    if (!id.is_string() || id.template get<std::string>().empty()) fail(where, path + ".id", "must be a non-empty string");
    r.id = id.template get<std::string>();
    if (jr.contains("statement")) {
        if (!jr["statement"].is_string()) fail(where, path + ".statement", "must be a string");
        r.statement = jr["statement"].template get<std::string>();
    }
    const auto& conds = require(jr, "conditions", where, path);
    if (!conds.is_array() || conds.empty()) fail(where, path + ".conditions", "must be a non-empty array");
    for (std::size_t k = 0; k < conds.size(); ++k) {
        const std::string cpath = path + ".conditions[" + std::to_string(k) + "]";
        const auto& c = conds[k];
        Predicate p;
        const auto& d = require(c, "dimension", where, cpath);
        if (!d.is_string() || !feature_index(d.template get<std::string>()))
            fail(where, cpath + ".dimension", "unknown dimension " + d.dump());
        p.dimension = d.template get<std::string>();
        const auto& cmp = require(c, "comparator", where, cpath);
        const auto parsed = cmp.is_string() ? parse_comparator(cmp.template get<std::string>()) : std::nullopt;
        if (!parsed) fail(where, cpath + ".comparator", "expected one of < <= > >=");
        p.comparator = *parsed;
        const auto& t = require(c, "threshold_z", where, cpath);
        if (!t.is_number() || !std::isfinite(t.template get<double>()))
            fail(where, cpath + ".threshold_z", "must be a finite number");
        p.threshold_z = t.template get<double>();
        r.conditions.push_back(p);
    }
    const auto& label = require(jr, "implied_label", where, path);
    const auto parsed_label = label.is_string() ? try_parse_label(label.template get<std::string>()) : std::nullopt;
    if (!parsed_label) fail(where, path + ".implied_label", "expected angry, calm or panic");
    r.implied_label = *parsed_label;
    if (jr.contains("strength")) {
        const auto& s = jr["strength"];
        if (!s.is_number() || !(s.template get<double>() > 0.0) || s.template get<double>() > 1.0)
            fail(where, path + ".strength", "must be in (0, 1]");
        r.strength = s.template get<double>();
    }
    if (jr.contains("origin")) {
        const auto o = jr["origin"].is_string() ? parse_origin(jr["origin"].template get<std::string>()) : std::nullopt;
        if (!o) fail(where, path + ".origin", "expected human, refined or auto");
        r.origin = *o;
    }
    return r;
}

inline RuleSet rule_set_from_json(const nlohmann::json& j, const std::string& where) {
    using rules_detail::fail;
    using rules_detail::require;
    if (!j.is_object()) fail(where, "$", "top level must be an object");
    if (j.value("schema", "") != kRuleSchema) fail(where, "schema", "expected " + std::string(kRuleSchema));
    RuleSet rs;
    const auto& version = require(j, "version", where, "$");
    if (!version.is_number_integer() || version.get<int>() < 1) fail(where, "version", "must be an integer >= 1");
    rs.version = version.get<int>();
    const auto& rules = require(j, "rules", where, "$");
    if (!rules.is_array()) fail(where, "rules", "must be an array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        auto r = rule_from_json(rules[i], where, "rules[" + std::to_string(i) + "]");
        if (!ids.insert(r.id).second) fail(where, "rules[" + std::to_string(i) + "].id", "duplicate id '" + r.id + "'");
        rs.rules.push_back(std::move(r));
    }
    if (j.contains("confusion_notes")) {
        const auto& notes = j["confusion_notes"];
        if (!notes.is_array()) fail(where, "confusion_notes", "must be an array");
        for (std::size_t i = 0; i < notes.size(); ++i) {
            const std::string path = "confusion_notes[" + std::to_string(i) + "]";
            const auto& labels = require(notes[i], "labels", where, path);
            if (!labels.is_array() || labels.size() != 2) fail(where, path + ".labels", "expected two labels");
            ConfusionNote n;
            const auto a = labels[0].is_string() ? try_parse_label(labels[0].get<std::string>()) : std::nullopt;
            const auto b = labels[1].is_string() ? try_parse_label(labels[1].get<std::string>()) : std::nullopt;
            if (!a || !b) fail(where, path + ".labels", "expected angry, calm or panic");
            n.first = *a;
            n.second = *b;
            const auto& t = require(notes[i], "text", where, path);
            if (!t.is_string()) fail(where, path + ".text", "must be a string");
            n.text = t.get<std::string>();
            rs.confusion_notes.push_back(std::move(n));
        }
    }
    return rs;
}

inline RuleSet parse_rules(const std::string& contents, const std::string& where = "rules") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(contents);
    } catch (const nlohmann::json::parse_error& e) {
        // Translate the byte offset into a line number for the diagnostic.
        const std::size_t upto = std::min(e.byte, contents.size());
        const auto line = 1 + std::count(contents.begin(), contents.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw Error(ErrorKind::SchemaError, where + ":" + std::to_string(line) + ": " + e.what());
    }
    return rule_set_from_json(j, where);
}

inline RuleSet load_rules(const std::filesystem::path& path) {
    return parse_rules(text::read_file(path), path.string());
}

inline void save_rules(const std::filesystem::path& path, const RuleSet& rs) {
    text::write_file(path, to_json(rs).dump(2) + "\n");
}

/// The three seed heuristics: variable pitch and energy means panic, loud and
/// raised pitch means angry, stable pitch and energy means calm.
inline RuleSet default_rules() {
    RuleSet rs;
    rs.version = 1;
    rs.rules = {
        {"seed_panic_variability",
         "High variability in both pitch and energy indicates panic.",
         {{"pitch_std", Comparator::gt, 1.0}, {"energy_std", Comparator::gt, 1.0}},
         EmotionLabel::panic,
         0.8,
         RuleOrigin::human},
        {"seed_angry_intensity",
         "High intensity together with raised pitch indicates anger.",
         {{"energy_mean", Comparator::gt, 1.0}, {"pitch_mean", Comparator::gt, 0.5}},
         EmotionLabel::angry,
         0.8,
         RuleOrigin::human},
        {"seed_calm_stability",
         "Stable pitch and steady energy indicate a calm speaker.",
         {{"pitch_std", Comparator::lt, -0.5}, {"energy_std", Comparator::lt, -0.5}},
         EmotionLabel::calm,
         0.8,
         RuleOrigin::human},
    };
    rs.confusion_notes = {
        {EmotionLabel::angry, EmotionLabel::panic,
         "Angry and panic both raise pitch and energy. Panic shows large, irregular swings in pitch and "
         "energy; angry speech stays loud but comparatively steady."},
    };
    return rs;
}

}  // namespace hser
