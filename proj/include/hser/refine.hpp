#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hser/describe.hpp"
#include "hser/error.hpp"
#include "hser/eval.hpp"
#include "hser/features.hpp"
#include "hser/hybrid.hpp"
#include "hser/label.hpp"
#include "hser/reasoning/rules.hpp"
#include "hser/text.hpp"

namespace hser {

/// Rows are gold, columns predicted. Predictions are matched to gold by id.
inline ConfusionMatrix confusion_matrix(const std::vector<Prediction>& preds,
                                        const std::map<std::string, EmotionLabel>& gold) {
    if (preds.size() != gold.size())
        throw Error(ErrorKind::IdMismatch, text::format("%zu predictions for %zu gold labels", preds.size(), gold.size()));
    ConfusionMatrix cm;
    std::set<std::string> seen;
    for (const auto& p : preds) {
        const auto it = gold.find(p.sample_id);
        if (it == gold.end()) throw Error(ErrorKind::IdMismatch, "no gold label for '" + p.sample_id + "'");
        if (!seen.insert(p.sample_id).second) throw Error(ErrorKind::IdMismatch, "duplicate prediction for '" + p.sample_id + "'");
        ++cm.counts[index_of(it->second)][index_of(p.label)];
    }
    return cm;
}

/// A classified sample with its features, for error mining.
struct LabeledSample {
    std::string sample_id;
    FeatureVector features;
    EmotionLabel gold = EmotionLabel::calm;
    EmotionLabel predicted = EmotionLabel::calm;
};

struct DimensionDelta {
    std::string dimension;
    double d = 0.0;                 // Cohen's d, error group minus correct-gold group
    int direction = 0;              // sign of d
    double error_median_z = 0.0;    // median z of the error group
    double predicted_mean_z = 0.0;  // mean z of correctly classified samples of the predicted class
};

struct ErrorPattern {
    EmotionLabel gold = EmotionLabel::calm;
    EmotionLabel predicted = EmotionLabel::calm;
    std::size_t support = 0;
    std::vector<DimensionDelta> top_deltas;  // |d| descending
};

namespace refine_detail {

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Standardized mean difference with pooled (n-1) variance; 0 when the
/// pooled spread vanishes or there are too few samples to estimate it.
inline double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    if (a.empty() || b.empty() || na + nb < 3.0) return 0.0;
    const double ma = mean(a), mb = mean(b);
    double ssa = 0.0, ssb = 0.0;
    for (double x : a) ssa += (x - ma) * (x - ma);
    for (double x : b) ssb += (x - mb) * (x - mb);
    const double pooled = std::sqrt((ssa + ssb) / (na + nb - 2.0));
    if (!(pooled > 1e-12)) return 0.0;
    return (ma - mb) / pooled;
}

}  // namespace refine_detail

/// For every (gold, predicted) confusion with at least `min_support` errors,
/// ranks dimensions by |Cohen's d| between the error group and correctly
/// classified samples of the same gold class. Values are compared in corpus
/// z-space.
inline std::vector<ErrorPattern> mine_error_patterns(const std::vector<LabeledSample>& errors,
                                                     const std::vector<LabeledSample>& correct, const CorpusStats& stats,
                                                     std::size_t min_support = 5, std::size_t top_k = 5) {
    std::vector<ErrorPattern> out;
    for (auto g : kAllLabels) {
        for (auto p : kAllLabels) {
            if (g == p) continue;
            std::vector<const LabeledSample*> group;
            for (const auto& e : errors)
                if (e.gold == g && e.predicted == p) group.push_back(&e);
            if (group.empty() || group.size() < min_support) continue;

            ErrorPattern pat;
            pat.gold = g;
            pat.predicted = p;
            pat.support = group.size();
            for (std::size_t d = 0; d < kFeatureDim; ++d) {
                std::vector<double> err_z, gold_z, pred_z;
                for (const auto* e : group) err_z.push_back(stats.z(d, e->features[d]));
                for (const auto& c : correct) {
                    if (c.gold != c.predicted) continue;
                    if (c.gold == g) gold_z.push_back(stats.z(d, c.features[d]));
                    if (c.gold == p) pred_z.push_back(stats.z(d, c.features[d]));
                }
                DimensionDelta delta;
                delta.dimension = feature_names()[d];
                delta.d = refine_detail::cohens_d(err_z, gold_z);
                delta.direction = delta.d > 0.0 ? 1 : (delta.d < 0.0 ? -1 : 0);
                delta.error_median_z = refine_detail::median(err_z);
                delta.predicted_mean_z = refine_detail::mean(pred_z);
                pat.top_deltas.push_back(delta);
            }
            std::stable_sort(pat.top_deltas.begin(), pat.top_deltas.end(),
                             [](const DimensionDelta& a, const DimensionDelta& b) { return std::abs(a.d) > std::abs(b.d); });
            if (pat.top_deltas.size() > top_k) pat.top_deltas.resize(top_k);
            out.push_back(std::move(pat));
        }
    }
    return out;
}

enum class ProposalStatus { pending, accepted, rejected };

constexpr std::string_view to_string(ProposalStatus s) {
    switch (s) {
        case ProposalStatus::pending: return "pending";
        case ProposalStatus::accepted: return "accepted";
        case ProposalStatus::rejected: return "rejected";
    }
    return "pending";
}

inline std::optional<ProposalStatus> parse_proposal_status(std::string_view s) {
    for (auto v : {ProposalStatus::pending, ProposalStatus::accepted, ProposalStatus::rejected})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

struct RuleProposal {
    Rule candidate;
    ErrorPattern pattern;
    ProposalStatus status = ProposalStatus::pending;
    int base_version = 1;  // rule set version the proposal was mined against
};

/// One proposal per pattern from its top dimension: the threshold is the
/// error group's median z, and the comparator keeps that median on the side
/// away from the class the samples were mistaken for.
inline std::vector<RuleProposal> propose_rules(const std::vector<ErrorPattern>& patterns, int base_version) {
    std::vector<RuleProposal> out;
    std::set<std::string> ids;
    for (const auto& pat : patterns) {
        if (pat.top_deltas.empty()) continue;
        const auto& top = pat.top_deltas.front();
        const double strength = std::min(1.0, std::abs(top.d) / 2.0);
        if (!(strength > 0.0)) continue;
        const bool above = top.error_median_z >= top.predicted_mean_z;
        const double threshold = std::round(top.error_median_z * 100.0) / 100.0;

        RuleProposal prop;
        prop.base_version = base_version;
        prop.pattern = pat;
        Rule& r = prop.candidate;
        const std::string gold(to_string(pat.gold)), pred(to_string(pat.predicted));
        std::string id = text::format("refined_v%d_%s_not_%s_%s", base_version, gold.c_str(), pred.c_str(),
                                      top.dimension.c_str());
        for (int k = 2; ids.count(id); ++k) id = text::format("refined_v%d_%s_not_%s_%s_%d", base_version, gold.c_str(),
                                                              pred.c_str(), top.dimension.c_str(), k);
        ids.insert(id);
        r.id = id;
        r.conditions.push_back({top.dimension, above ? Comparator::ge : Comparator::le, threshold});
        r.implied_label = pat.gold;
        r.strength = std::round(strength * 100.0) / 100.0;
        if (!(r.strength > 0.0)) r.strength = 0.01;
        r.origin = RuleOrigin::refined;
        r.statement = text::format("%s samples mistaken for %s tend to have %s %s; at or %s z %+.2f prefer %s.",
                                   gold.c_str(), pred.c_str(), top.direction < 0 ? "lower" : "higher",
                                   top.dimension.c_str(), above ? "above" : "below", threshold, gold.c_str());
        out.push_back(std::move(prop));
    }
    return out;
}

/// Appends accepted proposals to a copy of `rules` with the version bumped.
/// Pending and rejected proposals are ignored.
inline RuleSet apply_refinement(const RuleSet& rules, const std::vector<RuleProposal>& proposals) {
    RuleSet next = rules;
    next.version = rules.version + 1;
    for (const auto& p : proposals) {
        if (p.status != ProposalStatus::accepted) continue;
        if (p.base_version != rules.version)
            throw Error(ErrorKind::VersionConflict,
                        text::format("proposal '%s' targets rule set version %d but the current version is %d",
                                     p.candidate.id.c_str(), p.base_version, rules.version));
        if (next.find(p.candidate.id))
            throw Error(ErrorKind::VersionConflict, "rule id '" + p.candidate.id + "' already exists");
        Rule r = p.candidate;
        r.origin = RuleOrigin::refined;
        next.rules.push_back(std::move(r));
    }
    return next;
}

// ---- Files ----------------------------------------------------------------

inline constexpr std::string_view kProposalSchema = "hser.proposals/1";

inline nlohmann::ordered_json to_json(const ErrorPattern& p) {
    nlohmann::ordered_json j;
    j["gold"] = to_string(p.gold);
    j["predicted"] = to_string(p.predicted);
    j["support"] = p.support;
    j["top_deltas"] = nlohmann::ordered_json::array();
    for (const auto& d : p.top_deltas) {
        nlohmann::ordered_json jd;
        jd["dimension"] = d.dimension;
        jd["d"] = d.d;
        jd["direction"] = d.direction < 0 ? "lower" : (d.direction > 0 ? "higher" : "none");
        jd["error_median_z"] = d.error_median_z;
        jd["predicted_mean_z"] = d.predicted_mean_z;
        j["top_deltas"].push_back(jd);
    }
    return j;
}

inline ErrorPattern error_pattern_from_json(const nlohmann::json& j, const std::string& where) {
    ErrorPattern p;
    p.gold = parse_label_or_throw(j.at("gold").get<std::string>(), where + ".gold");
    p.predicted = parse_label_or_throw(j.at("predicted").get<std::string>(), where + ".predicted");
    p.support = j.at("support").get<std::size_t>();
    for (const auto& jd : j.at("top_deltas")) {
        DimensionDelta d;
        d.dimension = jd.at("dimension").get<std::string>();
        d.d = jd.at("d").get<double>();
        d.direction = d.d > 0.0 ? 1 : (d.d < 0.0 ? -1 : 0);
        d.error_median_z = jd.value("error_median_z", 0.0);
        d.predicted_mean_z = jd.value("predicted_mean_z", 0.0);
        p.top_deltas.push_back(d);
    }
    return p;
}

inline nlohmann::ordered_json proposals_to_json(const std::vector<RuleProposal>& proposals) {
    nlohmann::ordered_json j;
    j["schema"] = kProposalSchema;
    j["proposals"] = nlohmann::ordered_json::array();
    for (const auto& p : proposals) {
        nlohmann::ordered_json jp;
        jp["status"] = to_string(p.status);
        jp["base_version"] = p.base_version;
        jp["rule"] = to_json(p.candidate);
        jp["pattern"] = to_json(p.pattern);
        j["proposals"].push_back(jp);
    }
    return j;
}

inline std::vector<RuleProposal> parse_proposals(const std::string& contents, const std::string& where = "proposals") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(contents);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::SchemaError, where + ": " + e.what());
    }
    std::vector<RuleProposal> out;
    try {
        if (j.value("schema", std::string{}) != kProposalSchema)
            throw Error(ErrorKind::SchemaError, where + ": schema must be " + std::string(kProposalSchema));
        const auto& list = j.at("proposals");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string path = "proposals[" + std::to_string(i) + "]";
            RuleProposal p;
            const auto status = parse_proposal_status(list[i].at("status").get<std::string>());
            if (!status)
                throw Error(ErrorKind::SchemaError, where + ": " + path + ".status must be pending, accepted or rejected");
            p.status = *status;
            p.base_version = list[i].at("base_version").get<int>();
            p.candidate = rule_from_json(list[i].at("rule"), where, path + ".rule");
            p.pattern = error_pattern_from_json(list[i].at("pattern"), path + ".pattern");
            out.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::SchemaError, where + ": " + e.what());
    }
    return out;
}

inline void save_proposals(const std::filesystem::path& path, const std::vector<RuleProposal>& proposals) {
    text::write_file(path, proposals_to_json(proposals).dump(2) + "\n");
}

inline std::vector<RuleProposal> load_proposals(const std::filesystem::path& path) {
    return parse_proposals(text::read_file(path), path.string());
}

/// rules.json (version 1) -> rules.v2.json; rules.v2.json -> rules.v3.json.
inline std::filesystem::path versioned_rules_path(const std::filesystem::path& current, int new_version) {
    static const std::regex suffix(R"(^(.*)\.v[0-9]+$)");
    std::string stem = current.stem().string();
    std::smatch m;
    if (std::regex_match(stem, m, suffix)) stem = m[1].str();
    return current.parent_path() / (stem + ".v" + std::to_string(new_version) + current.extension().string());
}

/// Reads the rule set and proposals, writes the next version next to the
/// current file and returns its path. Existing files are never overwritten.
inline std::filesystem::path apply_refinement_files(const std::filesystem::path& rules_path,
                                                    const std::filesystem::path& proposals_path) {
    const auto rules = load_rules(rules_path);
    const auto proposals = load_proposals(proposals_path);
    const auto next = apply_refinement(rules, proposals);
    const auto out = versioned_rules_path(rules_path, next.version);
    if (std::filesystem::exists(out))
        throw Error(ErrorKind::VersionConflict, out.string() + " already exists; refine from the latest version");
    save_rules(out, next);
    return out;
}

inline std::string refinement_report_text(const std::vector<ErrorPattern>& patterns,
                                          const std::vector<RuleProposal>& proposals) {
    std::string out;
    out += text::format("Error patterns: %zu\n", patterns.size());
    for (const auto& p : patterns) {
        out += text::format("  %s -> %s (support %zu)\n", std::string(to_string(p.gold)).c_str(),
                            std::string(to_string(p.predicted)).c_str(), p.support);
        for (const auto& d : p.top_deltas)
            out += text::format("    %-16s d=%+.3f  error median z=%+.2f\n", d.dimension.c_str(), d.d, d.error_median_z);
    }
    out += text::format("Proposals: %zu\n", proposals.size());
    for (const auto& p : proposals)
        out += text::format("  [%s] %s: %s => %s (strength %.2f)\n", std::string(to_string(p.status)).c_str(),
                            p.candidate.id.c_str(), p.candidate.condition_text().c_str(),
                            std::string(to_string(p.candidate.implied_label)).c_str(), p.candidate.strength);
    return out;
}

}  // namespace hser
