#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hser/eval.hpp"
#include "hser/hybrid.hpp"
#include "hser/reasoning/auto_rules.hpp"
#include "hser/reasoning/rules.hpp"

namespace hser {

/// Inputs for a version comparison. `refined_rules` feeds v3 and v4 (v4
/// falls back to the human rules when absent); v5 rules are generated by the
/// endpoint itself unless given.
struct ComparisonInputs {
    const std::vector<SampleInput>* samples = nullptr;
    const SvmModel* model = nullptr;
    const CorpusStats* stats = nullptr;
    const RuleSet* human_rules = nullptr;
    const RuleSet* refined_rules = nullptr;
    const RuleSet* auto_rules = nullptr;
    LlmClient* client = nullptr;
    double tau = 0.7;
    bool include_ml_only = true;
};

struct VersionRun {
    RunVersion version;
    PipelineResult result;
};

struct ComparisonResult {
    std::vector<VersionRun> runs;  // ml_only (optional), v1..v5 in order
    ComparisonReport report;
    RuleSet auto_rules;
    std::vector<std::string> auto_rule_warnings;
};

inline ComparisonResult run_comparison(const ComparisonInputs& in) {
    if (!in.samples || !in.model || !in.stats || !in.human_rules || !in.client)
        throw Error(ErrorKind::ConfigError, "comparison needs samples, model, stats, rules and an endpoint");
    for (const auto& s : *in.samples)
        if (!s.gold) throw Error(ErrorKind::MissingGold, "comparison sample '" + s.sample_id + "' has no gold label");

    ComparisonResult out;
    if (in.auto_rules) {
        out.auto_rules = *in.auto_rules;
    } else {
        auto generated = auto_generate_rules(*in.client, {feature_names().begin(), feature_names().end()});
        out.auto_rules = std::move(generated.rules);
        out.auto_rule_warnings = std::move(generated.warnings);
    }
    const RuleSet& refined = in.refined_rules ? *in.refined_rules : *in.human_rules;

    std::vector<RunVersion> versions;
    if (in.include_ml_only) versions.push_back(RunVersion::ml_only());
    for (auto v : kAllVersions) versions.push_back(RunVersion::of(v));

    std::vector<RunSummary> summaries;
    for (const auto& v : versions) {
        InferenceResources res{in.model, in.human_rules, in.stats, in.client};
        if (v.kind == RunVersion::Kind::prompt) {
            if (v.prompt == PromptVersion::v3_refined || v.prompt == PromptVersion::v4_hybrid) res.rules = &refined;
            if (v.prompt == PromptVersion::v5_auto) res.rules = &out.auto_rules;
        }
        auto result = run_pipeline(*in.samples, res, {v, in.tau});
        summaries.push_back({to_string(v), *result.report.metrics});
        out.runs.push_back({v, std::move(result)});
    }
    out.report = compare_report(std::move(summaries));
    return out;
}

struct SweepPoint {
    double tau = 0.0;
    RunReport report;
};

/// v4 over a tau grid.
inline std::vector<SweepPoint> sweep_tau(const std::vector<SampleInput>& samples, const InferenceResources& res,
                                         const std::vector<double>& taus) {
    std::vector<SweepPoint> out;
    for (double tau : taus) {
        auto result = run_pipeline(samples, res, {RunVersion::of(PromptVersion::v4_hybrid), tau});
        out.push_back({tau, std::move(result.report)});
    }
    return out;
}

inline const std::vector<double>& default_tau_grid() {
    static const std::vector<double> grid{0.0, 0.4, 0.6, 0.7, 0.8, 0.9, 1.01};
    return grid;
}

}  // namespace hser
