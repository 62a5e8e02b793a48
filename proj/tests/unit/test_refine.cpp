#include <gtest/gtest.h>

#include "hser/refine.hpp"
#include "support.hpp"

using namespace hser;

namespace {

struct Planted {
    CorpusStats stats;
    std::vector<LabeledSample> errors, correct;
};

// Correctly classified samples come from cue_blobs. Eight panic samples are
// mistaken for angry and differ from correct panic mostly in energy_std.
Planted planted() {
    const auto data = testutil::cue_blobs(40, 2.0, 5);
    Planted p;
    p.stats = fit_corpus_stats(data.X);
    for (std::size_t i = 0; i < data.X.size(); ++i) p.correct.push_back({data.ids[i], data.X[i], data.y[i], data.y[i]});
    Rng rng(17);
    for (int i = 0; i < 8; ++i) {
        FeatureVector v;
        for (auto& x : v.values) x = rng.normal() * 0.5;
        v[dim::pitch_std] += 2.0;
        v[dim::energy_std] += 6.0;
        p.errors.push_back({"err_" + std::to_string(i), v, EmotionLabel::panic, EmotionLabel::angry});
    }
    return p;
}

Prediction pred(std::string id, EmotionLabel label) {
    Prediction p;
    p.sample_id = std::move(id);
    p.label = label;
    return p;
}

}  // namespace

TEST(Confusion, CountsByGoldAndPrediction) {
    const std::map<std::string, EmotionLabel> gold{
        {"a", EmotionLabel::angry}, {"b", EmotionLabel::angry}, {"c", EmotionLabel::panic}};
    const auto cm = confusion_matrix(
        {pred("a", EmotionLabel::angry), pred("b", EmotionLabel::panic), pred("c", EmotionLabel::angry)}, gold);
    EXPECT_EQ(cm.counts[index_of(EmotionLabel::angry)][index_of(EmotionLabel::angry)], 1);
    EXPECT_EQ(cm.counts[index_of(EmotionLabel::angry)][index_of(EmotionLabel::panic)], 1);
    EXPECT_EQ(cm.counts[index_of(EmotionLabel::panic)][index_of(EmotionLabel::angry)], 1);
}

TEST(Confusion, IdMismatchesAreErrors) {
    const std::map<std::string, EmotionLabel> gold{{"a", EmotionLabel::angry}, {"b", EmotionLabel::calm}};
    for (const auto& preds : std::vector<std::vector<Prediction>>{
             {pred("a", EmotionLabel::calm)},
             {pred("a", EmotionLabel::calm), pred("z", EmotionLabel::calm)},
             {pred("a", EmotionLabel::calm), pred("a", EmotionLabel::calm)}}) {
        try {
            confusion_matrix(preds, gold);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::IdMismatch);
        }
    }
}

TEST(CohensD, PooledVarianceReference) {
    // means 2 and 5.5, pooled variance (2 + 5) / 5
    EXPECT_NEAR(refine_detail::cohens_d({1, 2, 3}, {4, 5, 6, 7}), -3.5 / std::sqrt(1.4), 1e-12);
    EXPECT_EQ(refine_detail::cohens_d({1, 1}, {1, 1, 1}), 0.0);
    EXPECT_EQ(refine_detail::cohens_d({1}, {2}), 0.0);
    EXPECT_EQ(refine_detail::cohens_d({}, {2, 3, 4}), 0.0);
    EXPECT_EQ(refine_detail::median({3, 1, 2, 10}), 2.5);
}

TEST(Mining, RecoversPlantedDimension) {
    const auto p = planted();
    const auto patterns = mine_error_patterns(p.errors, p.correct, p.stats);
    ASSERT_EQ(patterns.size(), 1u);
    const auto& pat = patterns[0];
    EXPECT_EQ(pat.gold, EmotionLabel::panic);
    EXPECT_EQ(pat.predicted, EmotionLabel::angry);
    EXPECT_EQ(pat.support, 8u);
    ASSERT_EQ(pat.top_deltas.size(), 5u);
    EXPECT_EQ(pat.top_deltas[0].dimension, "energy_std");
    EXPECT_GT(pat.top_deltas[0].d, 0.0);
    for (std::size_t i = 1; i < pat.top_deltas.size(); ++i)
        EXPECT_GE(std::abs(pat.top_deltas[i - 1].d), std::abs(pat.top_deltas[i].d));
}

TEST(Mining, SupportBelowMinimumIsSkipped) {
    auto p = planted();
    p.errors.resize(4);
    EXPECT_TRUE(mine_error_patterns(p.errors, p.correct, p.stats).empty());
    EXPECT_EQ(mine_error_patterns(p.errors, p.correct, p.stats, 4).size(), 1u);
}

TEST(Proposals, ThresholdComparatorAndStrengthFollowPattern) {
    const auto p = planted();
    const auto props = propose_rules(mine_error_patterns(p.errors, p.correct, p.stats), 1);
    ASSERT_EQ(props.size(), 1u);
    const auto& r = props[0].candidate;
    const auto& top = props[0].pattern.top_deltas[0];
    EXPECT_EQ(r.id, "refined_v1_panic_not_angry_energy_std");
    ASSERT_EQ(r.conditions.size(), 1u);
    EXPECT_EQ(r.conditions[0].dimension, "energy_std");
    EXPECT_EQ(r.conditions[0].comparator, Comparator::ge);
    EXPECT_EQ(r.conditions[0].threshold_z, std::round(top.error_median_z * 100.0) / 100.0);
    EXPECT_EQ(r.implied_label, EmotionLabel::panic);
    EXPECT_EQ(r.strength, std::round(std::min(1.0, std::abs(top.d) / 2.0) * 100.0) / 100.0);
    EXPECT_EQ(r.origin, RuleOrigin::refined);
    EXPECT_EQ(props[0].status, ProposalStatus::pending);
}

TEST(Proposals, LowerErrorMedianUsesLessOrEqual) {
    ErrorPattern pat;
    pat.gold = EmotionLabel::calm;
    pat.predicted = EmotionLabel::angry;
    pat.support = 6;
    pat.top_deltas = {{"energy_mean", -1.5, -1, 0.234, 1.8}};
    const auto props = propose_rules({pat, pat}, 3);
    ASSERT_EQ(props.size(), 2u);
    EXPECT_EQ(props[0].candidate.conditions[0].comparator, Comparator::le);
    EXPECT_EQ(props[0].candidate.conditions[0].threshold_z, 0.23);
    EXPECT_EQ(props[0].candidate.strength, 0.75);
    EXPECT_EQ(props[1].candidate.id, "refined_v3_calm_not_angry_energy_mean_2");
    pat.top_deltas[0].d = 0.0;
    EXPECT_TRUE(propose_rules({pat}, 3).empty());
}

TEST(Apply, OnlyAcceptedProposalsAreAddedAndVersionBumps) {
    const auto p = planted();
    auto props = propose_rules(mine_error_patterns(p.errors, p.correct, p.stats), 1);
    const auto base = default_rules();
    auto unchanged = apply_refinement(base, props);
    EXPECT_EQ(unchanged.version, 2);
    EXPECT_EQ(unchanged.rules.size(), base.rules.size());
    props[0].status = ProposalStatus::accepted;
    const auto next = apply_refinement(base, props);
    EXPECT_EQ(next.rules.size(), base.rules.size() + 1);
    EXPECT_EQ(next.rules.back().id, props[0].candidate.id);
    // Mined against v1 but the rules are now v2.
    try {
        apply_refinement(next, props);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::VersionConflict);
    }
}

TEST(Apply, DuplicateRuleIdIsVersionConflict) {
    auto base = default_rules();
    RuleProposal prop;
    prop.candidate = base.rules[0];
    prop.status = ProposalStatus::accepted;
    EXPECT_THROW(apply_refinement(base, {prop}), Error);
}

TEST(Apply, FilesAreVersionedAndNeverOverwritten) {
    const auto dir = testutil::scratch_dir("refine_files");
    save_rules(dir / "rules.json", default_rules());
    const auto p = planted();
    auto props = propose_rules(mine_error_patterns(p.errors, p.correct, p.stats), 1);
    props[0].status = ProposalStatus::accepted;
    save_proposals(dir / "proposals.json", props);
    const auto out = apply_refinement_files(dir / "rules.json", dir / "proposals.json");
    EXPECT_EQ(out, dir / "rules.v2.json");
    EXPECT_EQ(load_rules(out).rules.size(), 4u);
    EXPECT_EQ(load_rules(dir / "rules.json").rules.size(), 3u);
    try {
        apply_refinement_files(dir / "rules.json", dir / "proposals.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::VersionConflict);
    }
    EXPECT_EQ(versioned_rules_path("x/rules.v2.json", 3), std::filesystem::path("x/rules.v3.json"));
}

TEST(Proposals, JsonRoundTrip) {
    const auto p = planted();
    auto props = propose_rules(mine_error_patterns(p.errors, p.correct, p.stats), 1);
    props[0].status = ProposalStatus::rejected;
    const auto text = proposals_to_json(props).dump(2);
    const auto back = parse_proposals(text);
    EXPECT_EQ(proposals_to_json(back).dump(2), text);
    EXPECT_THROW(parse_proposals(R"({"schema":"hser.proposals/1","proposals":[{"status":"maybe"}]})"), Error);
}

TEST(Proposals, ReportListsPatternsAndProposals) {
    const auto p = planted();
    const auto patterns = mine_error_patterns(p.errors, p.correct, p.stats);
    const auto text = refinement_report_text(patterns, propose_rules(patterns, 1));
    EXPECT_NE(text.find("panic -> angry (support 8)"), std::string::npos);
    EXPECT_NE(text.find("[pending] refined_v1_panic_not_angry_energy_std"), std::string::npos);
}
