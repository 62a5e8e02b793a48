#include <gtest/gtest.h>

#include "hser/reasoning/prompt.hpp"
#include "hser/reasoning/rules.hpp"
#include "support.hpp"

using namespace hser;

namespace {

std::array<double, kFeatureDim> zeros() { return {}; }

StructuredDescription flat_description() {
    std::vector<FeatureVector> vs(2);
    vs[1].values.fill(1.0);
    return describe(vs[0], fit_corpus_stats(vs));
}

std::string expect_schema_error(const std::string& doc) {
    try {
        parse_rules(doc, "r.json");
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SchemaError);
        return e.what();
    }
    ADD_FAILURE() << "accepted: " << doc;
    return {};
}

}  // namespace

TEST(Rules, ShippedDefaultFileMatchesBuiltIn) {
    const auto shipped = load_rules(std::filesystem::path(HSER_SOURCE_DIR) / "data/rules/default_rules.json");
    EXPECT_EQ(to_json(shipped).dump(), to_json(default_rules()).dump());
}

TEST(Rules, JsonRoundTrip) {
    auto rs = default_rules();
    rs.version = 4;
    rs.rules[0].origin = RuleOrigin::refined;
    rs.rules[0].conditions[0].comparator = Comparator::le;
    const auto back = parse_rules(to_json(rs).dump());
    EXPECT_EQ(to_json(back).dump(), to_json(rs).dump());
}

TEST(Rules, ConjunctionSemantics) {
    const auto rs = default_rules();
    const Rule& panic = *rs.find("seed_panic_variability");
    auto z = zeros();
    EXPECT_FALSE(panic.satisfied(z));
    z[dim::pitch_std] = 1.2;
    EXPECT_FALSE(panic.satisfied(z));
    z[dim::energy_std] = 1.2;
    EXPECT_TRUE(panic.satisfied(z));
    // Strict comparator: exactly at the threshold does not fire.
    z[dim::energy_std] = 1.0;
    EXPECT_FALSE(panic.satisfied(z));
    EXPECT_FALSE(Rule{}.satisfied(z));
}

TEST(Rules, StrongestSatisfiedPrefersStrengthThenOrder) {
    RuleSet rs;
    rs.rules.push_back({"a", "", {{"pitch_mean", Comparator::gt, 0.0}}, EmotionLabel::angry, 0.5, RuleOrigin::human});
    rs.rules.push_back({"b", "", {{"pitch_mean", Comparator::gt, 0.0}}, EmotionLabel::panic, 0.9, RuleOrigin::human});
    rs.rules.push_back({"c", "", {{"pitch_mean", Comparator::gt, 0.0}}, EmotionLabel::calm, 0.9, RuleOrigin::human});
    auto z = zeros();
    EXPECT_EQ(strongest_satisfied(rs, z), nullptr);
    z[dim::pitch_mean] = 1.0;
    EXPECT_EQ(strongest_satisfied(rs, z)->id, "b");
}

TEST(Rules, SchemaErrorsNameTheField) {
    const std::string head = R"({"schema":"hser.rules/1","version":1,"rules":[)";
    auto rule = [&](const std::string& body) { return head + body + "]}"; };
    EXPECT_NE(expect_schema_error(rule(R"({"id":"x","conditions":[{"dimension":"loudness","comparator":">","threshold_z":1}],"implied_label":"calm"})"))
                  .find("rules[0].conditions[0].dimension"),
              std::string::npos);
    EXPECT_NE(expect_schema_error(rule(R"({"id":"x","conditions":[{"dimension":"pitch_mean","comparator":"=","threshold_z":1}],"implied_label":"calm"})"))
                  .find("comparator"),
              std::string::npos);
    EXPECT_NE(expect_schema_error(rule(R"({"id":"x","conditions":[{"dimension":"pitch_mean","comparator":">","threshold_z":1}],"implied_label":"happy"})"))
                  .find("implied_label"),
              std::string::npos);
    EXPECT_NE(expect_schema_error(rule(R"({"id":"x","conditions":[{"dimension":"pitch_mean","comparator":">","threshold_z":1}],"implied_label":"calm","strength":0})"))
                  .find("strength"),
              std::string::npos);
    EXPECT_NE(expect_schema_error(rule(R"({"id":"x","conditions":[],"implied_label":"calm"})")).find("conditions"),
              std::string::npos);
    const std::string one = R"({"id":"x","conditions":[{"dimension":"pitch_mean","comparator":">","threshold_z":1}],"implied_label":"calm"})";
    EXPECT_NE(expect_schema_error(rule(one + "," + one)).find("duplicate"), std::string::npos);
    EXPECT_NE(expect_schema_error(R"({"schema":"hser.rules/1","version":0,"rules":[]})").find("version"),
              std::string::npos);
    EXPECT_NE(expect_schema_error("{\n\"schema\": \"hser.rules/1\",\n  oops\n}").find("r.json:3"), std::string::npos);
}

TEST(Rules, UnicodeComparatorsAccepted) {
    const auto rs = parse_rules(
        R"({"schema":"hser.rules/1","version":1,"rules":[{"id":"x","conditions":[{"dimension":"pitch_mean","comparator":"≥","threshold_z":1}],"implied_label":"calm"}]})");
    EXPECT_EQ(rs.rules[0].conditions[0].comparator, Comparator::ge);
}

TEST(Prompt, VersionsDifferAsSpecified) {
    const auto desc = flat_description();
    const auto rules = default_rules();
    MlEvidence ml;
    ml.label = EmotionLabel::panic;
    ml.confidence = 0.61;
    ml.probs = {0.25, 0.14, 0.61};

    const auto v1 = build_prompt(PromptVersion::v1_basic, desc, rules);
    const auto v2 = build_prompt(PromptVersion::v2_rules, desc, rules);
    const auto v4 = build_prompt(PromptVersion::v4_hybrid, desc, rules, ml);
    EXPECT_EQ(v1.find("Rule R1"), std::string::npos);
    EXPECT_NE(v2.find("Rule R1 [seed_panic_variability] (strength 0.80)"), std::string::npos);
    EXPECT_NE(v2.find("pitch_std z > +1.00 AND energy_std z > +1.00 => panic"), std::string::npos);
    EXPECT_EQ(v2.find("classifier"), std::string::npos);
    EXPECT_NE(v4.find("predicted panic with confidence 0.61"), std::string::npos);
    for (const auto& p : {v1, v2, v4}) {
        EXPECT_NE(p.find(desc.text), std::string::npos);
        EXPECT_NE(p.find("LABEL: <calm|angry|panic>"), std::string::npos);
    }
    EXPECT_EQ(v2, build_prompt(PromptVersion::v2_rules, desc, rules));
}

TEST(Prompt, MissingInputsAreErrors) {
    const auto desc = flat_description();
    try {
        build_prompt(PromptVersion::v4_hybrid, desc, default_rules());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingEvidence);
    }
    for (auto v : {PromptVersion::v2_rules, PromptVersion::v3_refined, PromptVersion::v5_auto}) {
        try {
            build_prompt(v, desc, RuleSet{});
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::EmptyRules);
        }
    }
    EXPECT_NO_THROW(build_prompt(PromptVersion::v1_basic, desc, RuleSet{}));
}

TEST(Prompt, VersionNamesParse) {
    EXPECT_EQ(parse_prompt_version("v3"), PromptVersion::v3_refined);
    EXPECT_EQ(parse_prompt_version("v4_hybrid"), PromptVersion::v4_hybrid);
    EXPECT_FALSE(parse_prompt_version("v6").has_value());
}

TEST(ParseLabel, Examples) {
    EXPECT_EQ(parse_label("LABEL: panic"), EmotionLabel::panic);
    EXPECT_EQ(parse_label("reasoning...\nlabel:   Angry"), EmotionLabel::angry);
    EXPECT_EQ(parse_label("LABEL: **calm**"), EmotionLabel::calm);
    EXPECT_EQ(parse_label("LABEL: <panic>"), EmotionLabel::panic);
    EXPECT_EQ(parse_label("LABEL: calm\nOn reflection, LABEL: angry"), EmotionLabel::angry);
    // The schema line beats free text that comes after it.
    EXPECT_EQ(parse_label("LABEL: calm. Not panic."), EmotionLabel::calm);
    EXPECT_EQ(parse_label("The speaker sounds calm, perhaps angry."), EmotionLabel::angry);
    EXPECT_FALSE(parse_label("cannot determine").has_value());
    EXPECT_FALSE(parse_label("").has_value());
    EXPECT_FALSE(parse_label("calmness and panicky").has_value());
}

TEST(ParseLabel, TextPromptCarriesTranscript) {
    const auto p = build_text_prompt("get out of here now");
    EXPECT_NE(p.find("\"get out of here now\""), std::string::npos);
    EXPECT_NE(p.find("LABEL:"), std::string::npos);
}
