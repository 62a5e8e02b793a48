#include <gtest/gtest.h>

#include "hser/hybrid.hpp"
#include "hser/reasoning/offline_responder.hpp"
#include "support.hpp"

using namespace hser;

namespace {

struct World {
    testutil::LabeledVectors data;
    SvmModel model;
    CorpusStats stats;
    RuleSet rules = default_rules();
    std::vector<SampleInput> samples;

    explicit World(double shift = 1.5) : data(testutil::cue_blobs(30, shift, 21)) {
        model = train(data.X, data.y);
        stats = fit_corpus_stats(data.X);
        for (std::size_t i = 0; i < data.X.size(); ++i) samples.push_back({data.ids[i], data.X[i], data.y[i], {}});
    }
    InferenceResources resources(LlmClient* client) { return {&model, &rules, &stats, client}; }
};

LlmEndpointConfig mock(const std::string& kind) {
    LlmEndpointConfig c;
    c.base_url = "mock://" + kind;
    c.backoff_initial_s = 0.0;
    c.max_retries = 1;
    return c;
}

// An endpoint that always knows the gold label: prompts are matched back to
// samples through their (unique) acoustic description.
std::shared_ptr<Transport> oracle_transport(const World& w) {
    auto table = std::make_shared<std::map<std::string, EmotionLabel>>();
    for (const auto& s : w.samples) (*table)[describe(s.features, w.stats).text] = *s.gold;
    return std::make_shared<FunctionTransport>([table](const std::string& body) {
        const auto prompt = prompt_from_chat_request(body);
        for (const auto& [desc, label] : *table)
            if (prompt.find(desc) != std::string::npos)
                return HttpResponse{200, chat_response_body("LABEL: " + std::string(to_string(label)))};
        return HttpResponse{200, chat_response_body("unsure")};
    });
}

double accuracy(const std::vector<Prediction>& preds, const std::vector<SampleInput>& samples) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) ok += preds[i].label == *samples[i].gold;
    return static_cast<double>(ok) / preds.size();
}

}  // namespace

TEST(Routing, ThresholdBoundaries) {
    MlEvidence ml;
    ml.confidence = 0.7;
    EXPECT_EQ(route(ml, 0.7).path, RoutePath::direct);
    EXPECT_EQ(route(ml, std::nextafter(0.7, 1.0)).path, RoutePath::reason);
    EXPECT_EQ(route(ml, 0.0).path, RoutePath::direct);
    ml.confidence = 1.0;
    EXPECT_EQ(route(ml, 1.0).path, RoutePath::direct);
    EXPECT_EQ(route(ml, kMaxTau).path, RoutePath::reason);
    for (double bad : {-0.01, 1.02, std::nan("")}) {
        try {
            route(ml, bad);
            FAIL() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
        }
    }
}

TEST(Hybrid, MlOnlyNeverCallsTheEndpoint) {
    World w;
    const auto preds = infer_batch(w.samples, w.resources(nullptr), {RunVersion::ml_only(), 0.7});
    for (std::size_t i = 0; i < preds.size(); ++i) {
        EXPECT_EQ(preds[i].source, PredictionSource::ml_direct);
        EXPECT_FALSE(preds[i].routed);
        EXPECT_EQ(preds[i].latency_ms, 0.0);
        EXPECT_EQ(preds[i].label, predict(w.model, w.samples[i].features).label);
        EXPECT_EQ(preds[i].version, "ml_only");
    }
}

TEST(Hybrid, TauExtremesRouteNothingOrEverything) {
    World w;
    LlmEndpointConfig cfg = mock("rules-literal");
    LlmClient client(cfg, make_transport(cfg));
    const auto none = infer_batch(w.samples, w.resources(&client), {RunVersion::of(PromptVersion::v4_hybrid), 0.0});
    for (const auto& p : none) EXPECT_EQ(p.source, PredictionSource::ml_direct);
    EXPECT_EQ(client.transport_calls(), 0u);
    const auto all = infer_batch(w.samples, w.resources(&client), {RunVersion::of(PromptVersion::v4_hybrid), kMaxTau});
    for (const auto& p : all) {
        EXPECT_TRUE(p.routed);
        EXPECT_EQ(p.source, PredictionSource::llm_reasoned);
        EXPECT_TRUE(p.rationale.has_value());
    }
    EXPECT_EQ(client.transport_calls(), w.samples.size());
}

TEST(Hybrid, RoutedSetGrowsMonotonicallyWithTau) {
    World w;
    LlmEndpointConfig cfg = mock("rules-literal");
    LlmClient client(cfg, make_transport(cfg));
    std::vector<bool> prev(w.samples.size(), false);
    for (double tau : {0.0, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0, kMaxTau}) {
        const auto preds = infer_batch(w.samples, w.resources(&client), {RunVersion::of(PromptVersion::v4_hybrid), tau});
        for (std::size_t i = 0; i < preds.size(); ++i) {
            EXPECT_TRUE(preds[i].routed || !prev[i]) << tau;
            EXPECT_EQ(preds[i].routed, preds[i].ml_evidence->confidence < tau);
            prev[i] = preds[i].routed;
        }
    }
}

TEST(Hybrid, OracleEndpointNeverHurtsAndImprovesWithTau) {
    World w(1.0);
    LlmClient client(LlmEndpointConfig{}, oracle_transport(w));
    const auto ml = infer_batch(w.samples, w.resources(nullptr), {RunVersion::ml_only(), 0.7});
    const double ml_acc = accuracy(ml, w.samples);
    ASSERT_LT(ml_acc, 1.0);
    double prev = 0.0;
    for (double tau : {0.0, 0.5, 0.7, 0.9, kMaxTau}) {
        const auto preds = infer_batch(w.samples, w.resources(&client), {RunVersion::of(PromptVersion::v4_hybrid), tau});
        const double acc = accuracy(preds, w.samples);
        EXPECT_GE(acc, ml_acc);
        EXPECT_GE(acc, prev);
        prev = acc;
    }
    EXPECT_EQ(prev, 1.0);
}

TEST(Hybrid, TimeoutFallsBackToClassifierLabel) {
    World w;
    LlmEndpointConfig cfg = mock("timeout");
    LlmClient client(cfg, make_transport(cfg));
    const auto preds = infer_batch(w.samples, w.resources(&client), {RunVersion::of(PromptVersion::v4_hybrid), kMaxTau});
    ASSERT_EQ(preds.size(), w.samples.size());
    for (const auto& p : preds) {
        EXPECT_EQ(p.source, PredictionSource::fallback_ml);
        EXPECT_EQ(p.reason, "timeout");
        EXPECT_EQ(p.label, p.ml_evidence->label);
        EXPECT_FALSE(p.rationale.has_value());
    }
}

TEST(Hybrid, RuleVersionsFallBackToStrongestRuleThenDefault) {
    World w;
    LlmEndpointConfig cfg = mock("unavailable");
    LlmClient client(cfg, make_transport(cfg));
    const auto preds = infer_batch(w.samples, w.resources(&client), {RunVersion::of(PromptVersion::v2_rules), 0.7});
    std::size_t by_rule = 0, by_default = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        EXPECT_EQ(p.reason, "transport_error");
        const Rule* r = strongest_satisfied(w.rules, w.stats.z(w.samples[i].features));
        if (r) {
            ++by_rule;
            EXPECT_EQ(p.source, PredictionSource::fallback_rule);
            EXPECT_EQ(p.fallback_rule_id, r->id);
            EXPECT_EQ(p.label, r->implied_label);
        } else {
            ++by_default;
            EXPECT_EQ(p.source, PredictionSource::fallback_default);
            EXPECT_EQ(p.label, EmotionLabel::calm);
        }
    }
    EXPECT_GT(by_rule, 0u);
    EXPECT_GT(by_default, 0u);
}

TEST(Hybrid, UnparseableReplyKeepsRationale) {
    World w;
    auto transport = std::make_shared<FunctionTransport>(
        [](const std::string&) { return HttpResponse{200, chat_response_body("hard to say")}; });
    LlmClient client(LlmEndpointConfig{}, transport);
    const auto p = infer(w.samples[0], w.resources(&client), {RunVersion::of(PromptVersion::v1_basic), 0.7});
    EXPECT_EQ(p.reason, std::string(kParseFailure));
    EXPECT_EQ(p.rationale, "hard to say");
    EXPECT_EQ(p.source, PredictionSource::fallback_default);
}

TEST(Hybrid, TextBaselineNeedsTranscripts) {
    World w;
    LlmEndpointConfig cfg = mock("rules-literal");
    LlmClient client(cfg, make_transport(cfg));
    const InferenceOptions opts{RunVersion::text_baseline(), 0.7};
    try {
        infer(w.samples[0], w.resources(&client), opts);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ManifestError);
    }
    auto s = w.samples[0];
    s.transcript = "please help me";
    const auto p = infer(s, w.resources(&client), opts);
    EXPECT_TRUE(p.routed);
    EXPECT_EQ(p.version, "text_baseline");
}

TEST(Hybrid, MissingResourcesAreConfigErrors) {
    World w;
    LlmEndpointConfig cfg = mock("rules-literal");
    LlmClient client(cfg, make_transport(cfg));
    auto kind_of = [&](InferenceResources res, InferenceOptions opts) {
        try {
            infer_batch(w.samples, res, opts);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::IoError;
    };
    EXPECT_EQ(kind_of({nullptr, &w.rules, &w.stats, &client}, {RunVersion::ml_only(), 0.7}), ErrorKind::ConfigError);
    EXPECT_EQ(kind_of({&w.model, &w.rules, &w.stats, nullptr}, {RunVersion::of(PromptVersion::v4_hybrid), 0.7}),
              ErrorKind::ConfigError);
    RuleSet empty;
    EXPECT_EQ(kind_of({&w.model, &empty, &w.stats, &client}, {RunVersion::of(PromptVersion::v2_rules), 0.7}),
              ErrorKind::EmptyRules);
    EXPECT_EQ(kind_of(w.resources(&client), {RunVersion::of(PromptVersion::v4_hybrid), 2.0}), ErrorKind::ConfigError);
    // v4 with no rules is allowed.
    EXPECT_NO_THROW(infer_batch(w.samples, {&w.model, &empty, &w.stats, &client}, {RunVersion::of(PromptVersion::v4_hybrid), 0.7}));
}

TEST(Hybrid, CachedRerunReplaysLatencyAndLabels) {
    World w;
    const auto dir = testutil::scratch_dir("hybrid_cache");
    LlmEndpointConfig cfg = mock("rules-literal");
    const InferenceOptions opts{RunVersion::of(PromptVersion::v4_hybrid), 0.9};
    LlmClient cold(cfg, make_transport(cfg), ResponseCache(dir));
    const auto a = infer_batch(w.samples, w.resources(&cold), opts);
    LlmClient warm(cfg, make_transport(cfg), ResponseCache(dir));
    const auto b = infer_batch(w.samples, w.resources(&warm), opts);
    EXPECT_EQ(warm.transport_calls(), 0u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].label, b[i].label);
        EXPECT_EQ(a[i].latency_ms, b[i].latency_ms);
        EXPECT_EQ(b[i].cache_hit, b[i].routed);
    }
    LlmClient warm2(cfg, make_transport(cfg), ResponseCache(dir));
    EXPECT_EQ(predictions_to_jsonl(b), predictions_to_jsonl(infer_batch(w.samples, w.resources(&warm2), opts)));
}

TEST(Predictions, JsonlRoundTrip) {
    World w;
    LlmEndpointConfig cfg = mock("timeout");
    LlmClient client(cfg, make_transport(cfg));
    auto preds = infer_batch(w.samples, w.resources(&client), {RunVersion::of(PromptVersion::v2_rules), 0.7});
    preds[0].rationale = "line one\nLABEL: \"calm\"";
    const auto text = predictions_to_jsonl(preds);
    const auto back = parse_predictions(text);
    EXPECT_EQ(predictions_to_jsonl(back), text);
    EXPECT_EQ(back[0].rationale, preds[0].rationale);
}

TEST(Predictions, BadLinesReportLocation) {
    try {
        parse_predictions("\n{\"schema\":\"hser.prediction/1\"}\n", "p.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SchemaError);
        EXPECT_NE(std::string(e.what()).find("p.jsonl:2"), std::string::npos);
    }
}

TEST(RunReport, CountsSourcesAndFailures) {
    World w;
    LlmEndpointConfig cfg = mock("timeout");
    LlmClient client(cfg, make_transport(cfg));
    const InferenceOptions opts{RunVersion::of(PromptVersion::v4_hybrid), 0.9};
    const auto res = run_pipeline(w.samples, w.resources(&client), opts);
    const auto& r = res.report;
    EXPECT_EQ(r.n, w.samples.size());
    EXPECT_EQ(r.per_source.at(PredictionSource::ml_direct) + r.per_source.at(PredictionSource::fallback_ml), r.n);
    EXPECT_EQ(r.routed, r.per_source.at(PredictionSource::fallback_ml));
    EXPECT_EQ(r.failures.at("timeout"), r.routed);
    ASSERT_TRUE(r.metrics.has_value());
    EXPECT_EQ(to_json(r)["schema"], "hser.run_report/1");
}

TEST(LoadSamples, MissingAudioIsManifestError) {
    Manifest m;
    m.base_dir = testutil::scratch_dir("missing_audio");
    m.entries.push_back({.sample_id = "a", .audio_path = "nope.wav"});
    try {
        load_samples(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ManifestError);
    }
}

TEST(LoadSamples, FeatureTableTakesPrecedence) {
    Manifest m;
    m.entries.push_back({.sample_id = "a", .audio_path = "nope.wav", .gold = EmotionLabel::angry});
    FeatureTable t;
    FeatureVector v;
    v[0] = 123.0;
    t.add("a", v);
    const auto s = load_samples(m, &t);
    EXPECT_EQ(s[0].features, v);
    EXPECT_EQ(s[0].gold, EmotionLabel::angry);
}

TEST(LoadTranscripts, ParsesQuotedCsv) {
    const auto dir = testutil::scratch_dir("transcripts");
    text::write_file(dir / "t.csv", "sample_id,transcript\na,\"hello, there\"\nb,calm down\n");
    const auto t = load_transcripts(dir / "t.csv");
    EXPECT_EQ(t.at("a"), "hello, there");
    EXPECT_EQ(t.at("b"), "calm down");
    text::write_file(dir / "bad.csv", "id,text\n");
    EXPECT_THROW(load_transcripts(dir / "bad.csv"), Error);
}
