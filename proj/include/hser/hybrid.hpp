#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hser/audio_io.hpp"
#include "hser/classifier.hpp"
#include "hser/corpus.hpp"
#include "hser/describe.hpp"
#include "hser/error.hpp"
#include "hser/eval.hpp"
#include "hser/feature_io.hpp"
#include "hser/features.hpp"
#include "hser/label.hpp"
#include "hser/reasoning/llm_client.hpp"
#include "hser/reasoning/prompt.hpp"
#include "hser/reasoning/rules.hpp"
#include "hser/text.hpp"
#include "hser/wav.hpp"

namespace hser {

// ---- Run versions ---------------------------------------------------------

/// What produced a predictions file: the classifier alone, one of the prompt
/// versions, or the transcript-only baseline.
struct RunVersion {
    enum class Kind { ml_only, prompt, text_baseline };
    Kind kind = Kind::prompt;
    PromptVersion prompt = PromptVersion::v4_hybrid;

    static RunVersion ml_only() { return {Kind::ml_only, PromptVersion::v4_hybrid}; }
    static RunVersion text_baseline() { return {Kind::text_baseline, PromptVersion::v1_basic}; }
    static RunVersion of(PromptVersion v) { return {Kind::prompt, v}; }

    bool is_hybrid() const { return kind == Kind::prompt && prompt == PromptVersion::v4_hybrid; }
    bool operator==(const RunVersion&) const = default;
};

inline std::string to_string(const RunVersion& v) {
    switch (v.kind) {
        case RunVersion::Kind::ml_only: return "ml_only";
        case RunVersion::Kind::text_baseline: return "text_baseline";
        case RunVersion::Kind::prompt: return std::string(to_string(v.prompt));
    }
    return "ml_only";
}

inline std::optional<RunVersion> parse_run_version(std::string_view s) {
    if (s == "ml_only") return RunVersion::ml_only();
    if (s == "text_baseline") return RunVersion::text_baseline();
    if (auto p = parse_prompt_version(s)) return RunVersion::of(*p);
    return std::nullopt;
}

// ---- Routing --------------------------------------------------------------

enum class RoutePath { direct, reason };

struct RoutingDecision {
    RoutePath path = RoutePath::direct;
    double confidence = 0.0;
    double threshold = 0.0;
};

inline constexpr double kMaxTau = 1.01;

inline void check_tau(double tau) {
    if (!(tau >= 0.0 && tau <= kMaxTau))
        throw Error(ErrorKind::ConfigError, text::format("tau must lie in [0, %.2f], got %g", kMaxTau, tau));
}

/// Direct when the calibrated confidence reaches tau. Any tau above 1 sends
/// every sample to the reasoning path.
inline RoutingDecision route(const MlEvidence& ml, double tau) {
    check_tau(tau);
    return {ml.confidence >= tau ? RoutePath::direct : RoutePath::reason, ml.confidence, tau};
}

// ---- Predictions ----------------------------------------------------------

enum class PredictionSource { ml_direct, llm_reasoned, fallback_ml, fallback_rule, fallback_default };

inline constexpr std::array<PredictionSource, 5> kAllSources{PredictionSource::ml_direct, PredictionSource::llm_reasoned,
                                                             PredictionSource::fallback_ml, PredictionSource::fallback_rule,
                                                             PredictionSource::fallback_default};

constexpr std::string_view to_string(PredictionSource s) {
    switch (s) {
        case PredictionSource::ml_direct: return "ml_direct";
        case PredictionSource::llm_reasoned: return "llm_reasoned";
        case PredictionSource::fallback_ml: return "fallback_ml";
        case PredictionSource::fallback_rule: return "fallback_rule";
        case PredictionSource::fallback_default: return "fallback_default";
    }
    return "fallback_default";
}

inline std::optional<PredictionSource> parse_prediction_source(std::string_view s) {
    for (auto v : kAllSources)
        if (s == to_string(v)) return v;
    return std::nullopt;
}

constexpr bool is_fallback(PredictionSource s) {
    return s == PredictionSource::fallback_ml || s == PredictionSource::fallback_rule ||
           s == PredictionSource::fallback_default;
}

/// Reason codes attached to fallback predictions.
inline std::string reason_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Timeout: return "timeout";
        case ErrorKind::RateLimited: return "rate_limited";
        default: return "transport_error";
    }
}
inline constexpr std::string_view kParseFailure = "parse_failure";

struct Prediction {
    std::string sample_id;
    EmotionLabel label = EmotionLabel::calm;
    PredictionSource source = PredictionSource::ml_direct;
    std::optional<MlEvidence> ml_evidence;
    std::optional<std::string> rationale;  // raw LLM reply, verbatim
    std::string version;                   // run version tag
    double latency_ms = 0.0;
    bool routed = false;  // went to the LLM
    std::optional<std::string> reason;
    std::optional<std::string> fallback_rule_id;
    std::string cache_key;  // names the cached prompt/response pair
    bool cache_hit = false;
};

inline constexpr std::string_view kPredictionSchema = "hser.prediction/1";

inline nlohmann::ordered_json to_json(const MlEvidence& ml) {
    nlohmann::ordered_json j;
    j["label"] = to_string(ml.label);
    j["confidence"] = ml.confidence;
    nlohmann::ordered_json probs, margins;
    for (auto l : kAllLabels) {
        probs[std::string(to_string(l))] = ml.probs[index_of(l)];
        margins[std::string(to_string(l))] = ml.margins[index_of(l)];
    }
    j["probs"] = probs;
    j["margins"] = margins;
    return j;
}

inline MlEvidence ml_evidence_from_json(const nlohmann::json& j) {
    MlEvidence ml;
    ml.label = parse_label_or_throw(j.at("label").get<std::string>(), "ml_evidence.label");
    ml.confidence = j.at("confidence").get<double>();
    for (auto l : kAllLabels) {
        ml.probs[index_of(l)] = j.at("probs").at(std::string(to_string(l))).get<double>();
        ml.margins[index_of(l)] = j.at("margins").at(std::string(to_string(l))).get<double>();
    }
    return ml;
}

inline nlohmann::ordered_json to_json(const Prediction& p) {
    nlohmann::ordered_json j;
    j["schema"] = kPredictionSchema;
    j["sample_id"] = p.sample_id;
    j["label"] = to_string(p.label);
    j["source"] = to_string(p.source);
    j["version"] = p.version;
    j["routed"] = p.routed;
    j["reason"] = p.reason ? nlohmann::ordered_json(*p.reason) : nlohmann::ordered_json(nullptr);
    if (p.fallback_rule_id) j["fallback_rule"] = *p.fallback_rule_id;
    j["latency_ms"] = p.latency_ms;
    j["cache_key"] = p.cache_key;
    j["cache_hit"] = p.cache_hit;
    j["ml_evidence"] = p.ml_evidence ? to_json(*p.ml_evidence) : nlohmann::ordered_json(nullptr);
    j["rationale"] = p.rationale ? nlohmann::ordered_json(*p.rationale) : nlohmann::ordered_json(nullptr);
    return j;
}

inline Prediction prediction_from_json(const nlohmann::json& j, const std::string& where) {
    try {
        if (j.at("schema").get<std::string>() != kPredictionSchema)
            throw Error(ErrorKind::SchemaError, where + ": unsupported schema");
        Prediction p;
        p.sample_id = j.at("sample_id").get<std::string>();
        p.label = parse_label_or_throw(j.at("label").get<std::string>(), where + " (label)");
        const auto src = parse_prediction_source(j.at("source").get<std::string>());
        if (!src) throw Error(ErrorKind::SchemaError, where + ": unknown source");
        p.source = *src;
        p.version = j.at("version").get<std::string>();
        p.routed = j.value("routed", false);
        if (j.contains("reason") && j["reason"].is_string()) p.reason = j["reason"].get<std::string>();
        if (j.contains("fallback_rule")) p.fallback_rule_id = j["fallback_rule"].get<std::string>();
        p.latency_ms = j.value("latency_ms", 0.0);
        p.cache_key = j.value("cache_key", std::string{});
        p.cache_hit = j.value("cache_hit", false);
        if (j.contains("ml_evidence") && j["ml_evidence"].is_object()) p.ml_evidence = ml_evidence_from_json(j["ml_evidence"]);
        if (j.contains("rationale") && j["rationale"].is_string()) p.rationale = j["rationale"].get<std::string>();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::SchemaError, where + ": " + e.what());
    }
}

inline std::string predictions_to_jsonl(const std::vector<Prediction>& preds) {
    std::string out;
    for (const auto& p : preds) out += to_json(p).dump() + "\n";
    return out;
}

inline std::vector<Prediction> parse_predictions(const std::string& contents, const std::string& where = "predictions") {
    std::vector<Prediction> out;
    std::istringstream in(contents);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const std::string loc = where + ":" + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::SchemaError, loc + ": " + e.what());
        }
        out.push_back(prediction_from_json(j, loc));
    }
    return out;
}

inline void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& preds) {
    text::write_file(path, predictions_to_jsonl(preds));
}

inline std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    return parse_predictions(text::read_file(path), path.string());
}

// ---- Inference ------------------------------------------------------------

/// Shared, read-only inputs for a run. Pointers may be null when the version
/// does not need them.
struct InferenceResources {
    const SvmModel* model = nullptr;
    const RuleSet* rules = nullptr;
    const CorpusStats* stats = nullptr;
    LlmClient* client = nullptr;
};

struct InferenceOptions {
    RunVersion version = RunVersion::of(PromptVersion::v4_hybrid);
    double tau = 0.7;
};

/// One sample to classify. `transcript` is only read by the text baseline.
struct SampleInput {
    std::string sample_id;
    FeatureVector features;
    std::optional<EmotionLabel> gold;
    std::optional<std::string> transcript;
};

namespace hybrid_detail {

inline void check_resources(const InferenceResources& res, const InferenceOptions& opts) {
    check_tau(opts.tau);
    const auto& v = opts.version;
    if ((v.kind == RunVersion::Kind::ml_only || v.is_hybrid()) && !res.model)
        throw Error(ErrorKind::ConfigError, to_string(v) + " needs a trained model");
    if (v.kind == RunVersion::Kind::prompt && !res.stats)
        throw Error(ErrorKind::ConfigError, to_string(v) + " needs corpus statistics");
    if (v.kind != RunVersion::Kind::ml_only && !res.client)
        throw Error(ErrorKind::ConfigError, to_string(v) + " needs an LLM endpoint");
    if (v.kind == RunVersion::Kind::prompt && v.prompt != PromptVersion::v1_basic && v.prompt != PromptVersion::v4_hybrid &&
        (!res.rules || res.rules->empty()))
        throw Error(ErrorKind::EmptyRules, to_string(v) + " needs a non-empty rule set");
}

/// Work for one sample before the LLM is consulted.
struct Pending {
    Prediction pred;
    std::optional<std::string> prompt;
    std::array<double, kFeatureDim> z{};
    bool have_z = false;
};

inline Pending prepare(const SampleInput& s, const InferenceResources& res, const InferenceOptions& opts) {
    Pending p;
    p.pred.sample_id = s.sample_id;
    p.pred.version = to_string(opts.version);
    if (res.model) p.pred.ml_evidence = predict(*res.model, s.features);
    if (res.stats) {
        p.z = res.stats->z(s.features);
        p.have_z = true;
    }
    const auto& v = opts.version;
    if (v.kind == RunVersion::Kind::ml_only) {
        p.pred.label = p.pred.ml_evidence->label;
        p.pred.source = PredictionSource::ml_direct;
        return p;
    }
    if (v.kind == RunVersion::Kind::text_baseline) {
        if (!s.transcript)
            throw Error(ErrorKind::ManifestError, "no transcript for sample '" + s.sample_id + "'");
        p.prompt = build_text_prompt(*s.transcript);
        p.pred.routed = true;
        return p;
    }
    if (v.is_hybrid() && route(*p.pred.ml_evidence, opts.tau).path == RoutePath::direct) {
        p.pred.label = p.pred.ml_evidence->label;
        p.pred.source = PredictionSource::ml_direct;
        return p;
    }
    static const RuleSet kNoRules{};
    const RuleSet& rules = res.rules ? *res.rules : kNoRules;
    const auto desc = describe(s.features, *res.stats);
    p.prompt = build_prompt(v.prompt, desc, rules,
                            v.is_hybrid() ? p.pred.ml_evidence : std::optional<MlEvidence>{});
    p.pred.routed = true;
    return p;
}

/// Degrades a failed LLM step: v4 keeps the classifier label, rule-based
/// versions use the strongest satisfied rule, everything else the default.
inline void fall_back(Pending& p, const InferenceResources& res, const InferenceOptions& opts, std::string reason) {
    p.pred.reason = std::move(reason);
    if (opts.version.is_hybrid() && p.pred.ml_evidence) {
        p.pred.label = p.pred.ml_evidence->label;
        p.pred.source = PredictionSource::fallback_ml;
        return;
    }
    const bool rule_version = opts.version.kind == RunVersion::Kind::prompt && uses_rules(opts.version.prompt);
    if (rule_version && res.rules && p.have_z) {
        if (const Rule* r = strongest_satisfied(*res.rules, p.z)) {
            p.pred.label = r->implied_label;
            p.pred.source = PredictionSource::fallback_rule;
            p.pred.fallback_rule_id = r->id;
            return;
        }
    }
    p.pred.label = EmotionLabel::calm;
    p.pred.source = PredictionSource::fallback_default;
}

inline void resolve(Pending& p, const QueryOutcome& out, const InferenceResources& res, const InferenceOptions& opts) {
    p.pred.latency_ms = out.latency_ms;
    p.pred.cache_key = out.cache_key;
    p.pred.cache_hit = out.cache_hit;
    if (!out.ok()) {
        fall_back(p, res, opts, reason_code(out.error.value_or(ErrorKind::TransportError)));
        return;
    }
    p.pred.rationale = *out.text;
    if (const auto label = parse_label(*out.text)) {
        p.pred.label = *label;
        p.pred.source = PredictionSource::llm_reasoned;
    } else {
        fall_back(p, res, opts, std::string(kParseFailure));
    }
}

}  // namespace hybrid_detail

/// Classifies a batch. LLM calls for routed samples run concurrently (bounded
/// by the client's max_in_flight); output order equals input order and
/// per-sample LLM failures never abort the batch.
inline std::vector<Prediction> infer_batch(const std::vector<SampleInput>& samples, const InferenceResources& res,
                                           const InferenceOptions& opts) {
    hybrid_detail::check_resources(res, opts);
    std::vector<hybrid_detail::Pending> pending;
    pending.reserve(samples.size());
    std::vector<LlmRequest> requests;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        pending.push_back(hybrid_detail::prepare(samples[i], res, opts));
        if (pending.back().prompt) {
            requests.push_back({samples[i].sample_id, *pending.back().prompt});
            owner.push_back(i);
        }
    }
    if (!requests.empty()) {
        const auto outcomes = res.client->query_batch(requests);
        for (std::size_t k = 0; k < outcomes.size(); ++k) hybrid_detail::resolve(pending[owner[k]], outcomes[k], res, opts);
    }
    std::vector<Prediction> out;
    out.reserve(pending.size());
    for (auto& p : pending) out.push_back(std::move(p.pred));
    return out;
}

inline Prediction infer(const SampleInput& sample, const InferenceResources& res, const InferenceOptions& opts) {
    return infer_batch({sample}, res, opts).front();
}

// ---- Manifest resolution --------------------------------------------------

/// Features for every manifest row, in manifest order: taken from `table`
/// when it has the id, else extracted from the audio file. Audio that is not
/// 16 kHz mono is downmixed and resampled without peak normalization, so
/// loudness cues survive.
inline std::vector<SampleInput> load_samples(const Manifest& manifest, const FeatureTable* table = nullptr,
                                             const FeatureOptions& opts = {}) {
    std::map<std::string, std::size_t> index;
    if (table) index = table->index();
    std::vector<SampleInput> out;
    out.reserve(manifest.size());
    for (const auto& e : manifest.entries) {
        SampleInput s;
        s.sample_id = e.sample_id;
        s.gold = e.gold;
        if (auto it = index.find(e.sample_id); it != index.end()) {
            s.features = table->vectors[it->second];
        } else {
            if (e.audio_path.empty())
                throw Error(ErrorKind::ManifestError, "sample '" + e.sample_id + "' has no features and no audio_path");
            const auto path = manifest.audio_path(e);
            if (!std::filesystem::exists(path))
                throw Error(ErrorKind::ManifestError, "audio file missing for '" + e.sample_id + "': " + path.string());
            auto signal = load_audio(path);
            if (signal.sample_rate != 16000 || signal.channels != 1) {
                StandardizeOptions so;
                so.normalize_peak = false;
                signal = standardize(signal, so);
            }
            s.features = extract_features(signal, opts);
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// sample_id,transcript CSV.
inline std::map<std::string, std::string> load_transcripts(const std::filesystem::path& path) {
    std::istringstream in(text::read_file(path));
    std::string line;
    if (!std::getline(in, line)) return {};
    const auto header = text::split_csv_line(text::trim(line));
    if (header.size() < 2 || header[0] != "sample_id" || header[1] != "transcript")
        throw Error(ErrorKind::SchemaError, path.string() + ":1: expected header sample_id,transcript");
    std::map<std::string, std::string> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto f = text::split_csv_line(line);
        if (f.size() != 2)
            throw Error(ErrorKind::SchemaError, path.string() + ":" + std::to_string(line_no) + ": expected 2 columns");
        out[text::trim(f[0])] = f[1];
    }
    return out;
}

// ---- Run reports ----------------------------------------------------------

struct RunReport {
    std::string version;
    double tau = 0.0;
    std::size_t n = 0;
    std::size_t routed = 0;
    std::map<PredictionSource, std::size_t> per_source;
    std::size_t cache_hits = 0;
    std::map<std::string, std::size_t> failures;  // reason code -> count
    std::optional<MetricsReport> metrics;         // when every sample has gold

    double routed_fraction() const { return n ? static_cast<double>(routed) / static_cast<double>(n) : 0.0; }
};

inline RunReport summarize_run(const std::vector<Prediction>& preds, const std::vector<SampleInput>& samples,
                               const InferenceOptions& opts) {
    if (preds.size() != samples.size()) throw Error(ErrorKind::LengthMismatch, "predictions and samples differ in length");
    RunReport r;
    r.version = to_string(opts.version);
    r.tau = opts.tau;
    r.n = preds.size();
    for (auto s : kAllSources) r.per_source[s] = 0;
    bool all_gold = !samples.empty();
    std::vector<EmotionLabel> predicted, gold;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        if (p.sample_id != samples[i].sample_id) throw Error(ErrorKind::IdMismatch, "prediction order differs from input");
        r.routed += p.routed ? 1 : 0;
        ++r.per_source[p.source];
        r.cache_hits += p.cache_hit ? 1 : 0;
        if (p.reason) ++r.failures[*p.reason];
        if (samples[i].gold) {
            predicted.push_back(p.label);
            gold.push_back(*samples[i].gold);
        } else {
            all_gold = false;
        }
    }
    if (all_gold) r.metrics = metrics(predicted, gold);
    return r;
}

inline nlohmann::ordered_json to_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["schema"] = "hser.run_report/1";
    j["version"] = r.version;
    j["tau"] = r.tau;
    j["n"] = r.n;
    j["routed"] = r.routed;
    j["routed_fraction"] = r.routed_fraction();
    nlohmann::ordered_json sources;
    for (const auto& [s, c] : r.per_source) sources[std::string(to_string(s))] = c;
    j["per_source"] = sources;
    j["cache_hits"] = r.cache_hits;
    nlohmann::ordered_json failures = nlohmann::ordered_json::object();
    for (const auto& [k, c] : r.failures) failures[k] = c;
    j["failures"] = failures;
    j["metrics"] = r.metrics ? to_json(*r.metrics) : nlohmann::ordered_json(nullptr);
    return j;
}

struct PipelineResult {
    std::vector<Prediction> predictions;
    RunReport report;
};

inline PipelineResult run_pipeline(const std::vector<SampleInput>& samples, const InferenceResources& res,
                                   const InferenceOptions& opts) {
    PipelineResult out;
    out.predictions = infer_batch(samples, res, opts);
    out.report = summarize_run(out.predictions, samples, opts);
    return out;
}

}  // namespace hser
