// hser: command-line front end for the hybrid speech-emotion pipeline.
//
// Exit status: 0 success, 1 configuration error, 2 data error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hser/hser.hpp"

namespace fs = std::filesystem;
using namespace hser;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;

/// Every option of the chosen subcommand with its effective value, so a run
/// can be repeated from its report alone.
nlohmann::ordered_json resolved_config(const CLI::App* sub) {
    nlohmann::ordered_json j;
    j["command"] = sub->get_name();
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string& name = opt->get_lnames().front();
        if (name == "help") continue;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            if (opt->get_type_size() == 0) j[name] = true;  // flag
            else if (res.size() == 1) j[name] = res.front();
            else j[name] = res;
        } else {
            j[name] = opt->get_default_str();
        }
    }
    return j;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) { text::write_file(path, j.dump(2) + "\n"); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& part : text::split_csv_line(s))
        if (!text::trim(part).empty()) out.push_back(text::trim(part));
    return out;
}

/// Manifest rows in the named splits ("all" keeps everything).
Manifest select_splits(const Manifest& m, const std::string& splits) {
    if (splits == "all") return m;
    std::set<Split> wanted;
    for (const auto& name : split_list(splits)) {
        const auto s = parse_split(name);
        if (!s) throw Error(ErrorKind::ConfigError, "unknown split '" + name + "'");
        wanted.insert(*s);
    }
    Manifest out;
    out.base_dir = m.base_dir;
    for (const auto& e : m.entries)
        if (wanted.count(e.split)) out.entries.push_back(e);
    if (out.entries.empty()) throw Error(ErrorKind::ManifestError, "no manifest rows in split(s) " + splits);
    return out;
}

struct EndpointArgs {
    LlmEndpointConfig cfg;
    std::string cache_dir;

    void add(CLI::App* app) {
        app->add_option("--endpoint", cfg.base_url,
                        "OpenAI-compatible base URL, or mock://rules-literal | mock://timeout | mock://unavailable")
            ->capture_default_str();
        app->add_option("--model-name", cfg.model_name, "Model name sent to the endpoint")->capture_default_str();
        app->add_option("--api-key-env", cfg.api_key_env, "Environment variable holding the API key")->capture_default_str();
        app->add_option("--timeout", cfg.timeout_s, "Per-request timeout in seconds")->capture_default_str();
        app->add_option("--max-retries", cfg.max_retries, "Retries on timeouts, 429 and 5xx")->capture_default_str();
        app->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent LLM requests")->capture_default_str();
        app->add_option("--temperature", cfg.temperature, "Sampling temperature")->capture_default_str();
        app->add_option("--backoff", cfg.backoff_initial_s, "Initial retry backoff in seconds")->capture_default_str();
        app->add_option("--cache-dir", cache_dir, "Response cache directory (empty disables caching)")->capture_default_str();
    }

    std::unique_ptr<LlmClient> client() const {
        std::optional<ResponseCache> cache;
        if (!cache_dir.empty()) cache.emplace(cache_dir);
        return std::make_unique<LlmClient>(cfg, make_transport(cfg), std::move(cache));
    }
};

struct FeatureArgs {
    FeatureOptions opts;
    void add(CLI::App* app) {
        app->add_option("--frame-ms", opts.frame_ms, "Analysis frame length")->capture_default_str();
        app->add_option("--hop-ms", opts.hop_ms, "Analysis hop")->capture_default_str();
        app->add_option("--fmin", opts.pitch.fmin, "Lowest pitch searched (Hz)")->capture_default_str();
        app->add_option("--fmax", opts.pitch.fmax, "Highest pitch searched (Hz)")->capture_default_str();
    }
};

std::vector<SampleInput> samples_for(const Manifest& manifest, const std::string& features_path, const FeatureOptions& opts) {
    std::optional<FeatureTable> table;
    if (!features_path.empty()) table = load_feature_table(features_path);
    return load_samples(manifest, table ? &*table : nullptr, opts);
}

// ---- preprocess -------------------------------------------------------------

struct PreprocessArgs {
    std::string in_dir, out_dir, source_kind = "interview";
    StandardizeOptions standardize;
    VadOptions vad;
    SegmentOptions segment;
};

int cmd_preprocess(const PreprocessArgs& a, const CLI::App* sub) {
    const auto kind = parse_source_kind(a.source_kind);
    if (!kind) throw Error(ErrorKind::ConfigError, "unknown source kind '" + a.source_kind + "'");
    if (!fs::is_directory(a.in_dir)) throw Error(ErrorKind::ConfigError, "input directory not found: " + a.in_dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(a.in_dir))
        if (entry.is_regular_file() && text::to_lower(entry.path().extension().string()) == ".wav")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<ManifestEntry> entries;
    nlohmann::ordered_json failures = nlohmann::ordered_json::array();
    std::size_t degenerate = 0;
    for (const auto& file : files) {
        try {
            auto signal = load_audio(file);
            signal.source_id = file.stem().string();
            const auto std_signal = standardize(signal, a.standardize);
            if (std_signal.degenerate) {
                ++degenerate;
                continue;
            }
            const auto intervals = detect_voice_activity(std_signal, a.vad);
            const auto segments = hser::segment(std_signal, intervals, a.segment);
            for (std::size_t i = 0; i < segments.size(); ++i) {
                const auto& seg = segments[i];
                ManifestEntry e;
                e.sample_id = seg.id(i);
                e.audio_path = "segments/" + e.sample_id + ".wav";
                e.source_kind = *kind;
                e.duration_s = seg.duration_seconds;
                save_wav16(fs::path(a.out_dir) / e.audio_path, seg.signal);
                entries.push_back(std::move(e));
            }
        } catch (const Error& e) {
            failures.push_back({{"file", file.string()}, {"error", std::string(to_string(e.kind()))}, {"message", e.what()}});
            std::cerr << "warning: skipping " << file.string() << ": " << e.what() << "\n";
        }
    }
    save_manifest(fs::path(a.out_dir) / "manifest.csv", entries);
    nlohmann::ordered_json report;
    report["files"] = files.size();
    report["segments"] = entries.size();
    report["silent_files"] = degenerate;
    report["failures"] = failures;
    report["config"] = resolved_config(sub);
    write_json(fs::path(a.out_dir) / "preprocess_report.json", report);
    std::printf("%zu files -> %zu segments (%zu failed, %zu silent)\n", files.size(), entries.size(), failures.size(),
                degenerate);
    return 0;
}

// ---- features / train -------------------------------------------------------

struct FeaturesArgs {
    std::string manifest, out, stats_out, splits = "all", stats_splits = "set1,set2";
    FeatureArgs features;
};

int cmd_features(const FeaturesArgs& a) {
    const auto manifest = select_splits(load_manifest(a.manifest), a.splits);
    const auto samples = load_samples(manifest, nullptr, a.features.opts);
    FeatureTable table;
    for (const auto& s : samples) table.add(s.sample_id, s.features);
    save_feature_table(a.out, table);
    std::printf("wrote %zu feature vectors to %s\n", table.size(), a.out.c_str());
    if (!a.stats_out.empty()) {
        const auto ids = select_splits(manifest, a.stats_splits);
        std::set<std::string> keep;
        for (const auto& e : ids.entries) keep.insert(e.sample_id);
        std::vector<FeatureVector> vs;
        for (const auto& s : samples)
            if (keep.count(s.sample_id)) vs.push_back(s.features);
        save_corpus_stats(a.stats_out, fit_corpus_stats(vs));
        std::printf("wrote corpus statistics over %zu samples to %s\n", vs.size(), a.stats_out.c_str());
    }
    return 0;
}

struct TrainArgs {
    std::string manifest, features, model_out, stats_out, splits = "set1,set2";
    TrainOptions train;
    FeatureArgs feature_opts;
};

int cmd_train(const TrainArgs& a) {
    const auto manifest = select_splits(load_manifest(a.manifest), a.splits);
    const auto samples = samples_for(manifest, a.features, a.feature_opts.opts);
    std::vector<FeatureVector> X;
    std::vector<EmotionLabel> y;
    for (const auto& s : samples) {
        if (!s.gold) throw Error(ErrorKind::MissingGold, "training sample '" + s.sample_id + "' has no gold label");
        X.push_back(s.features);
        y.push_back(*s.gold);
    }
    const auto model = train(X, y, a.train);
    save_model(a.model_out, model);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < X.size(); ++i) correct += predict(model, X[i]).label == y[i] ? 1 : 0;
    std::printf("trained on %zu samples, training accuracy %.4f\n", X.size(),
                static_cast<double>(correct) / static_cast<double>(X.size()));
    for (const auto& h : model.heads)
        if (!h.converged) std::printf("note: %s head hit the iteration cap\n", std::string(to_string(h.label)).c_str());
    if (!a.stats_out.empty()) {
        save_corpus_stats(a.stats_out, fit_corpus_stats(X));
        std::printf("wrote corpus statistics to %s\n", a.stats_out.c_str());
    }
    return 0;
}

// ---- predict / evaluate -----------------------------------------------------

struct PredictArgs {
    std::string manifest, features, model, stats, rules, transcripts, out, report, splits = "all";
    std::string version = "v4_hybrid";
    double tau = 0.7;
    EndpointArgs endpoint;
    FeatureArgs feature_opts;
};

int cmd_predict(const PredictArgs& a, const CLI::App* sub) {
    const auto version = parse_run_version(a.version);
    if (!version) throw Error(ErrorKind::ConfigError, "unknown version '" + a.version + "'");
    check_tau(a.tau);
    const auto manifest = select_splits(load_manifest(a.manifest), a.splits);
    auto samples = samples_for(manifest, a.features, a.feature_opts.opts);
    if (version->kind == RunVersion::Kind::text_baseline) {
        if (a.transcripts.empty()) throw Error(ErrorKind::ConfigError, "text_baseline needs --transcripts");
        const auto transcripts = load_transcripts(a.transcripts);
        for (auto& s : samples)
            if (auto it = transcripts.find(s.sample_id); it != transcripts.end()) s.transcript = it->second;
    }
    std::optional<SvmModel> model;
    std::optional<CorpusStats> stats;
    std::optional<RuleSet> rules;
    if (!a.model.empty()) model = load_model(a.model);
    if (!a.stats.empty()) stats = load_corpus_stats(a.stats);
    if (!a.rules.empty()) rules = load_rules(a.rules);
    std::unique_ptr<LlmClient> client;
    if (version->kind != RunVersion::Kind::ml_only) client = a.endpoint.client();

    const InferenceResources res{model ? &*model : nullptr, rules ? &*rules : nullptr, stats ? &*stats : nullptr,
                                 client.get()};
    const auto result = run_pipeline(samples, res, {*version, a.tau});
    save_predictions(a.out, result.predictions);
    auto report = to_json(result.report);
    report["config"] = resolved_config(sub);
    if (!a.report.empty()) write_json(a.report, report);
    std::printf("%s: %zu samples, %zu routed to the LLM (%.1f%%), %zu cache hits\n", result.report.version.c_str(),
                result.report.n, result.report.routed, 100.0 * result.report.routed_fraction(), result.report.cache_hits);
    for (const auto& [src, count] : result.report.per_source)
        if (count) std::printf("  %-16s %zu\n", std::string(to_string(src)).c_str(), count);
    if (result.report.metrics)
        std::printf("accuracy %.4f  macro-F1 %.4f\n", result.report.metrics->accuracy, result.report.metrics->macro_f1);
    return 0;
}

std::map<std::string, EmotionLabel> gold_map(const Manifest& m) {
    std::map<std::string, EmotionLabel> gold;
    for (const auto& e : m.entries)
        if (e.gold) gold[e.sample_id] = *e.gold;
    return gold;
}

struct EvaluateArgs {
    std::string predictions, manifest, out;
};

int cmd_evaluate(const EvaluateArgs& a) {
    const auto preds = load_predictions(a.predictions);
    const auto manifest = load_manifest(a.manifest);
    auto gold = gold_map(manifest);
    std::map<std::string, EmotionLabel> used;
    for (const auto& p : preds) {
        const auto it = gold.find(p.sample_id);
        if (it == gold.end()) throw Error(ErrorKind::IdMismatch, "no gold label for '" + p.sample_id + "'");
        used.insert(*it);
    }
    const auto cm = confusion_matrix(preds, used);
    const auto report = metrics_from_confusion(cm);
    const std::string version = preds.empty() ? "unknown" : preds.front().version;
    std::printf("%s", compare_report({{version, report}}).table.c_str());
    std::printf("\nconfusion (rows gold, columns predicted: angry calm panic)\n");
    for (auto g : kAllLabels) {
        std::printf("  %-6s", std::string(to_string(g)).c_str());
        for (auto p : kAllLabels) std::printf(" %5ld", cm.counts[index_of(g)][index_of(p)]);
        std::printf("\n");
    }
    if (!a.out.empty()) write_json(a.out, to_json(report));
    return 0;
}

// ---- kappa ------------------------------------------------------------------

std::string kappa_text(const std::optional<double>& k) { return k ? text::format("%.4f", *k) : "UNDEFINED"; }

int cmd_kappa(const std::string& path, const std::string& out) {
    std::vector<AnnotationRow> rows;
    const auto contents = text::read_file(path);
    const auto header = text::split_csv_line(text::trim(contents.substr(0, contents.find('\n'))));
    if (std::find(header.begin(), header.end(), "audio_path") != header.end()) {
        for (const auto& e : parse_manifest_csv(contents, path)) {
            if (!e.annotators[0] || !e.annotators[1] || !e.annotators[2]) continue;
            rows.push_back({e.sample_id, {*e.annotators[0], *e.annotators[1], *e.annotators[2]}});
        }
    } else {
        rows = parse_annotations(contents, path);
    }
    const auto rep = agreement(rows);
    std::printf("items %ld (no majority: %ld)\n", rep.items, rep.no_majority);
    std::printf("Fleiss kappa      %s\n", kappa_text(rep.fleiss).c_str());
    std::printf("Cohen A-B         %s\n", kappa_text(rep.ab).c_str());
    std::printf("Cohen A-C         %s\n", kappa_text(rep.ac).c_str());
    std::printf("Cohen B-C         %s\n", kappa_text(rep.bc).c_str());
    std::printf("Average pairwise  %s\n", kappa_text(rep.average_pairwise).c_str());
    const char* names[3] = {"A", "B", "C"};
    std::printf("\nAnnotator  Overall   angry    calm   panic\n");
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& acc = rep.annotators[i];
        std::printf("%-9s %7.1f%%", names[i], 100.0 * acc.overall);
        for (const auto& pc : acc.per_class)
            std::printf(" %7s", pc ? text::format("%.1f%%", 100.0 * *pc).c_str() : "-");
        std::printf("\n");
    }
    if (!out.empty()) {
        nlohmann::ordered_json j;
        auto kj = [](const std::optional<double>& k) { return k ? nlohmann::ordered_json(*k) : nlohmann::ordered_json("UNDEFINED"); };
        j["items"] = rep.items;
        j["no_majority"] = rep.no_majority;
        j["fleiss"] = kj(rep.fleiss);
        j["cohen"] = {{"ab", kj(rep.ab)}, {"ac", kj(rep.ac)}, {"bc", kj(rep.bc)}};
        j["average_pairwise"] = kj(rep.average_pairwise);
        for (std::size_t i = 0; i < 3; ++i) j["annotators"][names[i]] = rep.annotators[i].overall;
        write_json(out, j);
    }
    return 0;
}

// ---- refine -----------------------------------------------------------------

struct RefineProposeArgs {
    std::string predictions, manifest, features, stats, rules, out, report;
    std::size_t min_support = 5;
    FeatureArgs feature_opts;
};

int cmd_refine_propose(const RefineProposeArgs& a) {
    const auto preds = load_predictions(a.predictions);
    const auto manifest = load_manifest(a.manifest);
    const auto stats = load_corpus_stats(a.stats);
    const auto rules = load_rules(a.rules);
    std::set<std::string> wanted;
    for (const auto& p : preds) wanted.insert(p.sample_id);
    Manifest subset;
    subset.base_dir = manifest.base_dir;
    for (const auto& e : manifest.entries)
        if (wanted.count(e.sample_id)) subset.entries.push_back(e);
    const auto samples = samples_for(subset, a.features, a.feature_opts.opts);
    std::map<std::string, const SampleInput*> by_id;
    for (const auto& s : samples) by_id[s.sample_id] = &s;

    std::vector<LabeledSample> errors, correct;
    for (const auto& p : preds) {
        const auto it = by_id.find(p.sample_id);
        if (it == by_id.end() || !it->second->gold)
            throw Error(ErrorKind::IdMismatch, "no gold label for '" + p.sample_id + "'");
        LabeledSample ls{p.sample_id, it->second->features, *it->second->gold, p.label};
        (ls.gold == ls.predicted ? correct : errors).push_back(std::move(ls));
    }
    const auto patterns = mine_error_patterns(errors, correct, stats, a.min_support);
    const auto proposals = propose_rules(patterns, rules.version);
    save_proposals(a.out, proposals);
    const auto report = refinement_report_text(patterns, proposals);
    std::printf("%s", report.c_str());
    if (!a.report.empty()) {
        text::write_file(a.report, report);
        nlohmann::ordered_json j;
        j["patterns"] = nlohmann::ordered_json::array();
        for (const auto& p : patterns) j["patterns"].push_back(to_json(p));
        j["proposals"] = proposals_to_json(proposals)["proposals"];
        write_json(fs::path(a.report).replace_extension(".json"), j);
    }
    std::printf("\nEdit %s and set \"status\" to \"accepted\" for the rules to keep, then run `hser refine apply`.\n",
                a.out.c_str());
    return 0;
}

int cmd_refine_apply(const std::string& rules, const std::string& proposals) {
    const auto out = apply_refinement_files(rules, proposals);
    const auto next = load_rules(out);
    std::printf("wrote rule set version %d (%zu rules) to %s\n", next.version, next.rules.size(), out.string().c_str());
    return 0;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
    std::string out_dir;
    SynthRecipe recipe;
    bool planted = false;
    std::uint64_t split_seed = 1;
    std::vector<double> fractions{0.2555, 0.2500, 0.2518, 0.2427};
    bool write_transcripts = false;
};

int cmd_synth(SynthArgs a) {
    if (a.planted) {
        const auto base = a.recipe;
        a.recipe = planted_error_recipe(base.seed, base.n_per_class, base.overlap);
        a.recipe.duration_s = base.duration_s;
        a.recipe.annotator_error_rate = base.annotator_error_rate;
    }
    if (a.recipe.overlap < 0.0 || a.recipe.overlap > 1.0) throw Error(ErrorKind::ConfigError, "overlap must lie in [0, 1]");
    if (a.recipe.n_per_class < 0) throw Error(ErrorKind::ConfigError, "n-per-class must be non-negative");
    if (a.fractions.size() != 4) throw Error(ErrorKind::ConfigError, "--fractions takes four values");
    auto entries = generate_synthetic_corpus(a.recipe, a.out_dir);
    if (!entries.empty()) {
        SplitFractions f;
        std::copy(a.fractions.begin(), a.fractions.end(), f.values.begin());
        entries = stratified_split(std::move(entries), f, a.split_seed);
        save_manifest(fs::path(a.out_dir) / "manifest.csv", entries);
    }
    if (a.write_transcripts) {
        // Neutral placeholder text: the tone corpus carries no lexical cues.
        std::string csv = "sample_id,transcript\n";
        for (const auto& e : entries) csv += e.sample_id + ",\"Xin chao, toi dang goi ve chuyen hom nay.\"\n";
        text::write_file(fs::path(a.out_dir) / "transcripts.csv", csv);
    }
    std::printf("wrote %zu samples to %s\n", entries.size(), a.out_dir.c_str());
    return 0;
}

struct SplitArgs {
    std::string manifest, out;
    std::uint64_t seed = 1;
    std::vector<double> fractions{0.2555, 0.2500, 0.2518, 0.2427};
};

int cmd_split(const SplitArgs& a) {
    auto m = load_manifest(a.manifest);
    if (a.fractions.size() != 4) throw Error(ErrorKind::ConfigError, "--fractions takes four values");
    SplitFractions f;
    std::copy(a.fractions.begin(), a.fractions.end(), f.values.begin());
    const auto entries = stratified_split(m.entries, f, a.seed);
    save_manifest(a.out.empty() ? fs::path(a.manifest) : fs::path(a.out), entries);
    std::map<Split, std::size_t> counts;
    for (const auto& e : entries) ++counts[e.split];
    for (auto s : kAssignedSplits) std::printf("%-5s %zu\n", std::string(to_string(s)).c_str(), counts[s]);
    return 0;
}

// ---- compare / sweep --------------------------------------------------------

struct CompareArgs {
    std::string manifest, features, model, stats, rules, refined_rules, auto_rules, out_dir, splits = "test";
    double tau = 0.7;
    EndpointArgs endpoint;
    FeatureArgs feature_opts;
};

int cmd_compare(const CompareArgs& a, const CLI::App* sub) {
    check_tau(a.tau);
    const auto manifest = select_splits(load_manifest(a.manifest), a.splits);
    const auto samples = samples_for(manifest, a.features, a.feature_opts.opts);
    const auto model = load_model(a.model);
    const auto stats = load_corpus_stats(a.stats);
    const auto human = load_rules(a.rules);
    std::optional<RuleSet> refined, auto_rules;
    if (!a.refined_rules.empty()) refined = load_rules(a.refined_rules);
    if (!a.auto_rules.empty()) auto_rules = load_rules(a.auto_rules);
    auto client = a.endpoint.client();

    ComparisonInputs in;
    in.samples = &samples;
    in.model = &model;
    in.stats = &stats;
    in.human_rules = &human;
    in.refined_rules = refined ? &*refined : nullptr;
    in.auto_rules = auto_rules ? &*auto_rules : nullptr;
    in.client = client.get();
    in.tau = a.tau;
    const auto result = run_comparison(in);

    const fs::path out(a.out_dir);
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& run : result.runs) {
        const std::string tag = to_string(run.version);
        save_predictions(out / ("predictions_" + tag + ".jsonl"), run.result.predictions);
        runs.push_back(to_json(run.result.report));
    }
    save_rules(out / "auto_rules.json", result.auto_rules);
    nlohmann::ordered_json report;
    report["schema"] = "hser.compare/1";
    report["table"] = result.report.json;
    report["runs"] = runs;
    report["auto_rule_warnings"] = result.auto_rule_warnings;
    report["config"] = resolved_config(sub);
    write_json(out / "compare.json", report);
    text::write_file(out / "compare.txt", result.report.table);
    std::printf("%s", result.report.table.c_str());
    return 0;
}

struct SweepArgs {
    std::string manifest, features, model, stats, rules, out, splits = "test";
    std::vector<double> taus = default_tau_grid();
    EndpointArgs endpoint;
    FeatureArgs feature_opts;
};

int cmd_sweep(const SweepArgs& a, const CLI::App* sub) {
    for (double t : a.taus) check_tau(t);
    const auto manifest = select_splits(load_manifest(a.manifest), a.splits);
    const auto samples = samples_for(manifest, a.features, a.feature_opts.opts);
    const auto model = load_model(a.model);
    const auto stats = load_corpus_stats(a.stats);
    const auto rules = load_rules(a.rules);
    auto client = a.endpoint.client();
    const auto points = sweep_tau(samples, {&model, &rules, &stats, client.get()}, a.taus);
    nlohmann::ordered_json j;
    j["schema"] = "hser.sweep/1";
    j["points"] = nlohmann::ordered_json::array();
    std::printf("%6s %8s %8s %8s\n", "tau", "routed", "acc", "F1");
    for (const auto& p : points) {
        j["points"].push_back(to_json(p.report));
        std::printf("%6.2f %7.1f%% %8.4f %8.4f\n", p.tau, 100.0 * p.report.routed_fraction(),
                    p.report.metrics ? p.report.metrics->accuracy : 0.0, p.report.metrics ? p.report.metrics->macro_f1 : 0.0);
    }
    j["config"] = resolved_config(sub);
    if (!a.out.empty()) write_json(a.out, j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid speech emotion recognition: acoustic classifier + rule-guided LLM reasoning"};
    app.set_config("--config", "", "INI/TOML file with option values; command-line flags take precedence");
    app.require_subcommand(1);

    PreprocessArgs pre;
    auto* c_pre = app.add_subcommand("preprocess", "Standardize, voice-detect and segment a directory of WAV files");
    c_pre->add_option("--in-dir", pre.in_dir, "Directory with source WAV files")->required();
    c_pre->add_option("--out-dir", pre.out_dir, "Output directory for segments and manifest.csv")->required();
    c_pre->add_option("--source-kind", pre.source_kind, "movie | entertainment | interview | synthetic")->capture_default_str();
    c_pre->add_option("--target-rate", pre.standardize.target_rate, "Output sample rate")->capture_default_str();
    c_pre->add_option("--energy-floor-db", pre.vad.energy_floor_db, "VAD threshold relative to the loudest frame")
        ->capture_default_str();
    c_pre->add_option("--hangover", pre.vad.hangover_frames, "VAD gap bridging in frames")->capture_default_str();
    c_pre->add_option("--min-seg-s", pre.segment.min_len_s, "Drop segments shorter than this")->capture_default_str();
    c_pre->add_option("--max-seg-s", pre.segment.max_len_s, "Split segments longer than this")->capture_default_str();

    FeaturesArgs feat;
    auto* c_feat = app.add_subcommand("features", "Extract the 37-dimensional feature vector for manifest rows");
    c_feat->add_option("--manifest", feat.manifest, "Manifest (.csv or .jsonl)")->required();
    c_feat->add_option("--out", feat.out, "Feature table CSV")->required();
    c_feat->add_option("--splits", feat.splits, "Comma-separated splits to process, or all")->capture_default_str();
    c_feat->add_option("--stats-out", feat.stats_out, "Also write corpus statistics");
    c_feat->add_option("--stats-splits", feat.stats_splits, "Splits the statistics are fitted on")->capture_default_str();
    feat.features.add(c_feat);

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train the calibrated one-vs-rest linear SVM");
    c_train->add_option("--manifest", tr.manifest, "Manifest with gold labels")->required();
    c_train->add_option("--features", tr.features, "Precomputed feature table (optional)");
    c_train->add_option("--splits", tr.splits, "Training splits")->capture_default_str();
    c_train->add_option("--model-out", tr.model_out, "Model JSON")->required();
    c_train->add_option("--stats-out", tr.stats_out, "Corpus statistics fitted on the training rows");
    c_train->add_option("--C", tr.train.C, "SVM box constraint")->capture_default_str();
    c_train->add_option("--tol", tr.train.tol, "SMO stopping tolerance")->capture_default_str();
    c_train->add_option("--max-passes", tr.train.max_passes, "Iteration cap in passes over the data")->capture_default_str();
    c_train->add_option("--seed", tr.train.seed, "Training seed")->capture_default_str();
    tr.feature_opts.add(c_train);

    PredictArgs pr;
    auto* c_pred = app.add_subcommand("predict", "Run one pipeline version over a manifest");
    c_pred->add_option("--manifest", pr.manifest, "Manifest")->required();
    c_pred->add_option("--features", pr.features, "Precomputed feature table (optional)");
    c_pred->add_option("--splits", pr.splits, "Splits to predict, or all")->capture_default_str();
    c_pred->add_option("--model", pr.model, "Model JSON (ml_only, v4_hybrid)");
    c_pred->add_option("--stats", pr.stats, "Corpus statistics (prompt versions)");
    c_pred->add_option("--rules", pr.rules, "Rule set JSON (v2, v3, v4, v5)");
    c_pred->add_option("--version", pr.version, "ml_only | v1_basic | v2_rules | v3_refined | v4_hybrid | v5_auto | text_baseline")
        ->capture_default_str();
    c_pred->add_option("--tau", pr.tau, "Routing threshold in [0, 1.01]")->capture_default_str();
    c_pred->add_option("--transcripts", pr.transcripts, "sample_id,transcript CSV for text_baseline");
    c_pred->add_option("--out", pr.out, "Predictions JSONL")->required();
    c_pred->add_option("--report", pr.report, "Run report JSON");
    pr.endpoint.add(c_pred);
    pr.feature_opts.add(c_pred);

    EvaluateArgs ev;
    auto* c_eval = app.add_subcommand("evaluate", "Score a predictions file against manifest gold labels");
    c_eval->add_option("--predictions", ev.predictions, "Predictions JSONL")->required();
    c_eval->add_option("--manifest", ev.manifest, "Manifest with gold labels")->required();
    c_eval->add_option("--out", ev.out, "Metrics JSON");

    std::string kappa_in, kappa_out;
    auto* c_kappa = app.add_subcommand("kappa", "Inter-annotator agreement and annotator accuracy");
    c_kappa->add_option("--annotations", kappa_in, "CSV sample_id,annotator_a,annotator_b,annotator_c (or a manifest)")
        ->required();
    c_kappa->add_option("--out", kappa_out, "JSON report");

    auto* c_refine = app.add_subcommand("refine", "Mine error patterns and manage rule-set versions");
    c_refine->require_subcommand(1);
    RefineProposeArgs rp;
    auto* c_propose = c_refine->add_subcommand("propose", "Write candidate rules for review");
    c_propose->add_option("--predictions", rp.predictions, "Predictions JSONL")->required();
    c_propose->add_option("--manifest", rp.manifest, "Manifest with gold labels")->required();
    c_propose->add_option("--features", rp.features, "Precomputed feature table (optional)");
    c_propose->add_option("--stats", rp.stats, "Corpus statistics")->required();
    c_propose->add_option("--rules", rp.rules, "Current rule set")->required();
    c_propose->add_option("--min-support", rp.min_support, "Minimum errors per confusion pair")->capture_default_str();
    c_propose->add_option("--out", rp.out, "Proposals JSON")->required();
    c_propose->add_option("--report", rp.report, "Text report (a .json twin is written alongside)");
    rp.feature_opts.add(c_propose);
    std::string ra_rules, ra_proposals;
    auto* c_apply = c_refine->add_subcommand("apply", "Append accepted proposals as the next rule-set version");
    c_apply->add_option("--rules", ra_rules, "Current rule set")->required();
    c_apply->add_option("--proposals", ra_proposals, "Reviewed proposals JSON")->required();

    SynthArgs sy;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic tone-complex corpus with stratified splits");
    c_synth->add_option("--out-dir", sy.out_dir, "Output directory")->required();
    c_synth->add_option("--n-per-class", sy.recipe.n_per_class, "Samples per class")->capture_default_str();
    c_synth->add_option("--overlap", sy.recipe.overlap, "Fraction of angry/panic samples from blended recipes")
        ->capture_default_str();
    c_synth->add_option("--seed", sy.recipe.seed, "Generator seed")->capture_default_str();
    c_synth->add_option("--duration", sy.recipe.duration_s, "Seconds per sample")->capture_default_str();
    c_synth->add_option("--annotator-error", sy.recipe.annotator_error_rate, "Simulated annotator error rate")
        ->capture_default_str();
    c_synth->add_flag("--planted", sy.planted, "Use the planted-error recipe (panic mistaken for angry by pitch variability)");
    c_synth->add_option("--split-seed", sy.split_seed, "Seed for the stratified split")->capture_default_str();
    c_synth->add_option("--fractions", sy.fractions, "set1 set2 set3 test fractions")->expected(4);
    c_synth->add_flag("--transcripts", sy.write_transcripts, "Also write placeholder transcripts.csv");

    SplitArgs sp;
    auto* c_split = app.add_subcommand("split", "Assign stratified set1/set2/set3/test splits");
    c_split->add_option("--manifest", sp.manifest, "Manifest with gold labels")->required();
    c_split->add_option("--out", sp.out, "Output manifest (defaults to rewriting the input)");
    c_split->add_option("--seed", sp.seed, "Split seed")->capture_default_str();
    c_split->add_option("--fractions", sp.fractions, "set1 set2 set3 test fractions")->expected(4);

    CompareArgs cmp;
    auto* c_cmp = app.add_subcommand("compare", "Run ml_only and v1-v5 and print the comparison table");
    c_cmp->add_option("--manifest", cmp.manifest, "Manifest")->required();
    c_cmp->add_option("--features", cmp.features, "Precomputed feature table (optional)");
    c_cmp->add_option("--splits", cmp.splits, "Evaluation splits")->capture_default_str();
    c_cmp->add_option("--model", cmp.model, "Model JSON")->required();
    c_cmp->add_option("--stats", cmp.stats, "Corpus statistics")->required();
    c_cmp->add_option("--rules", cmp.rules, "Human rule set (v2)")->required();
    c_cmp->add_option("--refined-rules", cmp.refined_rules, "Refined rule set (v3, v4); defaults to --rules");
    c_cmp->add_option("--auto-rules", cmp.auto_rules, "Rule set for v5; generated by the endpoint when omitted");
    c_cmp->add_option("--tau", cmp.tau, "Routing threshold for v4")->capture_default_str();
    c_cmp->add_option("--out-dir", cmp.out_dir, "Directory for predictions and reports")->required();
    cmp.endpoint.add(c_cmp);
    cmp.feature_opts.add(c_cmp);

    SweepArgs sw;
    auto* c_sweep = app.add_subcommand("sweep", "Run v4 over a grid of routing thresholds");
    c_sweep->add_option("--manifest", sw.manifest, "Manifest")->required();
    c_sweep->add_option("--features", sw.features, "Precomputed feature table (optional)");
    c_sweep->add_option("--splits", sw.splits, "Evaluation splits")->capture_default_str();
    c_sweep->add_option("--model", sw.model, "Model JSON")->required();
    c_sweep->add_option("--stats", sw.stats, "Corpus statistics")->required();
    c_sweep->add_option("--rules", sw.rules, "Rule set")->required();
    c_sweep->add_option("--taus", sw.taus, "Thresholds")->capture_default_str();
    c_sweep->add_option("--out", sw.out, "Sweep JSON");
    sw.endpoint.add(c_sweep);
    sw.feature_opts.add(c_sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (c_pre->parsed()) return cmd_preprocess(pre, c_pre);
        if (c_feat->parsed()) return cmd_features(feat);
        if (c_train->parsed()) return cmd_train(tr);
        if (c_pred->parsed()) return cmd_predict(pr, c_pred);
        if (c_eval->parsed()) return cmd_evaluate(ev);
        if (c_kappa->parsed()) return cmd_kappa(kappa_in, kappa_out);
        if (c_propose->parsed()) return cmd_refine_propose(rp);
        if (c_apply->parsed()) return cmd_refine_apply(ra_rules, ra_proposals);
        if (c_synth->parsed()) return cmd_synth(sy);
        if (c_split->parsed()) return cmd_split(sp);
        if (c_cmp->parsed()) return cmd_compare(cmp, c_cmp);
        if (c_sweep->parsed()) return cmd_sweep(sw, c_sweep);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::ConfigError ? kExitConfig : kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
