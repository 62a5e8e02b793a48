#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hser/audio_signal.hpp"
#include "hser/error.hpp"
#include "hser/label.hpp"
#include "hser/random.hpp"
#include "hser/text.hpp"
#include "hser/wav.hpp"

namespace hser {

enum class Split { set1, set2, set3, test, unassigned };
inline constexpr std::array<Split, 4> kAssignedSplits{Split::set1, Split::set2, Split::set3, Split::test};

constexpr std::string_view to_string(Split s) {
    switch (s) {
        case Split::set1: return "set1";
        case Split::set2: return "set2";
        case Split::set3: return "set3";
        case Split::test: return "test";
        case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

inline std::optional<Split> parse_split(std::string_view s) {
    if (s.empty()) return Split::unassigned;
    for (auto v : {Split::set1, Split::set2, Split::set3, Split::test, Split::unassigned})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

enum class SourceKind { movie, entertainment, interview, synthetic };

constexpr std::string_view to_string(SourceKind s) {
    switch (s) {
        case SourceKind::movie: return "movie";
        case SourceKind::entertainment: return "entertainment";
        case SourceKind::interview: return "interview";
        case SourceKind::synthetic: return "synthetic";
    }
    return "synthetic";
}

inline std::optional<SourceKind> parse_source_kind(std::string_view s) {
    for (auto v : {SourceKind::movie, SourceKind::entertainment, SourceKind::interview, SourceKind::synthetic})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

struct ManifestEntry {
    std::string sample_id;
    std::string audio_path;
    std::optional<EmotionLabel> gold;
    std::array<std::optional<EmotionLabel>, 3> annotators{};
    Split split = Split::unassigned;
    SourceKind source_kind = SourceKind::synthetic;
    double duration_s = 0.0;
};

/// A manifest plus the directory relative audio paths are resolved against.
struct Manifest {
    std::vector<ManifestEntry> entries;
    std::filesystem::path base_dir;

    std::filesystem::path audio_path(const ManifestEntry& e) const {
        const std::filesystem::path p(e.audio_path);
        return p.is_absolute() ? p : base_dir / p;
    }
    std::size_t size() const { return entries.size(); }
};

inline const std::vector<std::string>& manifest_columns() {
    static const std::vector<std::string> cols{"sample_id",   "audio_path", "gold",       "annotator_a", "annotator_b",
                                               "annotator_c", "split",      "source_kind", "duration_s"};
    return cols;
}

namespace manifest_detail {

inline std::optional<EmotionLabel> optional_label(const std::string& s, const std::string& where) {
    const auto t = text::trim(s);
    if (t.empty()) return std::nullopt;
    return parse_label_or_throw(t, where);
}

inline ManifestEntry entry_from_fields(const std::map<std::string, std::string>& f, const std::string& where) {
    ManifestEntry e;
    auto get = [&](const std::string& k) -> std::string {
        auto it = f.find(k);
        return it == f.end() ? std::string{} : text::trim(it->second);
    };
    e.sample_id = get("sample_id");
    if (e.sample_id.empty()) throw Error(ErrorKind::SchemaError, where + ": empty sample_id");
    e.audio_path = get("audio_path");
    e.gold = optional_label(get("gold"), where + " (gold)");
    e.annotators[0] = optional_label(get("annotator_a"), where + " (annotator_a)");
    e.annotators[1] = optional_label(get("annotator_b"), where + " (annotator_b)");
    e.annotators[2] = optional_label(get("annotator_c"), where + " (annotator_c)");
    const auto split = parse_split(get("split"));
    if (!split) throw Error(ErrorKind::SchemaError, where + ": unknown split '" + get("split") + "'");
    e.split = *split;
    const auto kind_text = get("source_kind");
    if (!kind_text.empty()) {
        const auto kind = parse_source_kind(kind_text);
        if (!kind) throw Error(ErrorKind::SchemaError, where + ": unknown source_kind '" + kind_text + "'");
        e.source_kind = *kind;
    }
    const auto dur = get("duration_s");
    if (!dur.empty()) {
        try {
            e.duration_s = std::stod(dur);
        } catch (const std::exception&) {
            throw Error(ErrorKind::SchemaError, where + ": bad duration_s '" + dur + "'");
        }
    }
    return e;
}

inline void check_unique(const std::vector<ManifestEntry>& entries, const std::string& where) {
    std::set<std::string> seen;
    for (const auto& e : entries)
        if (!seen.insert(e.sample_id).second)
            throw Error(ErrorKind::DuplicateId, where + ": duplicate sample_id '" + e.sample_id + "'");
}

}  // namespace manifest_detail

inline std::vector<ManifestEntry> parse_manifest_csv(const std::string& contents, const std::string& where = "manifest") {
    std::istringstream in(contents);
    std::string line;
    if (!std::getline(in, line)) return {};
    const auto header = text::split_csv_line(text::trim(line));
    for (const char* required : {"sample_id", "audio_path"})
        if (std::find(header.begin(), header.end(), required) == header.end())
            throw Error(ErrorKind::SchemaError, where + ":1: missing column " + required);
    std::vector<ManifestEntry> entries;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto fields = text::split_csv_line(line);
        const std::string loc = where + ":" + std::to_string(line_no);
        if (fields.size() != header.size())
            throw Error(ErrorKind::SchemaError, loc + ": expected " + std::to_string(header.size()) + " columns");
        std::map<std::string, std::string> f;
        for (std::size_t i = 0; i < header.size(); ++i) f[header[i]] = fields[i];
        entries.push_back(manifest_detail::entry_from_fields(f, loc));
    }
    manifest_detail::check_unique(entries, where);
    return entries;
}

inline std::vector<ManifestEntry> parse_manifest_jsonl(const std::string& contents, const std::string& where = "manifest") {
    std::istringstream in(contents);
    std::string line;
    std::vector<ManifestEntry> entries;
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
        if (!j.is_object()) throw Error(ErrorKind::SchemaError, loc + ": expected an object");
        std::map<std::string, std::string> f;
        for (auto it = j.begin(); it != j.end(); ++it)
            f[it.key()] = it->is_string() ? it->get<std::string>() : (it->is_null() ? "" : it->dump());
        if (!j.contains("audio_path")) throw Error(ErrorKind::SchemaError, loc + ": missing audio_path");
        entries.push_back(manifest_detail::entry_from_fields(f, loc));
    }
    manifest_detail::check_unique(entries, where);
    return entries;
}

/// Loads .csv or .jsonl (by extension).
inline Manifest load_manifest(const std::filesystem::path& path) {
    Manifest m;
    m.base_dir = path.parent_path();
    const auto contents = text::read_file(path);
    m.entries = path.extension() == ".jsonl" ? parse_manifest_jsonl(contents, path.string())
                                             : parse_manifest_csv(contents, path.string());
    return m;
}

inline std::string manifest_to_csv(const std::vector<ManifestEntry>& entries) {
    std::string out;
    const auto& cols = manifest_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += "\n";
    auto label = [](const std::optional<EmotionLabel>& l) { return l ? std::string(to_string(*l)) : std::string{}; };
    for (const auto& e : entries) {
        out += text::csv_escape(e.sample_id) + "," + text::csv_escape(e.audio_path) + "," + label(e.gold) + "," +
               label(e.annotators[0]) + "," + label(e.annotators[1]) + "," + label(e.annotators[2]) + "," +
               std::string(to_string(e.split)) + "," + std::string(to_string(e.source_kind)) + "," +
               text::format("%.6f", e.duration_s) + "\n";
    }
    return out;
}

inline std::string manifest_to_jsonl(const std::vector<ManifestEntry>& entries) {
    std::string out;
    auto label = [](const std::optional<EmotionLabel>& l) {
        return l ? nlohmann::ordered_json(std::string(to_string(*l))) : nlohmann::ordered_json(nullptr);
    };
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["sample_id"] = e.sample_id;
        j["audio_path"] = e.audio_path;
        j["gold"] = label(e.gold);
        j["annotator_a"] = label(e.annotators[0]);
        j["annotator_b"] = label(e.annotators[1]);
        j["annotator_c"] = label(e.annotators[2]);
        j["split"] = to_string(e.split);
        j["source_kind"] = to_string(e.source_kind);
        j["duration_s"] = e.duration_s;
        out += j.dump() + "\n";
    }
    return out;
}

inline void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    text::write_file(path, path.extension() == ".jsonl" ? manifest_to_jsonl(entries) : manifest_to_csv(entries));
}

// ---- Stratified splitting -------------------------------------------------

struct SplitFractions {
    std::array<double, 4> values{0.2555, 0.2500, 0.2518, 0.2427};
};

namespace split_detail {

/// Largest-remainder apportionment of `total` over `weights`.
inline std::array<long, 4> apportion(long total, const std::array<double, 4>& weights) {
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    std::array<long, 4> out{};
    std::array<double, 4> rem{};
    long assigned = 0;
    for (std::size_t s = 0; s < 4; ++s) {
        const double exact = total * weights[s] / wsum;
        out[s] = static_cast<long>(std::floor(exact));
        rem[s] = exact - static_cast<double>(out[s]);
        assigned += out[s];
    }
    std::array<std::size_t, 4> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (long k = 0; k < total - assigned; ++k) ++out[order[static_cast<std::size_t>(k) % 4]];
    return out;
}

}  // namespace split_detail

/// Assigns every entry to set1/set2/set3/test. Split totals follow the
/// fractions by largest remainder; within each class every split gets the
/// floor or ceiling of its share, so class proportions hold to one sample.
inline std::vector<ManifestEntry> stratified_split(std::vector<ManifestEntry> entries, const SplitFractions& fractions,
                                                   std::uint64_t seed) {
    for (const auto& e : entries)
        if (!e.gold) throw Error(ErrorKind::MissingGold, "stratified_split: '" + e.sample_id + "' has no gold label");
    const auto& w = fractions.values;
    double wsum = 0.0;
    for (double v : w) {
        if (!(v >= 0.0)) throw Error(ErrorKind::ConfigError, "split fractions must be non-negative");
        wsum += v;
    }
    if (!(wsum > 0.0)) throw Error(ErrorKind::ConfigError, "split fractions sum to zero");

    std::array<std::vector<std::size_t>, kNumClasses> members;
    for (std::size_t i = 0; i < entries.size(); ++i) members[index_of(*entries[i].gold)].push_back(i);

    auto targets = split_detail::apportion(static_cast<long>(entries.size()), w);
    std::array<std::array<long, 4>, kNumClasses> quota{};
    std::array<long, 4> deficit = targets;
    std::array<std::array<double, 4>, kNumClasses> frac{};
    std::array<long, kNumClasses> remainder{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto n = static_cast<long>(members[c].size());
        long used = 0;
        for (std::size_t s = 0; s < 4; ++s) {
            const double exact = n * w[s] / wsum;
            quota[c][s] = static_cast<long>(std::floor(exact));
            frac[c][s] = exact - static_cast<double>(quota[c][s]);
            used += quota[c][s];
            deficit[s] -= quota[c][s];
        }
        remainder[c] = n - used;
    }
    // Hand each class's leftover samples to distinct splits that are furthest
    // below their global target.
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        std::array<std::size_t, 4> order{0, 1, 2, 3};
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (deficit[a] != deficit[b]) return deficit[a] > deficit[b];
            return frac[c][a] > frac[c][b];
        });
        for (long k = 0; k < remainder[c]; ++k) {
            const std::size_t s = order[static_cast<std::size_t>(k) % 4];
            ++quota[c][s];
            --deficit[s];
        }
    }

    Rng rng(seed);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        auto idx = members[c];
        rng.shuffle(idx);
        std::size_t pos = 0;
        for (std::size_t s = 0; s < 4; ++s)
            for (long k = 0; k < quota[c][s]; ++k) entries[idx[pos++]].split = kAssignedSplits[s];
    }
    return entries;
}

// ---- Synthetic corpus -----------------------------------------------------

struct ClassRecipe {
    double base_pitch_hz = 150.0;
    double pitch_jitter = 0.02;   // relative std of the pitch contour
    double energy_level = 0.2;    // mean amplitude
    double energy_jitter = 0.05;  // relative std of the amplitude envelope
    double modulation_rate_hz = 2.0;

    ClassRecipe blend(const ClassRecipe& other, double t) const {
        auto mix = [t](double a, double b) { return a + (b - a) * t; };
        return {mix(base_pitch_hz, other.base_pitch_hz), mix(pitch_jitter, other.pitch_jitter),
                mix(energy_level, other.energy_level), mix(energy_jitter, other.energy_jitter),
                mix(modulation_rate_hz, other.modulation_rate_hz)};
    }
};

enum class OverlapMode {
    full,            // every recipe field moves toward the other class
    pitch_variability  // only pitch jitter and modulation rate move
};

struct SynthRecipe {
    std::array<ClassRecipe, kNumClasses> classes{{
        {240.0, 0.05, 0.55, 0.10, 3.0},  // angry: loud, raised pitch, fairly steady
        {130.0, 0.02, 0.15, 0.05, 2.0},  // calm: low, stable
        {215.0, 0.22, 0.35, 0.55, 7.0},  // panic: large fast excursions
    }};
    /// Fraction of angry and panic samples drawn from a blend of both recipes.
    double overlap = 0.0;
    /// Blend weight toward the other class for overlapping samples.
    double blend_min = 0.35;
    double blend_max = 0.75;
    OverlapMode overlap_mode = OverlapMode::full;
    /// Restrict blending to samples of this class (nullopt: angry and panic).
    std::optional<EmotionLabel> overlap_only;
    std::uint64_t seed = 1;
    double duration_s = 1.0;
    int n_per_class = 50;
    int sample_rate = 16000;
    /// Per-sample lognormal spread of the speaker's base pitch.
    double speaker_spread = 0.06;
    double noise_floor = 0.003;
    /// Upper bound of the per-sample spectral-envelope drift (log scale).
    double articulation = 0.5;
    /// Upper bound of the per-sample breath-noise level relative to the tone.
    double breathiness = 0.3;
    /// Probability that each simulated annotator mislabels a sample.
    double annotator_error_rate = 0.05;

    const ClassRecipe& recipe(EmotionLabel l) const { return classes[index_of(l)]; }
};

/// Angry and panic share pitch level, loudness and loudness variability and
/// differ only in pitch variability. With `overlap` > 0, that fraction of
/// panic samples takes (nearly) the angry pitch variability, so a classifier
/// trained on the clean recipe mistakes them for angry.
inline SynthRecipe planted_error_recipe(std::uint64_t seed, int n_per_class, double overlap) {
    SynthRecipe r;
    r.classes[index_of(EmotionLabel::angry)] = {240.0, 0.04, 0.45, 0.20, 5.0};
    r.classes[index_of(EmotionLabel::panic)] = {240.0, 0.20, 0.45, 0.20, 5.0};
    r.seed = seed;
    r.n_per_class = n_per_class;
    r.overlap = overlap;
    r.overlap_mode = OverlapMode::pitch_variability;
    r.overlap_only = EmotionLabel::panic;
    r.blend_min = 0.8;
    r.blend_max = 1.0;
    return r;
}

namespace synth_detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = seed ^ (a * 0x9E3779B97F4A7C15ull) ^ (b * 0xC2B2AE3D27D4EB4Full);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

/// Smooth random contour with unit-variance knots every 1/rate seconds,
/// cosine-interpolated.
inline std::vector<double> contour(Rng& rng, std::size_t n, int sample_rate, double rate_hz) {
    const double knot_spacing = sample_rate / std::max(rate_hz, 0.1);
    const auto knots = static_cast<std::size_t>(std::ceil(n / knot_spacing)) + 2;
    std::vector<double> k(knots);
    for (auto& v : k) v = rng.normal();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double pos = i / knot_spacing;
        const auto j = static_cast<std::size_t>(pos);
        const double t = pos - static_cast<double>(j);
        const double s = 0.5 - 0.5 * std::cos(std::numbers::pi * t);
        out[i] = k[j] * (1.0 - s) + k[j + 1] * s;
    }
    return out;
}

}  // namespace synth_detail

struct SynthSample {
    std::string sample_id;
    EmotionLabel gold = EmotionLabel::calm;
    bool blended = false;
    double blend_weight = 0.0;
    AudioSignal signal;
};

/// Renders one tone-complex utterance for a class recipe. Everything is a
/// function of (recipe, seed, class, index).
inline SynthSample synthesize_sample(const SynthRecipe& recipe, EmotionLabel label, int index) {
    Rng rng(synth_detail::mix_seed(recipe.seed, index_of(label) + 1, static_cast<std::uint64_t>(index) + 1));
    SynthSample s;
    s.gold = label;
    s.sample_id = text::format("%s_%04d", std::string(to_string(label)).c_str(), index);
    ClassRecipe r = recipe.recipe(label);

    const bool eligible = (label == EmotionLabel::angry || label == EmotionLabel::panic) &&
                          (!recipe.overlap_only || *recipe.overlap_only == label);
    const double draw = rng.uniform();
    const double weight = rng.uniform(recipe.blend_min, recipe.blend_max);
    if (eligible && draw < recipe.overlap) {
        const auto& other = recipe.recipe(label == EmotionLabel::angry ? EmotionLabel::panic : EmotionLabel::angry);
        if (recipe.overlap_mode == OverlapMode::full) {
            r = r.blend(other, weight);
        } else {
            const auto b = r.blend(other, weight);
            r.pitch_jitter = b.pitch_jitter;
            r.modulation_rate_hz = b.modulation_rate_hz;
        }
        s.blended = true;
        s.blend_weight = weight;
    }

    const int sr = recipe.sample_rate;
    const auto n = static_cast<std::size_t>(std::lround(recipe.duration_s * sr));
    const double base = r.base_pitch_hz * std::exp(recipe.speaker_spread * rng.normal());
    const auto pitch_c = synth_detail::contour(rng, n, sr, r.modulation_rate_hz);
    const auto energy_c = synth_detail::contour(rng, n, sr, r.modulation_rate_hz * 0.8);
    // Harmonics below ~7 kHz shaped by a spectral envelope whose corner
    // frequency drifts slowly (articulation), so spectral shape is only
    // loosely tied to pitch.
    const auto artic_c = synth_detail::contour(rng, n, sr, 3.0);
    const double artic_depth = rng.uniform(0.0, recipe.articulation);
    const double breath = rng.uniform(0.25 * recipe.breathiness, recipe.breathiness);
    const double breath_pole = std::exp(-2.0 * std::numbers::pi * 600.0 / sr);
    const double breath_gain = std::sqrt((1.0 + breath_pole) / (1.0 - breath_pole));  // unit-variance output
    double breath_state = 0.0;
    const double nyquist_guard = 0.45 * sr;
    const std::size_t max_h = static_cast<std::size_t>(nyquist_guard / 70.0) + 1;
    std::vector<double> ph_cos(max_h), ph_sin(max_h);
    for (std::size_t h = 0; h < max_h; ++h) {
        const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
        ph_cos[h] = std::cos(th);
        ph_sin[h] = std::sin(th);
    }

    s.signal.sample_rate = sr;
    s.signal.channels = 1;
    s.signal.source_id = s.sample_id;
    s.signal.samples.resize(n);
    double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i) {
        const double f0 = std::clamp(base * (1.0 + r.pitch_jitter * pitch_c[i]), 70.0, 380.0);
        phase = std::fmod(phase + 2.0 * std::numbers::pi * f0 / sr, 2.0 * std::numbers::pi);
        const double corner = 600.0 * std::exp(artic_depth * artic_c[i]);
        const double c1 = std::cos(phase), s1 = std::sin(phase);
        double ch = c1, sh = s1;  // cos/sin of h * phase
        double tone = 0.0, power = 0.0;
        for (std::size_t h = 1; h < max_h && h * f0 < nyquist_guard; ++h) {
            const double f = static_cast<double>(h) * f0;
            const double taper = std::min(1.0, (nyquist_guard - f) / (0.2 * nyquist_guard));
            const double g = taper / std::sqrt(1.0 + (f / corner) * (f / corner));
            tone += g * (sh * ph_cos[h] + ch * ph_sin[h]);
            power += 0.5 * g * g;
            const double next_c = ch * c1 - sh * s1;
            sh = sh * c1 + ch * s1;
            ch = next_c;
        }
        breath_state = breath_pole * breath_state + (1.0 - breath_pole) * rng.normal();
        const double amp = r.energy_level * std::max(0.05, 1.0 + r.energy_jitter * energy_c[i]);
        const double voiced = tone / std::sqrt(power) + breath * breath_gain * breath_state;
        const double x = 0.4 * amp * voiced + recipe.noise_floor * rng.normal();
        s.signal.samples[i] = std::clamp(x, -0.99, 0.99);
    }
    return s;
}

/// Writes <out_dir>/audio/<id>.wav for every sample plus <out_dir>/manifest.csv
/// and returns the manifest entries (classes in canonical order).
inline std::vector<ManifestEntry> generate_synthetic_corpus(const SynthRecipe& recipe, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "audio", ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + (out_dir / "audio").string() + ": " + ec.message());
    std::vector<ManifestEntry> entries;
    for (auto label : kAllLabels) {
        for (int i = 0; i < recipe.n_per_class; ++i) {
            const auto s = synthesize_sample(recipe, label, i);
            const std::string rel = "audio/" + s.sample_id + ".wav";
            save_wav16(out_dir / rel, s.signal);
            ManifestEntry e;
            e.sample_id = s.sample_id;
            e.audio_path = rel;
            e.gold = label;
            Rng ann(synth_detail::mix_seed(recipe.seed ^ 0xA11CEull, index_of(label) + 1, static_cast<std::uint64_t>(i)));
            for (auto& a : e.annotators) {
                if (ann.uniform() < recipe.annotator_error_rate) {
                    const auto shift = 1 + ann.below(kNumClasses - 1);
                    a = kAllLabels[(index_of(label) + shift) % kNumClasses];
                } else {
                    a = label;
                }
            }
            e.split = Split::unassigned;
            e.source_kind = SourceKind::synthetic;
            e.duration_s = s.signal.duration_seconds();
            entries.push_back(std::move(e));
        }
    }
    save_manifest(out_dir / "manifest.csv", entries);
    return entries;
}

}  // namespace hser
