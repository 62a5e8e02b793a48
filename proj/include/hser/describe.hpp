#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hser/error.hpp"
#include "hser/features.hpp"
#include "hser/text.hpp"

namespace hser {

/// Reference-corpus moments used to express a vector as z-scores.
struct CorpusStats {
    std::array<double, kFeatureDim> mean{};
    std::array<double, kFeatureDim> std{};
    std::array<bool, kFeatureDim> zero_variance{};
    std::size_t n = 0;

    static constexpr double kMinStd = 1e-12;

    double z(std::size_t d, double value) const {
        if (zero_variance[d]) return 0.0;
        return (value - mean[d]) / std[d];
    }
    std::array<double, kFeatureDim> z(const FeatureVector& v) const {
        std::array<double, kFeatureDim> out{};
        for (std::size_t d = 0; d < kFeatureDim; ++d) out[d] = z(d, v[d]);
        return out;
    }
    /// Inverse of z(): the raw value sitting at a given z-score.
    double value_at(std::size_t d, double z_score) const { return mean[d] + z_score * std[d]; }
};

inline CorpusStats fit_corpus_stats(const std::vector<FeatureVector>& vectors) {
    if (vectors.empty()) throw Error(ErrorKind::MissingStats, "corpus stats need at least one vector");
    CorpusStats s;
    s.n = vectors.size();
    const auto n = static_cast<double>(vectors.size());
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
        double sum = 0.0;
        for (const auto& v : vectors) sum += v[d];
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& v : vectors) ss += (v[d] - mean) * (v[d] - mean);
        s.mean[d] = mean;
        s.std[d] = std::sqrt(ss / n);
        s.zero_variance[d] = !(s.std[d] > CorpusStats::kMinStd);
        if (s.zero_variance[d]) s.std[d] = 1.0;
    }
    return s;
}

inline nlohmann::json to_json(const CorpusStats& s) {
    nlohmann::json j;
    j["schema"] = "hser.corpus_stats/1";
    j["n"] = s.n;
    auto& dims = j["dimensions"] = nlohmann::json::array();
    for (std::size_t d = 0; d < kFeatureDim; ++d)
        dims.push_back({{"name", feature_names()[d]},
                        {"mean", s.mean[d]},
                        {"std", s.std[d]},
                        {"zero_variance", s.zero_variance[d]}});
    return j;
}

inline CorpusStats corpus_stats_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("schema", "") != "hser.corpus_stats/1")
        throw Error(ErrorKind::MissingStats, "not a hser.corpus_stats/1 document");
    const auto& dims = j.at("dimensions");
    CorpusStats s;
    s.n = j.value("n", std::size_t{0});
    std::array<bool, kFeatureDim> seen{};
    for (const auto& d : dims) {
        const auto idx = feature_index(d.at("name").get<std::string>());
        if (!idx) throw Error(ErrorKind::MissingStats, "unknown dimension " + d.at("name").get<std::string>());
        s.mean[*idx] = d.at("mean").get<double>();
        s.std[*idx] = d.at("std").get<double>();
        s.zero_variance[*idx] = d.value("zero_variance", false);
        seen[*idx] = true;
    }
    for (std::size_t d = 0; d < kFeatureDim; ++d)
        if (!seen[d]) throw Error(ErrorKind::MissingStats, "stats missing dimension " + feature_names()[d]);
    return s;
}

inline void save_corpus_stats(const std::filesystem::path& path, const CorpusStats& s) {
    text::write_file(path, to_json(s).dump(2) + "\n");
}

inline CorpusStats load_corpus_stats(const std::filesystem::path& path) {
    try {
        return corpus_stats_from_json(nlohmann::json::parse(text::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MissingStats, path.string() + ": " + e.what());
    }
}

enum class Level { very_low, low, moderate, high, very_high };

constexpr std::string_view to_string(Level level) {
    switch (level) {
        case Level::very_low: return "very low";
        case Level::low: return "low";
        case Level::moderate: return "moderate";
        case Level::high: return "high";
        case Level::very_high: return "very high";
    }
    return "moderate";
}

/// Cut points: < -1.5 | [-1.5, -0.5) | [-0.5, 0.5] | (0.5, 1.5] | > 1.5
constexpr Level level_for(double z) {
    if (z < -1.5) return Level::very_low;
    if (z < -0.5) return Level::low;
    if (z <= 0.5) return Level::moderate;
    if (z <= 1.5) return Level::high;
    return Level::very_high;
}

struct DescribedFeature {
    std::string name;
    Level level = Level::moderate;
    double z = 0.0;
};

struct StructuredDescription {
    std::vector<DescribedFeature> features;  // feature-schema order
    std::string text;

    const DescribedFeature& at(std::string_view name) const {
        for (const auto& f : features)
            if (f.name == name) return f;
        throw Error(ErrorKind::MissingStats, "no described feature " + std::string(name));
    }
};

inline constexpr std::array<std::pair<std::string_view, std::size_t>, 6> kHeadlineCues{{
    {"Pitch level", dim::pitch_mean},
    {"Pitch variability", dim::pitch_std},
    {"Pitch range", dim::pitch_range},
    {"Energy level", dim::energy_mean},
    {"Energy variability", dim::energy_std},
    {"Voiced ratio", dim::voiced_ratio},
}};

/// Renders the acoustic profile used inside prompts. The text depends only on
/// the z-scores, formatted to two decimals.
inline StructuredDescription describe(const FeatureVector& v, const CorpusStats& stats) {
    if (stats.n == 0) throw Error(ErrorKind::MissingStats, "describe: corpus stats are empty");
    StructuredDescription desc;
    desc.features.reserve(kFeatureDim);
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
        const double z = stats.z(d, v[d]);
        desc.features.push_back({feature_names()[d], level_for(z), z});
    }

    std::string out = "Acoustic profile (levels relative to the reference corpus):\n";
    for (const auto& [label, d] : kHeadlineCues) {
        const auto& f = desc.features[d];
        out += text::format("- %.*s: %.*s (z=%+.2f)\n", static_cast<int>(label.size()), label.data(),
                            static_cast<int>(to_string(f.level).size()), to_string(f.level).data(), f.z);
    }
    out += "Detailed cues:\n";
    for (const auto& f : desc.features) {
        out += text::format("  %s: %.*s (z=%+.2f)\n", f.name.c_str(), static_cast<int>(to_string(f.level).size()),
                            to_string(f.level).data(), f.z);
    }
    desc.text = std::move(out);
    return desc;
}

}  // namespace hser
