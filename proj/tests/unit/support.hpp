#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hser/audio_signal.hpp"
#include "hser/features.hpp"
#include "hser/label.hpp"
#include "hser/random.hpp"
#include "hser/text.hpp"

namespace testutil {

inline const nlohmann::json& oracles() {
    static const nlohmann::json j =
        nlohmann::json::parse(hser::text::read_file(std::filesystem::path(HSER_TEST_DATA_DIR) / "oracles.json"));
    return j;
}

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(HSER_TEST_DATA_DIR) / name; }

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("hser_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::vector<double> sine(double freq, double amp, int sample_rate, std::size_t n, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / sample_rate + phase);
    return x;
}

inline hser::AudioSignal mono(std::vector<double> samples, int sample_rate = 16000, std::string id = "test") {
    hser::AudioSignal s;
    s.samples = std::move(samples);
    s.sample_rate = sample_rate;
    s.channels = 1;
    s.source_id = std::move(id);
    return s;
}

struct LabeledVectors {
    std::vector<std::string> ids;
    std::vector<hser::FeatureVector> X;
    std::vector<hser::EmotionLabel> y;
};

/// Feature vectors with unit noise on every dimension and class shifts on the
/// cues the default rules read: panic raises pitch_std and energy_std, angry
/// raises energy_mean and pitch_mean, calm lowers both spreads.
inline LabeledVectors cue_blobs(std::size_t per_class, double shift, std::uint64_t seed) {
    using namespace hser;
    Rng rng(seed);
    LabeledVectors out;
    for (auto label : kAllLabels) {
        for (std::size_t i = 0; i < per_class; ++i) {
            FeatureVector v;
            for (auto& x : v.values) x = rng.normal();
            switch (label) {
                case EmotionLabel::panic:
                    v[dim::pitch_std] += shift;
                    v[dim::energy_std] += shift;
                    break;
                case EmotionLabel::angry:
                    v[dim::energy_mean] += shift;
                    v[dim::pitch_mean] += shift;
                    break;
                case EmotionLabel::calm:
                    v[dim::pitch_std] -= shift;
                    v[dim::energy_std] -= shift;
                    break;
            }
            out.ids.push_back(std::string(to_string(label)) + "_" + std::to_string(i));
            out.X.push_back(v);
            out.y.push_back(label);
        }
    }
    return out;
}

}  // namespace testutil
