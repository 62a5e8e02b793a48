#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hser/audio_signal.hpp"
#include "hser/dsp.hpp"
#include "hser/error.hpp"

namespace hser {

inline constexpr std::size_t kNumMfcc = 13;
inline constexpr std::size_t kFeatureDim = 37;

// Frozen layout: pitch(6) energy(5) mfcc_mean(13) mfcc_std(13).
namespace dim {
inline constexpr std::size_t pitch_mean = 0;
inline constexpr std::size_t pitch_std = 1;
inline constexpr std::size_t pitch_min = 2;
inline constexpr std::size_t pitch_max = 3;
inline constexpr std::size_t pitch_range = 4;
inline constexpr std::size_t voiced_ratio = 5;
inline constexpr std::size_t energy_mean = 6;
inline constexpr std::size_t energy_std = 7;
inline constexpr std::size_t energy_min = 8;
inline constexpr std::size_t energy_max = 9;
inline constexpr std::size_t energy_range = 10;
inline constexpr std::size_t mfcc_mean_0 = 11;
inline constexpr std::size_t mfcc_std_0 = 24;
}  // namespace dim

inline const std::array<std::string, kFeatureDim>& feature_names() {
    static const auto names = [] {
        std::array<std::string, kFeatureDim> n{"pitch_mean",  "pitch_std",  "pitch_min",   "pitch_max",
                                               "pitch_range", "voiced_ratio", "energy_mean", "energy_std",
                                               "energy_min",  "energy_max", "energy_range"};
        for (std::size_t i = 0; i < kNumMfcc; ++i) {
            n[dim::mfcc_mean_0 + i] = "mfcc_mean_" + std::to_string(i);
            n[dim::mfcc_std_0 + i] = "mfcc_std_" + std::to_string(i);
        }
        return n;
    }();
    return names;
}

inline std::optional<std::size_t> feature_index(std::string_view name) {
    const auto& names = feature_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    return std::nullopt;
}

struct FeatureVector {
    std::array<double, kFeatureDim> values{};

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    bool all_finite() const {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FrameSeries {
    std::vector<std::optional<double>> pitch_hz;  // nullopt == unvoiced
    std::vector<double> energy_rms;
    std::vector<std::array<double, kNumMfcc>> mfcc;
    double frame_ms = 25.0;
    double hop_ms = 10.0;

    std::size_t size() const { return energy_rms.size(); }
};

struct FrameLayout {
    std::size_t frame_len = 0;
    std::size_t hop_len = 0;
    std::size_t count = 0;
};

inline FrameLayout frame_layout(std::size_t n_samples, int sample_rate, double frame_ms = 25.0, double hop_ms = 10.0) {
    FrameLayout layout;
    layout.frame_len = static_cast<std::size_t>(std::lround(frame_ms * sample_rate / 1000.0));
    layout.hop_len = static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0));
    if (layout.frame_len == 0 || layout.hop_len == 0)
        throw Error(ErrorKind::SignalTooShort, "frame or hop length rounds to zero samples");
    if (n_samples < layout.frame_len)
        throw Error(ErrorKind::SignalTooShort, "signal has " + std::to_string(n_samples) +
                                                   " samples, one frame needs " + std::to_string(layout.frame_len));
    layout.count = 1 + (n_samples - layout.frame_len) / layout.hop_len;
    return layout;
}

/// Splits a mono signal into overlapping, unwindowed frames.
inline std::vector<std::vector<double>> frame_signal(const AudioSignal& signal, double frame_ms = 25.0,
                                                     double hop_ms = 10.0) {
    const auto layout = frame_layout(signal.samples.size(), signal.sample_rate, frame_ms, hop_ms);
    std::vector<std::vector<double>> frames;
    frames.reserve(layout.count);
    for (std::size_t i = 0; i < layout.count; ++i) {
        const auto begin = signal.samples.begin() + static_cast<std::ptrdiff_t>(i * layout.hop_len);
        frames.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(layout.frame_len));
    }
    return frames;
}

inline double rms_energy(std::span<const double> frame) { return dsp::rms(frame); }

struct PitchOptions {
    double fmin = 60.0;
    double fmax = 400.0;
    double clarity_threshold = 0.6;
    /// The earliest local maximum within this fraction of the best one wins,
    /// which keeps period multiples from being reported.
    double octave_tolerance = 0.9;
};

struct PitchEstimate {
    std::optional<double> hz;
    double clarity = 0.0;
};

/// Peak of the normalized autocorrelation over lags in [sr/fmax, sr/fmin],
/// refined by parabolic interpolation.
inline PitchEstimate estimate_pitch_detail(std::span<const double> frame, int sample_rate,
                                           const PitchOptions& opts = {}) {
    const std::size_t n = frame.size();
    const auto min_lag = static_cast<std::size_t>(std::floor(sample_rate / opts.fmax));
    auto max_lag = static_cast<std::size_t>(std::ceil(sample_rate / opts.fmin));
    if (n < 4 || min_lag < 2) return {};
    max_lag = std::min(max_lag, n - 2);
    if (max_lag <= min_lag) return {};

    double mean = 0.0;
    for (double v : frame) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = frame[i] - mean;

    // Prefix sums of squares give both partial energies in O(1).
    std::vector<double> sq(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) sq[i + 1] = sq[i] + x[i] * x[i];
    if (sq[n] <= 0.0) return {};

    const std::size_t lo = min_lag - 1;
    const std::size_t hi = max_lag + 1;
    std::vector<double> r(hi + 1, 0.0);
    for (std::size_t lag = lo; lag <= hi && lag < n; ++lag) {
        double acc = 0.0;
        const std::size_t m = n - lag;
        for (std::size_t i = 0; i < m; ++i) acc += x[i] * x[i + lag];
        const double e0 = sq[m];
        const double e1 = sq[n] - sq[lag];
        const double denom = std::sqrt(e0 * e1);
        r[lag] = denom > 0.0 ? acc / denom : 0.0;
    }

    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> peaks;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
        if (r[lag] >= r[lag - 1] && r[lag] > r[lag + 1]) {
            peaks.push_back(lag);
            best = std::max(best, r[lag]);
        }
    }
    if (peaks.empty() || best < opts.clarity_threshold) return {std::nullopt, std::max(best, 0.0)};

    std::size_t chosen = peaks.front();
    for (std::size_t lag : peaks) {
        if (r[lag] >= opts.octave_tolerance * best) {
            chosen = lag;
            break;
        }
    }
    const double a = r[chosen - 1], b = r[chosen], c = r[chosen + 1];
    const double denom = a - 2.0 * b + c;
    const double shift = denom != 0.0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
    return {sample_rate / (static_cast<double>(chosen) + shift), best};
}

inline std::optional<double> estimate_pitch(std::span<const double> frame, int sample_rate,
                                            const PitchOptions& opts = {}) {
    return estimate_pitch_detail(frame, sample_rate, opts).hz;
}

struct MfccOptions {
    std::size_t n_mels = 26;
    std::size_t n_coeffs = kNumMfcc;
    double fmin = 0.0;
    double fmax = 8000.0;
    double log_floor = 1e-10;
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular HTK-scale filterbank over power-spectrum bins, plus the
/// orthonormal DCT-II that turns log energies into cepstra.
class MelFilterbank {
public:
    MelFilterbank(int sample_rate, std::size_t nfft, const MfccOptions& opts = {})
        : sample_rate_(sample_rate), nfft_(nfft), opts_(opts) {
        const std::size_t bins = nfft / 2 + 1;
        const std::size_t m = opts.n_mels;
        const double mel_lo = hz_to_mel(opts.fmin);
        const double mel_hi = hz_to_mel(std::min(opts.fmax, sample_rate / 2.0));
        std::vector<double> edges(m + 2);
        for (std::size_t i = 0; i < m + 2; ++i)
            edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(m + 1));
        weights_.assign(m, std::vector<double>(bins, 0.0));
        for (std::size_t j = 0; j < m; ++j) {
            const double left = edges[j], center = edges[j + 1], right = edges[j + 2];
            for (std::size_t k = 0; k < bins; ++k) {
                const double f = static_cast<double>(k) * sample_rate / static_cast<double>(nfft);
                const double up = (f - left) / (center - left);
                const double down = (right - f) / (right - center);
                weights_[j][k] = std::max(0.0, std::min(up, down));
            }
        }
        dct_.assign(opts.n_coeffs, std::vector<double>(m, 0.0));
        for (std::size_t i = 0; i < opts.n_coeffs; ++i) {
            const double scale = std::sqrt((i == 0 ? 1.0 : 2.0) / static_cast<double>(m));
            for (std::size_t j = 0; j < m; ++j)
                dct_[i][j] = scale * std::cos(std::numbers::pi * static_cast<double>(i) *
                                              (static_cast<double>(j) + 0.5) / static_cast<double>(m));
        }
    }

    std::vector<double> log_mel(std::span<const double> windowed_frame) const {
        const auto power = dsp::power_spectrum(windowed_frame, nfft_);
        std::vector<double> out(weights_.size());
        for (std::size_t j = 0; j < weights_.size(); ++j) {
            double e = 0.0;
            for (std::size_t k = 0; k < power.size(); ++k) e += weights_[j][k] * power[k];
            out[j] = std::log(std::max(e, opts_.log_floor));
        }
        return out;
    }

    std::vector<double> cepstrum(std::span<const double> log_mel_energies) const {
        std::vector<double> c(dct_.size(), 0.0);
        for (std::size_t i = 0; i < dct_.size(); ++i)
            for (std::size_t j = 0; j < log_mel_energies.size(); ++j) c[i] += dct_[i][j] * log_mel_energies[j];
        return c;
    }

    std::vector<double> mfcc(std::span<const double> windowed_frame) const { return cepstrum(log_mel(windowed_frame)); }

    const std::vector<std::vector<double>>& weights() const { return weights_; }
    std::size_t nfft() const { return nfft_; }

private:
    int sample_rate_;
    std::size_t nfft_;
    MfccOptions opts_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> dct_;
};

/// MFCCs of one already-windowed frame; FFT size is the next power of two.
inline std::vector<double> mfcc(std::span<const double> windowed_frame, int sample_rate, const MfccOptions& opts = {}) {
    return MelFilterbank(sample_rate, dsp::next_pow2(windowed_frame.size()), opts).mfcc(windowed_frame);
}

struct FeatureOptions {
    double frame_ms = 25.0;
    double hop_ms = 10.0;
    PitchOptions pitch;
    MfccOptions mfcc;
};

inline FrameSeries extract_frames(const AudioSignal& signal, const FeatureOptions& opts = {}) {
    const auto layout = frame_layout(signal.samples.size(), signal.sample_rate, opts.frame_ms, opts.hop_ms);
    const MelFilterbank bank(signal.sample_rate, dsp::next_pow2(layout.frame_len), opts.mfcc);
    const auto window = dsp::hann(layout.frame_len);

    FrameSeries series;
    series.frame_ms = opts.frame_ms;
    series.hop_ms = opts.hop_ms;
    series.pitch_hz.reserve(layout.count);
    series.energy_rms.reserve(layout.count);
    series.mfcc.reserve(layout.count);
    std::vector<double> windowed(layout.frame_len);
    for (std::size_t f = 0; f < layout.count; ++f) {
        const std::span<const double> frame(signal.samples.data() + f * layout.hop_len, layout.frame_len);
        series.energy_rms.push_back(rms_energy(frame));
        series.pitch_hz.push_back(estimate_pitch(frame, signal.sample_rate, opts.pitch));
        for (std::size_t i = 0; i < frame.size(); ++i) windowed[i] = frame[i] * window[i];
        const auto c = bank.mfcc(windowed);
        std::array<double, kNumMfcc> coeffs{};
        std::copy_n(c.begin(), std::min(c.size(), kNumMfcc), coeffs.begin());
        series.mfcc.push_back(coeffs);
    }
    return series;
}

namespace stats_detail {

struct Moments {
    double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;
};

inline Moments moments(const std::vector<double>& v) {
    Moments m;
    if (v.empty()) return m;
    double sum = 0.0;
    for (double x : v) sum += x;
    m.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size()));
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    m.min = *lo;
    m.max = *hi;
    if (m.min == m.max) {
        m.mean = m.min;
        m.std = 0.0;
    }
    return m;
}

}  // namespace stats_detail

/// Collapses frame streams into the 37-dimension vector. Pitch statistics
/// use voiced frames only and are zero when there are none.
inline FeatureVector aggregate(const FrameSeries& series) {
    const std::size_t n = series.size();
    if (n == 0) throw Error(ErrorKind::EmptySeries, "aggregate: no frames");
    if (series.pitch_hz.size() != n || series.mfcc.size() != n)
        throw Error(ErrorKind::EmptySeries, "aggregate: frame streams have unequal lengths");

    FeatureVector v;
    std::vector<double> voiced;
    for (const auto& p : series.pitch_hz)
        if (p) voiced.push_back(*p);
    const auto pitch = stats_detail::moments(voiced);
    v[dim::pitch_mean] = pitch.mean;
    v[dim::pitch_std] = pitch.std;
    v[dim::pitch_min] = pitch.min;
    v[dim::pitch_max] = pitch.max;
    v[dim::pitch_range] = pitch.max - pitch.min;
    v[dim::voiced_ratio] = static_cast<double>(voiced.size()) / static_cast<double>(n);

    const auto energy = stats_detail::moments(series.energy_rms);
    v[dim::energy_mean] = energy.mean;
    v[dim::energy_std] = energy.std;
    v[dim::energy_min] = energy.min;
    v[dim::energy_max] = energy.max;
    v[dim::energy_range] = energy.max - energy.min;

    std::vector<double> column(n);
    for (std::size_t c = 0; c < kNumMfcc; ++c) {
        for (std::size_t f = 0; f < n; ++f) column[f] = series.mfcc[f][c];
        const auto m = stats_detail::moments(column);
        v[dim::mfcc_mean_0 + c] = m.mean;
        v[dim::mfcc_std_0 + c] = m.std;
    }
    return v;
}

inline FeatureVector extract_features(const AudioSignal& signal, const FeatureOptions& opts = {}) {
    return aggregate(extract_frames(signal, opts));
}

}  // namespace hser
