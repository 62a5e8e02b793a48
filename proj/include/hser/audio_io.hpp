#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "hser/audio_signal.hpp"
#include "hser/dsp.hpp"
#include "hser/error.hpp"
#include "hser/resample.hpp"
#include "hser/wav.hpp"

namespace hser {

struct VoicedInterval {
    std::size_t start_sample = 0;
    std::size_t end_sample = 0;  // exclusive

    std::size_t length() const { return end_sample - start_sample; }
    friend bool operator==(const VoicedInterval&, const VoicedInterval&) = default;
};

struct AudioSegment {
    AudioSignal signal;
    std::string parent_id;
    double offset_seconds = 0.0;
    double duration_seconds = 0.0;

    std::string id(std::size_t index) const { return parent_id + "_" + std::to_string(index); }
};

struct StandardizeOptions {
    int target_rate = 16000;
    double target_peak = 0.95;
    int resampler_zero_crossings = 16;
    bool normalize_peak = true;
};

/// Downmix to mono, resample to the target rate and peak-normalize.
/// An all-zero input is returned unscaled with `degenerate` set.
inline AudioSignal standardize(const AudioSignal& signal, const StandardizeOptions& opts = {}) {
    if (signal.samples.empty() || signal.channels < 1)
        throw Error(ErrorKind::EmptySignal, "standardize: '" + signal.source_id + "' has no samples");

    std::vector<double> mono;
    if (signal.channels == 1) {
        mono = signal.samples;
    } else {
        const auto ch = static_cast<std::size_t>(signal.channels);
        mono.resize(signal.frame_count());
        for (std::size_t i = 0; i < mono.size(); ++i) {
            double acc = 0.0;
            for (std::size_t c = 0; c < ch; ++c) acc += signal.samples[i * ch + c];
            mono[i] = acc / static_cast<double>(ch);
        }
    }
    if (signal.sample_rate != opts.target_rate) {
        PolyphaseResampler resampler(signal.sample_rate, opts.target_rate, opts.resampler_zero_crossings);
        mono = resampler.process(mono);
    }

    AudioSignal out;
    out.sample_rate = opts.target_rate;
    out.channels = 1;
    out.source_id = signal.source_id;

    std::size_t peak_index = 0;
    double peak = 0.0;
    for (std::size_t i = 0; i < mono.size(); ++i) {
        if (std::abs(mono[i]) > peak) {
            peak = std::abs(mono[i]);
            peak_index = i;
        }
    }
    if (peak == 0.0) {
        out.samples = std::move(mono);
        out.degenerate = true;
        return out;
    }
    if (opts.normalize_peak && peak != opts.target_peak) {
        const double gain = opts.target_peak / peak;
        for (double& x : mono) x *= gain;
        // Pin the peak exactly so a second pass is the identity.
        mono[peak_index] = std::copysign(opts.target_peak, mono[peak_index]);
        for (double& x : mono) x = std::clamp(x, -opts.target_peak, opts.target_peak);
    }
    out.samples = std::move(mono);
    return out;
}

struct VadOptions {
    double frame_ms = 25.0;
    double hop_ms = 10.0;
    double energy_floor_db = -40.0;
    int hangover_frames = 5;
};

namespace vad_detail {

inline std::size_t ms_to_samples(double ms, int rate) {
    return static_cast<std::size_t>(std::lround(ms * rate / 1000.0));
}

}  // namespace vad_detail

/// Energy VAD: a frame is voiced when its RMS is above `energy_floor_db`
/// relative to the signal peak. Unvoiced gaps of at most `hangover_frames`
/// frames between voiced frames are bridged. Each frame stands for the hop
/// centered on it, so interval edges land within a hop of the true onset.
inline std::vector<VoicedInterval> detect_voice_activity(const AudioSignal& signal, const VadOptions& opts = {}) {
    if (signal.samples.empty()) throw Error(ErrorKind::EmptySignal, "detect_voice_activity: empty signal");
    const auto& x = signal.samples;
    const std::size_t n = x.size();
    const std::size_t frame = std::max<std::size_t>(1, vad_detail::ms_to_samples(opts.frame_ms, signal.sample_rate));
    const std::size_t hop = std::max<std::size_t>(1, vad_detail::ms_to_samples(opts.hop_ms, signal.sample_rate));

    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) return {};

    const std::size_t frame_len = std::min(frame, n);
    const std::size_t n_frames = 1 + (n - frame_len) / hop;
    const double floor_linear = peak * std::pow(10.0, opts.energy_floor_db / 20.0);

    std::vector<char> voiced(n_frames, 0);
    for (std::size_t i = 0; i < n_frames; ++i) {
        const std::span<const double> f(x.data() + i * hop, frame_len);
        voiced[i] = dsp::rms(f) > floor_linear ? 1 : 0;
    }

    // Bridge short gaps.
    const auto hang = static_cast<std::size_t>(std::max(0, opts.hangover_frames));
    std::size_t last_voiced = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < n_frames; ++i) {
        if (!voiced[i]) continue;
        if (last_voiced != std::numeric_limits<std::size_t>::max() && i - last_voiced - 1 <= hang)
            for (std::size_t k = last_voiced + 1; k < i; ++k) voiced[k] = 1;
        last_voiced = i;
    }

    auto frame_start_edge = [&](std::size_t i) -> std::size_t {
        if (i == 0) return 0;
        const std::size_t center = i * hop + frame_len / 2;
        return center - hop / 2;
    };
    auto frame_end_edge = [&](std::size_t i) -> std::size_t {
        if (i + 1 == n_frames) return n;
        const std::size_t center = i * hop + frame_len / 2;
        return std::min(n, center + (hop - hop / 2));
    };

    std::vector<VoicedInterval> intervals;
    std::size_t i = 0;
    while (i < n_frames) {
        if (!voiced[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n_frames && voiced[j + 1]) ++j;
        VoicedInterval iv{frame_start_edge(i), frame_end_edge(j)};
        if (!intervals.empty() && iv.start_sample <= intervals.back().end_sample)
            intervals.back().end_sample = std::max(intervals.back().end_sample, iv.end_sample);
        else if (iv.start_sample < iv.end_sample)
            intervals.push_back(iv);
        i = j + 1;
    }
    return intervals;
}

struct SegmentOptions {
    double max_len_s = 10.0;
    double min_len_s = 0.5;
    double split_search_s = 0.5;
    double frame_ms = 25.0;
    double hop_ms = 10.0;
};

namespace segment_detail {

/// Sample index of the quietest frame start within +/- search of the midpoint.
inline std::size_t split_point(const std::vector<double>& x, VoicedInterval iv, int rate, const SegmentOptions& opts) {
    const std::size_t frame = std::max<std::size_t>(1, vad_detail::ms_to_samples(opts.frame_ms, rate));
    const std::size_t hop = std::max<std::size_t>(1, vad_detail::ms_to_samples(opts.hop_ms, rate));
    const std::size_t search = vad_detail::ms_to_samples(opts.split_search_s * 1000.0, rate);
    const std::size_t mid = iv.start_sample + iv.length() / 2;
    const std::size_t lo = std::max(iv.start_sample + 1, mid > search ? mid - search : 0);
    const std::size_t hi = std::min(iv.end_sample - 1, mid + search);
    std::size_t best = mid;
    double best_energy = std::numeric_limits<double>::infinity();
    for (std::size_t s = lo; s <= hi; s += hop) {
        const std::size_t begin = s >= frame / 2 ? s - frame / 2 : 0;
        const std::size_t end = std::min(x.size(), begin + frame);
        const double e = dsp::rms(std::span<const double>(x.data() + begin, end - begin));
        if (e < best_energy) {
            best_energy = e;
            best = s;
        }
    }
    return best;
}

inline void split_recursive(const std::vector<double>& x, VoicedInterval iv, int rate, const SegmentOptions& opts,
                            std::size_t max_len, std::vector<VoicedInterval>& out) {
    if (iv.length() <= max_len) {
        out.push_back(iv);
        return;
    }
    const std::size_t cut = split_point(x, iv, rate, opts);
    split_recursive(x, {iv.start_sample, cut}, rate, opts, max_len, out);
    split_recursive(x, {cut, iv.end_sample}, rate, opts, max_len, out);
}

}  // namespace segment_detail

/// Cut voiced intervals into utterances no longer than `max_len_s`; pieces
/// shorter than `min_len_s` are dropped.
inline std::vector<AudioSegment> segment(const AudioSignal& signal, const std::vector<VoicedInterval>& intervals,
                                         const SegmentOptions& opts = {}) {
    const int rate = signal.sample_rate;
    const auto max_len = static_cast<std::size_t>(std::floor(opts.max_len_s * rate));
    const auto min_len = static_cast<std::size_t>(std::ceil(opts.min_len_s * rate));
    std::vector<VoicedInterval> pieces;
    for (const auto& iv : intervals) {
        if (iv.start_sample >= iv.end_sample || iv.end_sample > signal.samples.size())
            throw Error(ErrorKind::EmptySignal, "segment: interval outside signal");
        segment_detail::split_recursive(signal.samples, iv, rate, opts, max_len, pieces);
    }
    std::vector<AudioSegment> out;
    for (const auto& p : pieces) {
        if (p.length() < min_len) continue;
        AudioSegment seg;
        seg.parent_id = signal.source_id;
        seg.signal.sample_rate = rate;
        seg.signal.channels = 1;
        seg.signal.samples.assign(signal.samples.begin() + static_cast<std::ptrdiff_t>(p.start_sample),
                                  signal.samples.begin() + static_cast<std::ptrdiff_t>(p.end_sample));
        seg.offset_seconds = static_cast<double>(p.start_sample) / rate;
        seg.duration_seconds = static_cast<double>(p.length()) / rate;
        seg.signal.source_id = seg.id(out.size());
        out.push_back(std::move(seg));
    }
    return out;
}

}  // namespace hser
