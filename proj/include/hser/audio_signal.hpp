#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hser {

/// Sampled waveform. Multi-channel audio is stored interleaved.
struct AudioSignal {
    std::vector<double> samples;
    int sample_rate = 16000;
    int channels = 1;
    std::string source_id;
    /// Set by standardize() when the input had no energy to normalize.
    bool degenerate = false;

    std::size_t frame_count() const {
        return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0;
    }
    double duration_seconds() const {
        return sample_rate > 0 ? static_cast<double>(frame_count()) / sample_rate : 0.0;
    }
    std::vector<double> channel(int index) const {
        std::vector<double> out;
        out.reserve(frame_count());
        for (std::size_t i = static_cast<std::size_t>(index); i < samples.size();
             i += static_cast<std::size_t>(channels))
            out.push_back(samples[i]);
        return out;
    }
};

}  // namespace hser
