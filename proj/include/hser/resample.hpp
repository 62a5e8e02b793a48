#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace hser {

/// Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.
/// `zero_crossings` controls the kernel half-length (quality).
class PolyphaseResampler {
public:
    PolyphaseResampler(int from_rate, int to_rate, int zero_crossings = 16, double kaiser_beta = 8.6) {
        const int g = std::gcd(from_rate, to_rate);
        up_ = to_rate / g;
        down_ = from_rate / g;
        // Cutoff relative to the input Nyquist; slightly below to keep the
        // transition band out of the aliasing region.
        cutoff_ = std::min(1.0, static_cast<double>(up_) / down_) * 0.97;
        half_ = static_cast<int>(std::ceil(zero_crossings / cutoff_));
        const double beta_norm = std::cyl_bessel_i(0.0, kaiser_beta);
        taps_.resize(static_cast<std::size_t>(up_) * (2 * half_ + 1));
        for (int phase = 0; phase < up_; ++phase) {
            const double frac = static_cast<double>(phase) / up_;
            double sum = 0.0;
            for (int j = -half_; j <= half_; ++j) {
                const double t = j - frac;
                const double u = t / (half_ + 1);
                double w = 0.0;
                if (std::abs(u) < 1.0)
                    w = std::cyl_bessel_i(0.0, kaiser_beta * std::sqrt(1.0 - u * u)) / beta_norm;
                const double x = cutoff_ * t;
                const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
                const double h = cutoff_ * sinc * w;
                tap(phase, j) = h;
                sum += h;
            }
            for (int j = -half_; j <= half_; ++j) tap(phase, j) /= sum;
        }
    }

    std::vector<double> process(std::span<const double> input) const {
        if (up_ == down_) return {input.begin(), input.end()};
        const auto n_in = static_cast<long long>(input.size());
        const long long n_out = (n_in * up_ + down_ - 1) / down_;
        std::vector<double> out(static_cast<std::size_t>(n_out));
        for (long long n = 0; n < n_out; ++n) {
            const long long pos = n * down_;
            const long long base = pos / up_;
            const int phase = static_cast<int>(pos % up_);
            double acc = 0.0;
            for (int j = -half_; j <= half_; ++j) {
                const long long idx = base + j;
                if (idx < 0 || idx >= n_in) continue;
                acc += input[static_cast<std::size_t>(idx)] * tap(phase, j);
            }
            out[static_cast<std::size_t>(n)] = acc;
        }
        return out;
    }

    int up() const { return up_; }
    int down() const { return down_; }

private:
    double& tap(int phase, int j) {
        return taps_[static_cast<std::size_t>(phase) * (2 * half_ + 1) + static_cast<std::size_t>(j + half_)];
    }
    double tap(int phase, int j) const {
        return taps_[static_cast<std::size_t>(phase) * (2 * half_ + 1) + static_cast<std::size_t>(j + half_)];
    }

    int up_ = 1;
    int down_ = 1;
    double cutoff_ = 1.0;
    int half_ = 0;
    std::vector<double> taps_;
};

}  // namespace hser
