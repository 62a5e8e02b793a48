#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace hser::dsp {

constexpr std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// In-place iterative radix-2 FFT. Size must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

/// |X[k]|^2 for k in [0, nfft/2], input zero-padded to nfft.
inline std::vector<double> power_spectrum(std::span<const double> frame, std::size_t nfft) {
    std::vector<std::complex<double>> buf(nfft);
    for (std::size_t i = 0; i < frame.size() && i < nfft; ++i) buf[i] = frame[i];
    fft(buf);
    std::vector<double> power(nfft / 2 + 1);
    for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(buf[k]);
    return power;
}

/// Periodic-free (symmetric) Hann window of length n.
inline std::vector<double> hann(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                    static_cast<double>(n - 1));
    return w;
}

inline double rms(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

/// Frequency (Hz) of the strongest bin of a Hann-windowed spectrum, refined by
/// parabolic interpolation on log magnitude.
inline double spectral_peak_hz(std::span<const double> x, int sample_rate) {
    const std::size_t nfft = next_pow2(x.size());
    const auto w = hann(x.size());
    std::vector<double> windowed(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) windowed[i] = x[i] * w[i];
    const auto p = power_spectrum(windowed, nfft);
    std::size_t best = 1;
    for (std::size_t k = 1; k + 1 < p.size(); ++k)
        if (p[k] > p[best]) best = k;
    double offset = 0.0;
    if (best > 0 && best + 1 < p.size()) {
        const double a = std::log(p[best - 1] + 1e-300), b = std::log(p[best] + 1e-300),
                     c = std::log(p[best + 1] + 1e-300);
        const double denom = a - 2.0 * b + c;
        if (denom != 0.0) offset = 0.5 * (a - c) / denom;
    }
    return (static_cast<double>(best) + offset) * sample_rate / static_cast<double>(nfft);
}

}  // namespace hser::dsp
