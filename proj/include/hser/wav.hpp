#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hser/audio_signal.hpp"
#include "hser/error.hpp"
#include "hser/text.hpp"

namespace hser {

namespace wav_detail {

inline std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace wav_detail

/// Decodes a RIFF/WAVE byte buffer. Integer PCM (8/16/24/32-bit) and 32-bit
/// float are accepted with one or two channels.
inline AudioSignal decode_wav(const std::string& bytes, const std::string& source_id = {}) {
    using namespace wav_detail;
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t size = bytes.size();
    if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0)
        throw Error(ErrorKind::UnsupportedFormat, source_id + ": not a RIFF/WAVE file");

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* pcm = nullptr;
    std::size_t pcm_bytes = 0;

    std::size_t pos = 12;
    while (pos + 8 <= size) {
        const unsigned char* chunk = data + pos;
        const std::uint32_t chunk_size = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (chunk_size < 16 || body + 16 > size)
                throw Error(ErrorKind::UnsupportedFormat, source_id + ": truncated fmt chunk");
            format = read_u16(data + body);
            channels = read_u16(data + body + 2);
            rate = read_u32(data + body + 4);
            bits = read_u16(data + body + 14);
            if (format == kFormatExtensible) {
                if (chunk_size < 40 || body + 26 > size)
                    throw Error(ErrorKind::UnsupportedFormat, source_id + ": truncated extensible fmt");
                format = read_u16(data + body + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            pcm = data + body;
            pcm_bytes = std::min<std::size_t>(chunk_size, size > body ? size - body : 0);
            break;
        }
        pos = body + chunk_size + (chunk_size & 1u);
    }
    if (!have_fmt) throw Error(ErrorKind::UnsupportedFormat, source_id + ": missing fmt chunk");
    if (pcm == nullptr) throw Error(ErrorKind::UnsupportedFormat, source_id + ": missing data chunk");
    if (channels < 1 || channels > 2)
        throw Error(ErrorKind::UnsupportedFormat,
                    source_id + ": " + std::to_string(channels) + " channels (1-2 supported)");
    if (rate == 0) throw Error(ErrorKind::UnsupportedFormat, source_id + ": zero sample rate");
    const bool int_ok = format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
    const bool float_ok = format == kFormatFloat && bits == 32;
    if (!int_ok && !float_ok)
        throw Error(ErrorKind::UnsupportedFormat,
                    source_id + ": format " + std::to_string(format) + "/" + std::to_string(bits) + " bit");

    const std::size_t bytes_per_sample = bits / 8u;
    const std::size_t frame_bytes = bytes_per_sample * channels;
    const std::size_t n = (pcm_bytes / frame_bytes) * channels;

    AudioSignal signal;
    signal.sample_rate = static_cast<int>(rate);
    signal.channels = channels;
    signal.source_id = source_id;
    signal.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* p = pcm + i * bytes_per_sample;
        double v = 0.0;
        if (float_ok) {
            v = static_cast<double>(std::bit_cast<float>(read_u32(p)));
        } else if (bits == 8) {
            v = (static_cast<int>(p[0]) - 128) / 128.0;
        } else if (bits == 16) {
            v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
        } else if (bits == 24) {
            std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
            if (s & 0x800000) s |= ~0xFFFFFF;
            v = s / 8388608.0;
        } else {
            v = static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
        }
        signal.samples[i] = std::clamp(v, -1.0, 1.0);
    }
    return signal;
}

inline AudioSignal load_audio(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::FileNotFound, path.string());
    return decode_wav(text::read_file(path), path.stem().string());
}

/// Encodes as 16-bit PCM with the same 1/32768 scale the decoder uses, so a
/// decoded file re-encodes to identical bytes. Out-of-range values clip.
inline std::string encode_wav16(const AudioSignal& signal) {
    using namespace wav_detail;
    const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);
    const auto channels = static_cast<std::uint16_t>(signal.channels);
    const auto rate = static_cast<std::uint32_t>(signal.sample_rate);
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, channels);
    put_u32(out, rate);
    put_u32(out, rate * channels * 2u);
    put_u16(out, static_cast<std::uint16_t>(channels * 2u));
    put_u16(out, 16);
    out += "data";
    put_u32(out, data_bytes);
    for (double x : signal.samples) {
        const double q = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    return out;
}

inline void save_wav16(const std::filesystem::path& path, const AudioSignal& signal) {
    text::write_file(path, encode_wav16(signal));
}

}  // namespace hser
