#include <gtest/gtest.h>

#include <cstring>

#include "hser/audio_io.hpp"
#include "hser/dsp.hpp"
#include "hser/resample.hpp"
#include "hser/wav.hpp"
#include "support.hpp"

using namespace hser;

namespace {

void expect_matches_fixture(const std::string& name, double tol) {
    const auto& fx = testutil::oracles()["wav"][name];
    const auto sig = load_audio(testutil::data_path(name + ".wav"));
    EXPECT_EQ(sig.channels, fx["channels"].get<int>());
    EXPECT_EQ(sig.sample_rate, fx["sample_rate"].get<int>());
    const auto expected = fx["samples"].get<std::vector<double>>();
    ASSERT_EQ(sig.samples.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(sig.samples[i], expected[i], tol) << i;
}

std::string header_only_wav(std::uint16_t format, std::uint16_t bits) {
    std::string fmt(16, '\0');
    auto put16 = [&](std::size_t at, std::uint16_t v) { std::memcpy(fmt.data() + at, &v, 2); };
    auto put32 = [&](std::size_t at, std::uint32_t v) { std::memcpy(fmt.data() + at, &v, 4); };
    put16(0, format);
    put16(2, 1);
    put32(4, 16000);
    put32(8, 16000 * bits / 8);
    put16(12, bits / 8);
    put16(14, bits);
    std::string body = "WAVEfmt ";
    std::uint32_t len = 16;
    body.append(reinterpret_cast<const char*>(&len), 4);
    body += fmt;
    body += "data";
    std::uint32_t dlen = 4;
    body.append(reinterpret_cast<const char*>(&dlen), 4);
    body.append(4, '\0');
    std::uint32_t riff = static_cast<std::uint32_t>(body.size());
    return std::string("RIFF") + std::string(reinterpret_cast<const char*>(&riff), 4) + body;
}

}  // namespace

TEST(Wav, DecodesPcm16StereoFromStdlibWriter) { expect_matches_fixture("pcm16_stereo_8k", 0.0); }
TEST(Wav, DecodesPcm24Mono) { expect_matches_fixture("pcm24_mono_16k", 0.0); }
TEST(Wav, DecodesFloat32) { expect_matches_fixture("float32_mono_22k", 0.0); }

TEST(Wav, MissingFileIsFileNotFound) {
    try {
        load_audio("/nonexistent/nothing.wav");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::FileNotFound);
    }
}

TEST(Wav, RejectsNonRiffAndUnsupportedEncodings) {
    for (const std::string& bytes : {std::string("not a wav file at all........."), header_only_wav(2, 4),
                                     header_only_wav(3, 64), header_only_wav(1, 12)}) {
        try {
            decode_wav(bytes, "x");
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::UnsupportedFormat);
        }
    }
}

TEST(Wav, Encode16RoundTripsWithinQuantization) {
    auto sig = testutil::mono(testutil::sine(440.0, 0.7, 16000, 1600));
    const auto back = decode_wav(encode_wav16(sig));
    ASSERT_EQ(back.samples.size(), sig.samples.size());
    for (std::size_t i = 0; i < sig.samples.size(); ++i) EXPECT_NEAR(back.samples[i], sig.samples[i], 1.0 / 32768.0);
    // A decoded 16-bit signal re-encodes to the same bytes.
    EXPECT_EQ(encode_wav16(back), encode_wav16(decode_wav(encode_wav16(back))));
}

TEST(Resample, PreservesToneFrequencyAndLevel) {
    for (int from : {8000, 22050, 44100, 48000}) {
        const auto x = testutil::sine(1000.0, 0.5, from, static_cast<std::size_t>(from));
        PolyphaseResampler r(from, 16000);
        const auto y = r.process(x);
        EXPECT_EQ(y.size(), static_cast<std::size_t>(std::ceil(x.size() * 16000.0 / from)));
        const std::span<const double> mid(y.data() + 2000, 8000);
        EXPECT_NEAR(dsp::spectral_peak_hz(mid, 16000), 1000.0, 2.0) << from;
        EXPECT_NEAR(dsp::rms(mid), 0.5 / std::sqrt(2.0), 0.005) << from;
    }
}

TEST(Resample, AttenuatesContentAboveTargetNyquist) {
    // 7 kHz at 44.1 kHz -> 8 kHz output would alias to 1 kHz without filtering.
    const auto x = testutil::sine(7000.0, 0.5, 44100, 44100);
    const auto y = PolyphaseResampler(44100, 8000).process(x);
    const std::span<const double> mid(y.data() + 1000, 6000);
    EXPECT_LT(dsp::rms(mid), 0.005);
}

TEST(Standardize, DownmixesResamplesAndNormalizesPeak) {
    AudioSignal st;
    st.sample_rate = 48000;
    st.channels = 2;
    const auto l = testutil::sine(300.0, 0.2, 48000, 4800);
    for (double v : l) {
        st.samples.push_back(v);
        st.samples.push_back(v);
    }
    const auto out = standardize(st);
    EXPECT_EQ(out.sample_rate, 16000);
    EXPECT_EQ(out.channels, 1);
    EXPECT_EQ(out.samples.size(), 1600u);
    double peak = 0.0;
    for (double v : out.samples) peak = std::max(peak, std::abs(v));
    EXPECT_EQ(peak, 0.95);
}

TEST(Standardize, IsIdempotentBitForBit) {
    Rng rng(3);
    std::vector<double> x(4410);
    for (auto& v : x) v = rng.uniform(-0.4, 0.4);
    const auto once = standardize(testutil::mono(x, 44100));
    const auto twice = standardize(once);
    EXPECT_EQ(once.samples, twice.samples);
}

TEST(Standardize, SilenceIsFlaggedDegenerate) {
    const auto out = standardize(testutil::mono(std::vector<double>(1600, 0.0)));
    EXPECT_TRUE(out.degenerate);
    EXPECT_THROW(standardize(testutil::mono({})), Error);
}

TEST(Vad, SilenceHasNoIntervals) {
    EXPECT_TRUE(detect_voice_activity(testutil::mono(std::vector<double>(16000, 0.0))).empty());
}

TEST(Vad, FindsToneBurstsAndBridgesShortGaps) {
    // 0.5 s silence, 1 s tone, 0.03 s gap, 0.5 s tone, 1 s silence, 0.5 s tone, 0.5 s silence.
    std::vector<double> x;
    auto silence = [&](double s) { x.insert(x.end(), static_cast<std::size_t>(s * 16000), 0.0); };
    auto tone = [&](double s) {
        const auto t = testutil::sine(200.0, 0.5, 16000, static_cast<std::size_t>(s * 16000));
        x.insert(x.end(), t.begin(), t.end());
    };
    silence(0.5);
    tone(1.0);
    silence(0.03);
    tone(0.5);
    silence(1.0);
    tone(0.5);
    silence(0.5);
    const auto iv = detect_voice_activity(testutil::mono(x));
    ASSERT_EQ(iv.size(), 2u);
    EXPECT_NEAR(iv[0].start_sample / 16000.0, 0.5, 0.03);
    EXPECT_NEAR(iv[0].end_sample / 16000.0, 2.03, 0.03);
    EXPECT_NEAR(iv[1].start_sample / 16000.0, 3.03, 0.03);
    EXPECT_NEAR(iv[1].end_sample / 16000.0, 3.53, 0.03);
}

TEST(Vad, FullScaleToneSpansWholeSignal) {
    const auto x = testutil::sine(200.0, 0.5, 16000, 16000);
    const auto iv = detect_voice_activity(testutil::mono(x));
    ASSERT_EQ(iv.size(), 1u);
    EXPECT_EQ(iv[0].start_sample, 0u);
    EXPECT_EQ(iv[0].end_sample, x.size());
}

TEST(Segment, SplitsLongIntervalsAndDropsShortOnes) {
    const auto x = testutil::sine(200.0, 0.5, 16000, 16000 * 25);
    const auto sig = testutil::mono(x, 16000, "clip");
    const auto segs = segment(sig, {{0, x.size()}, {0, 4000}});
    // 25 s splits into pieces of at most 10 s; the 0.25 s interval is dropped.
    ASSERT_GE(segs.size(), 3u);
    std::size_t total = 0;
    for (const auto& s : segs) {
        EXPECT_LE(s.duration_seconds, 10.0 + 1e-9);
        EXPECT_GE(s.duration_seconds, 0.5);
        EXPECT_EQ(s.parent_id, "clip");
        total += s.signal.samples.size();
    }
    EXPECT_EQ(total, x.size());
    EXPECT_EQ(segs[0].id(0), "clip_0");
}

TEST(Segment, EmptyIntervalListGivesNoSegments) {
    EXPECT_TRUE(segment(testutil::mono(std::vector<double>(1000, 0.1)), {}).empty());
}
