#include <gtest/gtest.h>

#include "hser/corpus.hpp"
#include "hser/features.hpp"
#include "support.hpp"

using namespace hser;

namespace {

std::vector<ManifestEntry> paper_sized_manifest() {
    std::vector<ManifestEntry> out;
    const std::array<int, 3> counts{942, 980, 842};  // angry, calm, panic
    for (auto l : kAllLabels)
        for (int i = 0; i < counts[index_of(l)]; ++i)
            out.push_back({.sample_id = std::string(to_string(l)) + std::to_string(i), .audio_path = "x.wav", .gold = l});
    return out;
}

std::array<long, 4> split_sizes(const std::vector<ManifestEntry>& es) {
    std::array<long, 4> n{};
    for (const auto& e : es) ++n[static_cast<std::size_t>(e.split)];
    return n;
}

double mean_feature(const SynthRecipe& r, EmotionLabel l, std::size_t d, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += extract_features(synthesize_sample(r, l, i).signal)[d];
    return s / n;
}

}  // namespace

TEST(Manifest, CsvHeaderDrivenWithOptionalColumns) {
    const auto es = parse_manifest_csv(
        "audio_path,sample_id,gold,split\n"
        "a.wav,a,angry,set1\n"
        "b.wav,b,,test\n");
    ASSERT_EQ(es.size(), 2u);
    EXPECT_EQ(es[0].sample_id, "a");
    EXPECT_EQ(es[0].gold, EmotionLabel::angry);
    EXPECT_EQ(es[0].split, Split::set1);
    EXPECT_FALSE(es[1].gold.has_value());
    EXPECT_EQ(es[1].split, Split::test);
}

TEST(Manifest, CsvAndJsonlRoundTrip) {
    std::vector<ManifestEntry> es{
        {"s1", "audio/s1.wav", EmotionLabel::panic, {EmotionLabel::panic, EmotionLabel::angry, EmotionLabel::panic},
         Split::set2, SourceKind::movie, 2.5},
        {"s2", "audio/s2.wav", std::nullopt, {}, Split::unassigned, SourceKind::interview, 0.0},
    };
    for (const auto& back : {parse_manifest_csv(manifest_to_csv(es)), parse_manifest_jsonl(manifest_to_jsonl(es))}) {
        ASSERT_EQ(back.size(), 2u);
        EXPECT_EQ(back[0].annotators, es[0].annotators);
        EXPECT_EQ(back[0].source_kind, SourceKind::movie);
        EXPECT_EQ(back[0].duration_s, 2.5);
        EXPECT_EQ(back[1].gold, std::nullopt);
        EXPECT_EQ(manifest_to_csv(back), manifest_to_csv(es));
    }
    const auto dir = testutil::scratch_dir("manifest_io");
    save_manifest(dir / "m.jsonl", es);
    const auto m = load_manifest(dir / "m.jsonl");
    EXPECT_EQ(m.base_dir, dir);
    EXPECT_EQ(m.audio_path(m.entries[0]), dir / "audio/s1.wav");
}

TEST(Manifest, SchemaErrorsCarryLineNumbers) {
    auto message = [](const std::string& csv) {
        try {
            parse_manifest_csv(csv, "m.csv");
        } catch (const Error& e) {
            return std::pair<ErrorKind, std::string>{e.kind(), e.what()};
        }
        return std::pair<ErrorKind, std::string>{ErrorKind::IoError, ""};
    };
    EXPECT_EQ(message("sample_id,gold\na,calm\n").first, ErrorKind::SchemaError);
    auto bad_label = message("sample_id,audio_path,gold\na,a.wav,calm\nb,b.wav,happy\n");
    EXPECT_EQ(bad_label.first, ErrorKind::SchemaError);
    EXPECT_NE(bad_label.second.find("m.csv:3"), std::string::npos);
    EXPECT_EQ(message("sample_id,audio_path,split\na,a.wav,set9\n").first, ErrorKind::SchemaError);
    EXPECT_EQ(message("sample_id,audio_path\na,a.wav\na,b.wav\n").first, ErrorKind::DuplicateId);
    EXPECT_THROW(parse_manifest_jsonl("{\"sample_id\":\"a\"}\n"), Error);
}

TEST(Split, ReproducesPaperSplitSizes) {
    const auto es = stratified_split(paper_sized_manifest(), {}, 42);
    const auto n = split_sizes(es);
    const std::array<long, 4> want{706, 691, 696, 671};
    for (std::size_t s = 0; s < 4; ++s) EXPECT_LE(std::abs(n[s] - want[s]), 2) << s;
    EXPECT_EQ(n[0] + n[1] + n[2] + n[3], 2764);
}

TEST(Split, ClassProportionsHoldToOneSample) {
    const auto es = stratified_split(paper_sized_manifest(), {}, 7);
    const SplitFractions f;
    const std::array<double, 3> counts{942, 980, 842};
    for (auto l : kAllLabels) {
        std::array<long, 4> n{};
        for (const auto& e : es)
            if (e.gold == l) ++n[static_cast<std::size_t>(e.split)];
        for (std::size_t s = 0; s < 4; ++s) EXPECT_LE(std::abs(n[s] - counts[index_of(l)] * f.values[s]), 1.0 + 1e-9);
    }
}

TEST(Split, DeterministicPerSeed) {
    const auto a = stratified_split(paper_sized_manifest(), {}, 5);
    const auto b = stratified_split(paper_sized_manifest(), {}, 5);
    const auto c = stratified_split(paper_sized_manifest(), {}, 6);
    EXPECT_EQ(manifest_to_csv(a), manifest_to_csv(b));
    EXPECT_NE(manifest_to_csv(a), manifest_to_csv(c));
    EXPECT_EQ(split_sizes(a), split_sizes(c));
}

TEST(Split, Errors) {
    auto es = paper_sized_manifest();
    es[10].gold.reset();
    try {
        stratified_split(es, {}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingGold);
    }
    try {
        stratified_split(paper_sized_manifest(), {{0.5, -0.1, 0.3, 0.3}}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    }
    EXPECT_TRUE(stratified_split({}, {}, 1).empty());
}

TEST(Synth, EmptyCorpus) {
    SynthRecipe r;
    r.n_per_class = 0;
    const auto dir = testutil::scratch_dir("synth_empty");
    EXPECT_TRUE(generate_synthetic_corpus(r, dir).empty());
    EXPECT_TRUE(load_manifest(dir / "manifest.csv").entries.empty());
}

TEST(Synth, SameSeedGivesIdenticalFiles) {
    SynthRecipe r;
    r.n_per_class = 2;
    r.seed = 13;
    const auto a = testutil::scratch_dir("synth_a"), b = testutil::scratch_dir("synth_b");
    const auto ea = generate_synthetic_corpus(r, a);
    generate_synthetic_corpus(r, b);
    ASSERT_EQ(ea.size(), 6u);
    EXPECT_EQ(text::read_file(a / "manifest.csv"), text::read_file(b / "manifest.csv"));
    for (const auto& e : ea) EXPECT_EQ(text::read_file(a / e.audio_path), text::read_file(b / e.audio_path)) << e.sample_id;
    r.seed = 14;
    EXPECT_NE(synthesize_sample(r, EmotionLabel::calm, 0).signal.samples,
              synthesize_sample(SynthRecipe{.seed = 13}, EmotionLabel::calm, 0).signal.samples);
    const auto loaded = load_audio(a / ea[0].audio_path);
    EXPECT_EQ(loaded.sample_rate, 16000);
    EXPECT_EQ(loaded.samples.size(), 16000u);
}

TEST(Synth, ClassCueOrderingMatchesRecipe) {
    SynthRecipe r;
    r.seed = 3;
    const int n = 6;
    const double ps_angry = mean_feature(r, EmotionLabel::angry, dim::pitch_std, n);
    const double ps_calm = mean_feature(r, EmotionLabel::calm, dim::pitch_std, n);
    const double ps_panic = mean_feature(r, EmotionLabel::panic, dim::pitch_std, n);
    EXPECT_GT(ps_panic, ps_angry);
    EXPECT_GT(ps_angry, ps_calm);
    const double pm_calm = mean_feature(r, EmotionLabel::calm, dim::pitch_mean, n);
    const double pm_angry = mean_feature(r, EmotionLabel::angry, dim::pitch_mean, n);
    EXPECT_NEAR(pm_calm, 130.0, 15.0);
    EXPECT_NEAR(pm_angry, 240.0, 25.0);
    EXPECT_GT(mean_feature(r, EmotionLabel::angry, dim::energy_mean, n),
              mean_feature(r, EmotionLabel::calm, dim::energy_mean, n));
}

TEST(Synth, OverlapDialBlendsAngryAndPanic) {
    SynthRecipe r;
    int blended0 = 0, blended1 = 0;
    for (int i = 0; i < 20; ++i) {
        for (auto l : kAllLabels) {
            r.overlap = 0.0;
            blended0 += synthesize_sample(r, l, i).blended;
            r.overlap = 1.0;
            const auto s = synthesize_sample(r, l, i);
            blended1 += s.blended;
            if (s.blended) {
                EXPECT_NE(l, EmotionLabel::calm);
                EXPECT_GE(s.blend_weight, r.blend_min);
                EXPECT_LE(s.blend_weight, r.blend_max);
            }
        }
    }
    EXPECT_EQ(blended0, 0);
    EXPECT_EQ(blended1, 40);
    // Blending pulls panic's pitch variability toward angry's.
    r.overlap = 0.0;
    const double clean = mean_feature(r, EmotionLabel::panic, dim::pitch_std, 6);
    r.overlap = 1.0;
    const double mixed = mean_feature(r, EmotionLabel::panic, dim::pitch_std, 6);
    EXPECT_LT(mixed, clean);
}

TEST(Synth, PlantedRecipeOnlyMovesPanicPitchVariability) {
    const auto r = planted_error_recipe(11, 10, 1.0);
    for (int i = 0; i < 10; ++i) {
        EXPECT_FALSE(synthesize_sample(r, EmotionLabel::angry, i).blended);
        const auto p = synthesize_sample(r, EmotionLabel::panic, i);
        EXPECT_TRUE(p.blended);
        EXPECT_GE(p.blend_weight, 0.8);
    }
    EXPECT_EQ(r.recipe(EmotionLabel::angry).energy_level, r.recipe(EmotionLabel::panic).energy_level);
    EXPECT_EQ(r.recipe(EmotionLabel::angry).base_pitch_hz, r.recipe(EmotionLabel::panic).base_pitch_hz);
}

TEST(Synth, AnnotatorsMostlyAgreeWithGold) {
    SynthRecipe r;
    r.n_per_class = 30;
    r.annotator_error_rate = 0.1;
    const auto dir = testutil::scratch_dir("synth_ann");
    const auto es = generate_synthetic_corpus(r, dir);
    int wrong = 0, total = 0;
    for (const auto& e : es)
        for (const auto& a : e.annotators) {
            ++total;
            wrong += *a != *e.gold;
        }
    EXPECT_GT(wrong, 0);
    EXPECT_LT(wrong, total / 4);
}
