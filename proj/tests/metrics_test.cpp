#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ddqa/eval_seg.hpp"
#include "ddqa/metrics.hpp"
#include "oracles.hpp"

namespace ddqa {
namespace {

MetricAccumulator exact_of(const std::vector<double>& scores, const std::vector<int>& labels) {
    MetricAccumulator acc = MetricAccumulator::exact();
    for (std::size_t i = 0; i < scores.size(); ++i) acc.add(scores[i], labels[i] == 1);
    return acc;
}

TEST(Finalize, PaperStyleExamples) {
    EXPECT_NEAR(finalize(exact_of({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1})).auroc, 0.75, 1e-15);
    EXPECT_NEAR(oracle::pairwise_auroc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}), 0.75, 1e-15);

    const SegMetrics sep = finalize(exact_of({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}));
    EXPECT_DOUBLE_EQ(sep.auroc, 1.0);
    EXPECT_DOUBLE_EQ(sep.f1_max, 1.0);
    EXPECT_DOUBLE_EQ(sep.ap, 1.0);

    EXPECT_DOUBLE_EQ(finalize(exact_of({0.3, 0.3, 0.3, 0.3}, {1, 0, 0, 1})).auroc, 0.5);

    const std::vector<double> s{0.9, 0.8, 0.7, 0.1};
    const std::vector<int> l{1, 0, 1, 0};
    EXPECT_NEAR(oracle::pr_enumeration_ap(s, l), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
    EXPECT_NEAR(finalize(exact_of(s, l)).ap, (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
    EXPECT_NEAR(oracle::f1_sweep(s, l), 0.8, 1e-15);
    EXPECT_NEAR(finalize(exact_of(s, l)).f1_max, 0.8, 1e-15);
}

TEST(Finalize, DegenerateLabels) {
    EXPECT_THROW(finalize(exact_of({0.1, 0.2}, {0, 0})), DegenerateError);
    EXPECT_THROW(finalize(exact_of({0.1, 0.2}, {1, 1})), DegenerateError);
    EXPECT_THROW(finalize(MetricAccumulator::binned(16, 0, 1)), DegenerateError);
}

TEST(Finalize, MatchesBruteForceOracles) {
    std::mt19937_64 gen(1234);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + gen() % 499;
        // Coarse scores in some trials so ties are exercised.
        const bool coarse = trial % 3 == 0;
        std::vector<double> s(n);
        std::vector<int> l(n);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            l[i] = u(gen) < 0.3 ? 1 : 0;
            s[i] = coarse ? std::floor(u(gen) * 10) / 10 : u(gen) + 0.3 * l[i];
        }
        l[0] = 1;
        l[1] = 0;
        const SegMetrics m = finalize(exact_of(s, l));
        EXPECT_NEAR(m.auroc, oracle::pairwise_auroc(s, l), 1e-12);
        EXPECT_NEAR(m.ap, oracle::pr_enumeration_ap(s, l), 1e-12);
        EXPECT_NEAR(m.f1_max, oracle::f1_sweep(s, l), 1e-12);
    }
}

TEST(Finalize, StrictlyIncreasingTransformInvariance) {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(300), t(300);
        std::vector<int> l(300);
        for (std::size_t i = 0; i < s.size(); ++i) {
            l[i] = u(gen) < 0.4;
            s[i] = std::round((u(gen) + 0.2 * l[i]) * 50) / 50;
            t[i] = std::exp(3 * s[i]) + s[i] * s[i] * s[i];
        }
        l[0] = 1;
        l[1] = 0;
        const SegMetrics a = finalize(exact_of(s, l)), b = finalize(exact_of(t, l));
        EXPECT_NEAR(a.auroc, b.auroc, 1e-12);
        EXPECT_NEAR(a.f1_max, b.f1_max, 1e-12);
        EXPECT_NEAR(a.ap, b.ap, 1e-12);
    }
}

TEST(Accumulate, CountsPixels) {
    ScoreMap sm{2, 2, {0.1f, 0.2f, 0.3f, 0.4f}};
    BinaryMask gt(2, 2);
    gt.set(1, 1);
    const MetricAccumulator acc = accumulate(MetricAccumulator::binned(8, 0, 1), sm, gt);
    EXPECT_EQ(acc.positives(), 1u);
    EXPECT_EQ(acc.negatives(), 3u);
}

TEST(Accumulate, RejectsBadInput) {
    BinaryMask gt(2, 2);
    ScoreMap nan{2, 2, {0.1f, std::numeric_limits<float>::quiet_NaN(), 0.3f, 0.4f}};
    EXPECT_THROW(accumulate(MetricAccumulator::exact(), nan, gt), ConfigError);
    ScoreMap wide{3, 1, {0.1f, 0.2f, 0.3f}};
    EXPECT_THROW(accumulate(MetricAccumulator::exact(), wide, gt), DimensionError);
    ScoreMap out{2, 2, {0.1f, 2.0f, 0.3f, 0.4f}};
    EXPECT_THROW(accumulate(MetricAccumulator::binned(8, 0, 1), out, gt), ConfigError);
}

TEST(Accumulate, OrderOfImagesDoesNotMatter) {
    ScoreMap x{2, 1, {0.1f, 0.9f}}, y{2, 1, {0.5f, 0.2f}};
    BinaryMask gx(2, 1), gy(2, 1);
    gx.set(1, 0);
    gy.set(0, 0);
    const auto proto = MetricAccumulator::binned(64, 0, 1);
    const auto a = accumulate(accumulate(proto, x, gx), y, gy);
    const auto b = accumulate(accumulate(proto, y, gy), x, gx);
    EXPECT_TRUE(std::ranges::equal(a.pos_counts(), b.pos_counts()));
    EXPECT_TRUE(std::ranges::equal(a.neg_counts(), b.neg_counts()));
}

TEST(Merge, IdentityCommutativityAndConfigMismatch) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto a = MetricAccumulator::exact(), b = MetricAccumulator::exact();
    for (int i = 0; i < 200; ++i) {
        a.add(u(gen), u(gen) < 0.5);
        b.add(u(gen), u(gen) < 0.5);
    }
    const SegMetrics ma = finalize(a);
    const SegMetrics mid = finalize(merge(a, MetricAccumulator::exact()));
    EXPECT_EQ(ma.auroc, mid.auroc);
    EXPECT_EQ(ma.ap, mid.ap);
    const SegMetrics ab = finalize(merge(a, b)), ba = finalize(merge(b, a));
    EXPECT_EQ(ab.auroc, ba.auroc);
    EXPECT_EQ(ab.f1_max, ba.f1_max);
    EXPECT_EQ(ab.ap, ba.ap);

    EXPECT_THROW(merge(a, MetricAccumulator::binned(8, 0, 1)), ConfigError);
    EXPECT_THROW(merge(MetricAccumulator::binned(8, 0, 1), MetricAccumulator::binned(16, 0, 1)), ConfigError);
    EXPECT_THROW(merge(MetricAccumulator::binned(8, 0, 1), MetricAccumulator::binned(8, 0, 2)), ConfigError);
    EXPECT_THROW(MetricAccumulator::binned(8, 1, 1), ConfigError);
}

TEST(Merge, SplittingOneImageMatchesSinglePass) {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    ScoreMap sm{32, 32, {}};
    BinaryMask gt(32, 32);
    for (std::uint32_t y = 0; y < 32; ++y)
        for (std::uint32_t x = 0; x < 32; ++x) {
            const bool pos = (x - 16) * (x - 16) + (y - 16) * (y - 16) < 40;
            if (pos) gt.set(x, y);
            sm.scores.push_back(std::min(1.0f, u(gen) * 0.7f + (pos ? 0.3f : 0.0f)));
        }
    for (auto proto : {MetricAccumulator::exact(), MetricAccumulator::binned(256, 0, 1)}) {
        const SegMetrics single = finalize(accumulate(proto, sm, gt));
        auto top = proto, bottom = proto;
        const auto labels = gt.labels();
        top.add(std::span<const float>(sm.scores).first(500), labels.first(500));
        bottom.add(std::span<const float>(sm.scores).subspan(500), labels.subspan(500));
        const SegMetrics split = finalize(merge(top, bottom));
        EXPECT_NEAR(split.auroc, single.auroc, 1e-15);
        EXPECT_NEAR(split.f1_max, single.f1_max, 1e-15);
        EXPECT_NEAR(split.ap, single.ap, 1e-15);
    }
}

TEST(Binned, CloseToExactOnModerateSample) {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto exact = MetricAccumulator::exact();
    auto binned = MetricAccumulator::binned(4096, 0.0, 1.0);
    for (int i = 0; i < 100000; ++i) {
        const double s = u(gen);
        const bool l = u(gen) < s * s;
        exact.add(s, l);
        binned.add(s, l);
    }
    const SegMetrics e = finalize(exact), b = finalize(binned);
    EXPECT_NEAR(e.auroc, b.auroc, 1e-3);
    EXPECT_NEAR(e.f1_max, b.f1_max, 1e-3);
    EXPECT_NEAR(e.ap, b.ap, 1e-3);
}

TEST(Binned, TopOfRangeLandsInLastBin) {
    auto acc = MetricAccumulator::binned(4, 0.0, 1.0);
    acc.add(1.0, true);
    acc.add(0.0, false);
    EXPECT_EQ(acc.pos_counts()[3], 1u);
    EXPECT_EQ(acc.neg_counts()[0], 1u);
}

TEST(ScoreMapFile, RoundTripAndHeaderChecks) {
    ScoreMap sm{3, 2, {0.0f, -1.5f, 2.25f, 1e-8f, 7.0f, 0.5f}};
    const auto bytes = encode_score_map(sm);
    ASSERT_EQ(bytes.size(), 16u + 24u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "EIADSM01");
    EXPECT_EQ(bytes[8], 3);
    EXPECT_EQ(bytes[12], 2);
    const ScoreMap back = decode_score_map(bytes);
    EXPECT_EQ(back.width, 3u);
    EXPECT_EQ(back.scores, sm.scores);

    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_THROW(decode_score_map(truncated), DecodeError);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_score_map(bad_magic), DecodeError);
}

class EvalSeg : public ::testing::Test {
protected:
    oracle::TempDir dir{"evalseg"};
    std::vector<double> all_scores;
    std::vector<int> all_labels;

    void SetUp() override {
        std::filesystem::create_directories(dir.path() / "pred");
        std::filesystem::create_directories(dir.path() / "gt");
        std::mt19937_64 gen(3);
        std::uniform_real_distribution<float> u(0.0f, 1.0f);
        for (int img = 0; img < 5; ++img) {
            ScoreMap sm{12, 10, {}};
            BinaryMask gt(12, 10);
            for (std::uint32_t y = 0; y < 10; ++y)
                for (std::uint32_t x = 0; x < 12; ++x) {
                    const bool pos = img != 4 && x >= 3 && x < 6 + static_cast<std::uint32_t>(img) && y >= 2 && y < 5;
                    if (pos) gt.set(x, y);
                    const float s = u(gen) * 0.8f + (pos ? 0.2f : 0.0f);
                    sm.scores.push_back(s);
                    all_scores.push_back(s);
                    all_labels.push_back(pos);
                }
            const std::string stem = "img" + std::to_string(img);
            write_score_map(dir.path() / "pred" / (stem + ".bin"), sm);
            png::write_file(dir.path() / "gt" / (stem + ".png"), encode_mask(gt));
        }
    }
};

TEST_F(EvalSeg, ExactPooledMatchesOracle) {
    const auto pairs = pair_score_maps(dir.path() / "pred", dir.path() / "gt");
    ASSERT_EQ(pairs.size(), 5u);
    EvalSegOptions opt;
    opt.mode = MetricMode::Exact;
    opt.threads = 3;
    const SegMetrics m = evaluate_score_maps(pairs, opt).metrics;
    EXPECT_NEAR(m.auroc, oracle::pairwise_auroc(all_scores, all_labels), 1e-12);
    EXPECT_NEAR(m.ap, oracle::pr_enumeration_ap(all_scores, all_labels), 1e-12);
    EXPECT_NEAR(m.f1_max, oracle::f1_sweep(all_scores, all_labels), 1e-12);

    opt.mode = MetricMode::Binned;
    const SegMetrics b = evaluate_score_maps(pairs, opt).metrics;
    EXPECT_EQ(b.pixels_pos, m.pixels_pos);
    EXPECT_NEAR(b.auroc, m.auroc, 5e-3);
}

TEST_F(EvalSeg, PerImageSkipsImagesWithoutDefects) {
    EvalSegOptions opt;
    opt.mode = MetricMode::Exact;
    opt.pooling = Pooling::PerImage;
    const auto r = evaluate_score_maps(pair_score_maps(dir.path() / "pred", dir.path() / "gt"), opt);
    EXPECT_EQ(r.images, 5u);
    EXPECT_EQ(r.images_averaged, 4u);
}

TEST_F(EvalSeg, MissingMaskIsAnError) {
    std::filesystem::remove(dir.path() / "gt" / "img2.png");
    EXPECT_THROW(pair_score_maps(dir.path() / "pred", dir.path() / "gt"), IoError);
}

TEST(EvalSegFormat, SixDecimals) {
    SegMetrics m{0.75, 0.8, 5.0 / 6.0, 2, 2};
    EXPECT_EQ(format_seg_metrics_json(m),
              R"({"auroc":0.750000, "f1_max":0.800000, "ap":0.833333, "pixels_pos":2, "pixels_neg":2})");
}

}  // namespace
}  // namespace ddqa
