#include <cmath>

#include "mdetect/metrics.hpp"
#include "mdetect/util.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mdetect;

namespace {

constexpr Label B = Label::Benign;
constexpr Label M = Label::Malicious;

void expect_same(const Fraction& got, const oracle::Rational& want) {
    if (want.degenerate) {
        EXPECT_TRUE(got.degenerate());
        EXPECT_EQ(got.value(), 0.0);
        return;
    }
    ASSERT_FALSE(got.degenerate());
    EXPECT_TRUE(got.same_value(Fraction{want.num, want.den})) << got.num << "/" << got.den;
}

}  // namespace

TEST(Metrics, WorkedExample) {
    const auto m = metrics(ConfusionCounts{3, 1, 5, 1});
    EXPECT_TRUE(m.accuracy.same_value({8, 10}));
    EXPECT_TRUE(m.precision.same_value({3, 4}));
    EXPECT_TRUE(m.recall.same_value({3, 4}));
    EXPECT_TRUE(m.f1.same_value({3, 4}));
    EXPECT_TRUE(m.fpr.same_value({1, 6}));
    EXPECT_TRUE(m.fnr.same_value({1, 4}));
    EXPECT_TRUE(m.degenerate.empty());
}

TEST(Metrics, ConfusionFromLabels) {
    const std::vector<Label> pred{M, M, B, B, M}, truth{M, B, B, M, M};
    EXPECT_EQ(confusion(pred, truth), (ConfusionCounts{2, 1, 1, 1}));
    EXPECT_MDETECT_ERROR(confusion(std::vector<Label>{M}, truth), LengthMismatch);
}

TEST(Metrics, DegenerateDenominatorsReportZero) {
    // No positives predicted and none present.
    const auto m = metrics(ConfusionCounts{0, 0, 7, 0});
    EXPECT_TRUE(m.precision.degenerate());
    EXPECT_TRUE(m.recall.degenerate());
    EXPECT_TRUE(m.f1.degenerate());
    EXPECT_TRUE(m.fnr.degenerate());
    EXPECT_EQ(m.f1.value(), 0.0);
    EXPECT_EQ(m.degenerate, (std::vector<std::string>{"precision", "recall", "f1", "fnr"}));
    EXPECT_MDETECT_ERROR(metrics(ConfusionCounts{}), EmptyEvaluation);
}

TEST(Metrics, MatchesRationalOracleOnRandomVectors) {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(200);
        std::vector<Label> pred(n), truth(n);
        const double p_pos = rng.uniform01(), p_hit = rng.uniform01();
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = rng.bernoulli(p_pos) ? M : B;
            pred[i] = rng.bernoulli(p_hit) ? truth[i] : (truth[i] == M ? B : M);
        }
        const auto m = metrics(confusion(pred, truth));
        const auto o = oracle::metrics(oracle::tally(pred, truth));
        expect_same(m.accuracy, o.accuracy);
        expect_same(m.precision, o.precision);
        expect_same(m.recall, o.recall);
        expect_same(m.f1, o.f1);
        expect_same(m.fpr, o.fpr);
        expect_same(m.fnr, o.fnr);
        for (const Fraction* f : {&m.accuracy, &m.precision, &m.recall, &m.f1, &m.fpr, &m.fnr}) {
            EXPECT_GE(f->value(), 0.0);
            EXPECT_LE(f->value(), 1.0);
        }
        if (!m.fpr.degenerate() && !m.fnr.degenerate()) {
            const auto& c = m.counts;
            EXPECT_EQ(c.tp + c.fp + c.tn + c.fn, n);
        }
    }
}

TEST(Metrics, JsonRoundTrip) {
    auto m = metrics(ConfusionCounts{40, 3, 500, 9});
    m.n_features = 12;
    m.train_seconds = 1.25;
    m.test_seconds = 0.5;
    const auto back = MetricsReport::from_json(m.to_json());
    EXPECT_EQ(back.counts, m.counts);
    EXPECT_EQ(back.f1, m.f1);
    EXPECT_EQ(back.n_features, 12u);
    EXPECT_EQ(back.train_seconds, 1.25);
    EXPECT_FALSE(m.to_json(false).contains("train_seconds"));
}

TEST(Metrics, MeanStdevMatchesOracle) {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(rng.uniform_index(12));
        for (auto& x : v) x = rng.uniform01();
        const auto got = mean_stdev(v);
        const auto [mean, sd] = oracle::mean_stdev(v);
        EXPECT_NEAR(got.mean, mean, 1e-12);
        EXPECT_NEAR(got.stdev, sd, 1e-12);
    }
    const std::vector<double> one{0.4};
    EXPECT_EQ(mean_stdev(one).stdev, 0.0);
}

TEST(Metrics, TimedReturnsResultAndDuration) {
    auto [value, seconds] = timed([] { return 42; });
    EXPECT_EQ(value, 42);
    EXPECT_GE(seconds, 0.0);
    EXPECT_GE(timed([] {}), 0.0);
}
