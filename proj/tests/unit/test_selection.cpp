#include <algorithm>
#include <cmath>

#include "mdetect/forest.hpp"
#include "mdetect/selection.hpp"
#include "mdetect/synthgen.hpp"
#include "mdetect/util.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mdetect;

namespace {

constexpr Label B = Label::Benign;
constexpr Label M = Label::Malicious;

/// Predictions that are right except at `wrong` positions.
std::vector<Label> flip_at(const std::vector<Label>& truth, const std::vector<std::size_t>& wrong) {
    auto out = truth;
    for (auto i : wrong) out[i] = out[i] == M ? B : M;
    return out;
}

CandidateResult candidate(std::size_t n_features, const std::vector<Label>& predictions,
                          const std::vector<Label>& truth, std::size_t k = 5) {
    CandidateResult c;
    c.hp = default_hyperparameters(ClassifierKind::Knn);
    c.hp.k = k;
    for (std::size_t i = 0; i < n_features; ++i) c.features.push_back("f" + std::to_string(i));
    c.predictions = predictions;
    c.test = metrics(confusion(predictions, truth));
    return c;
}

std::vector<Label> alternating_truth(std::size_t n) {
    std::vector<Label> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = i % 3 == 0 ? M : B;
    return t;
}

/// Exact two-sided binomial p-value with p = 1/2, by direct summation.
double binomial_p(std::uint64_t b, std::uint64_t c) {
    const auto n = b + c;
    const auto m = std::min(b, c);
    long double tail = 0;
    for (std::uint64_t i = 0; i <= m; ++i) {
        long double coef = 1;
        for (std::uint64_t j = 0; j < i; ++j) coef = coef * static_cast<long double>(n - j) / static_cast<long double>(j + 1);
        tail += coef;
    }
    return std::min(1.0, static_cast<double>(2 * tail / std::pow(2.0L, static_cast<long double>(n))));
}

}  // namespace

TEST(McNemar, WorkedExamples) {
    const auto r = mcnemar_from_counts(2, 10);
    EXPECT_NEAR(r.statistic, 49.0 / 12.0, 1e-12);
    EXPECT_NEAR(r.statistic, 4.083, 5e-4);
    EXPECT_TRUE(r.significant);
    const auto s = mcnemar_from_counts(5, 5);
    EXPECT_NEAR(s.statistic, 0.1, 1e-12);
    EXPECT_FALSE(s.significant);
    EXPECT_EQ(mcnemar_from_counts(0, 0).statistic, 0.0);
    EXPECT_FALSE(mcnemar_from_counts(0, 0).significant);
}

TEST(McNemar, SymmetricAndMatchesOracle) {
    for (std::uint64_t b = 0; b < 60; ++b)
        for (std::uint64_t c = 0; c < 60; ++c) {
            const auto r = mcnemar_from_counts(b, c);
            const auto t = mcnemar_from_counts(c, b);
            EXPECT_DOUBLE_EQ(r.statistic, t.statistic);
            EXPECT_EQ(r.significant, t.significant);
            EXPECT_NEAR(r.statistic, oracle::mcnemar_statistic(b, c), 1e-12);
            if (b + c == 0) continue;
            if (b + c < 25) {
                ASSERT_TRUE(r.exact_p.has_value());
                EXPECT_NEAR(*r.exact_p, binomial_p(b, c), 1e-12);
                EXPECT_EQ(r.significant, binomial_p(b, c) < 0.05);
            } else {
                EXPECT_FALSE(r.exact_p.has_value());
                EXPECT_EQ(r.significant, oracle::mcnemar_statistic(b, c) > 3.841);
            }
        }
}

TEST(McNemar, CountsDiscordantPairs) {
    const auto truth = alternating_truth(30);
    const auto a = flip_at(truth, {0, 1, 2});
    const auto b = flip_at(truth, {2, 3, 4, 5, 6});
    const auto r = mcnemar(a, b, truth);
    EXPECT_EQ(r.b, 4u);
    EXPECT_EQ(r.c, 2u);
    EXPECT_EQ(mcnemar(a, a, truth).statistic, 0.0);
    EXPECT_MDETECT_ERROR(mcnemar(a, std::vector<Label>{M}, truth), LengthMismatch);
}

TEST(Select, FewerFeaturesWinWhenNotSignificant) {
    const auto truth = alternating_truth(300);
    // A: 29 features, 20 errors. B: 10 features, 22 errors; they differ on few rows.
    std::vector<std::size_t> wa, wb;
    for (std::size_t i = 0; i < 20; ++i) wa.push_back(i * 3);
    wb = wa;
    wb.push_back(1);
    wb.push_back(4);
    const std::vector<CandidateResult> pool{candidate(29, flip_at(truth, wa), truth),
                                            candidate(10, flip_at(truth, wb), truth)};
    ASSERT_TRUE(pool[0].test.f1.value() > pool[1].test.f1.value());
    const auto out = select_least_features(pool, truth);
    EXPECT_EQ(out.best, 0u);
    EXPECT_EQ(out.equivalent, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(out.chosen, 1u);
}

TEST(Select, SignificantlyWorseSmallModelIsRejected) {
    const auto truth = alternating_truth(300);
    std::vector<std::size_t> wb;
    for (std::size_t i = 0; i < 40; ++i) wb.push_back(i * 3);
    const std::vector<CandidateResult> pool{candidate(29, truth, truth), candidate(10, flip_at(truth, wb), truth)};
    const auto out = select_least_features(pool, truth);
    EXPECT_EQ(out.chosen, 0u);
    EXPECT_TRUE(out.vs_best[1].significant);
}

TEST(Select, TiesPreferHigherF1ThenSmallerCapacity) {
    const auto truth = alternating_truth(90);
    const std::vector<CandidateResult> pool{candidate(5, flip_at(truth, {0, 3}), truth, 9),
                                            candidate(5, flip_at(truth, {0}), truth, 9),
                                            candidate(5, flip_at(truth, {0}), truth, 3)};
    const auto out = select_least_features(pool, truth);
    EXPECT_EQ(out.best, 2u);
    EXPECT_EQ(out.chosen, 2u);
    EXPECT_MDETECT_ERROR(select_least_features(std::vector<CandidateResult>{}, truth), EmptyCandidates);
}

TEST(Select, ChosenIsNeverSignificantlyWorseThanBest) {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const auto truth = alternating_truth(120);
        std::vector<CandidateResult> pool;
        const std::size_t n = 1 + rng.uniform_index(6);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::size_t> wrong;
            const double rate = 0.3 * rng.uniform01();
            for (std::size_t r = 0; r < truth.size(); ++r)
                if (rng.bernoulli(rate)) wrong.push_back(r);
            pool.push_back(candidate(1 + rng.uniform_index(40), flip_at(truth, wrong), truth));
        }
        const auto out = select_least_features(pool, truth);
        const auto& best = pool[out.best];
        for (const auto& c : pool) EXPECT_GE(best.test.f1.value(), c.test.f1.value());
        EXPECT_FALSE(mcnemar(pool[out.chosen].predictions, best.predictions, truth).significant);
        for (auto i : out.equivalent) EXPECT_GE(pool[i].features.size(), pool[out.chosen].features.size());
    }
}

TEST(Grid, FullGridSpansIntervalsAndValidates) {
    const auto g = HyperGrid::full();
    EXPECT_EQ(g.ab_estimators.front(), 5u);
    EXPECT_EQ(g.ab_estimators.back(), 400u);
    EXPECT_EQ(g.rf_trees.back(), 320u);
    EXPECT_EQ(g.rf_max_depth.front(), 3);
    EXPECT_EQ(g.rf_max_features.back(), 102u);
    EXPECT_EQ(g.knn_k.back(), 61u);
    EXPECT_NO_THROW(g.validate());
    EXPECT_NO_THROW(HyperGrid::desk().validate());
    auto bad = g;
    bad.knn_k.push_back(62);
    EXPECT_MDETECT_ERROR(bad.validate(), InvalidSpec);
    HyperGrid empty;
    EXPECT_MDETECT_ERROR(empty.candidates(ClassifierKind::AdaBoost), EmptyGrid);
    EXPECT_EQ(g.candidates(ClassifierKind::RandomForest).size(), 7u * 5u * 6u);
}

TEST(Grid, PicksArgmaxAndMatchesManualCv) {
    const auto p = planted_classification(200, 4, 6, 3, 1.5);
    const auto folds = materialize_folds(p.x, p.y, kfold(p.x.rows(), 4, 1), true);
    HyperGrid g;
    g.knn_k = {1, 5, 15};
    const auto res = grid_search_cv(g, ClassifierKind::Knn, folds, 1);
    ASSERT_EQ(res.trace.size(), 3u);
    double best = -1;
    for (const auto& pt : res.trace) {
        EXPECT_NEAR(pt.cv_f1, cv_f1(pt.hp, folds, 1), 1e-12);
        best = std::max(best, pt.cv_f1);
    }
    EXPECT_EQ(res.best_cv_f1, best);
}

TEST(Grid, ExactTieGoesToSmallerCapacity) {
    // Perfectly separable: every k in the grid scores 1.
    FeatureMatrix x(40, 1);
    std::vector<Label> y;
    for (std::size_t r = 0; r < 40; ++r) {
        x.at(r, 0) = r < 20 ? static_cast<double>(r) : 100.0 + static_cast<double>(r);
        y.push_back(r < 20 ? B : M);
    }
    const auto folds = materialize_folds(x, y, kfold(40, 4, 2), true);
    HyperGrid g;
    g.knn_k = {5, 3, 1};
    const auto res = grid_search_cv(g, ClassifierKind::Knn, folds, 0);
    EXPECT_EQ(res.best_cv_f1, 1.0);
    EXPECT_EQ(res.best.k, 1u);
}

TEST(KnnPrefix, MatchesRefitOnEachPrefix) {
    const auto p = planted_classification(150, 3, 5, 8, 1.0);
    const auto q = planted_classification(40, 3, 5, 9, 1.0);
    const std::vector<std::size_t> ranking{4, 0, 7, 2, 1, 6, 3, 5};
    const auto preds = knn_prefix_predictions(p.x, p.y, q.x, ranking, 5);
    for (std::size_t s = 1; s <= ranking.size(); ++s) {
        std::vector<std::size_t> cols(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(s));
        std::sort(cols.begin(), cols.end());
        const auto knn = fit_knn(p.x.select_columns(cols), p.y, {5});
        EXPECT_EQ(preds[s - 1], predict_all(knn, q.x.select_columns(cols))) << s;
    }
}

TEST(Rfecv, NestedSubsetsAndSmallestWithinEpsilon) {
    const auto p = planted_classification(300, 3, 9, 4, 1.5);
    const auto folds = materialize_folds(p.x, p.y, kfold(p.x.rows(), 4, 1), false);
    const auto rf = fit_random_forest(p.x, p.y, {20, 32, 12, true}, 1);
    std::vector<std::size_t> ranking;
    for (const auto& [i, _] : importance_ranking(rf)) ranking.push_back(i);
    auto hp = default_hyperparameters(ClassifierKind::AdaBoost);
    hp.n_estimators = 20;
    const auto res = rfecv(ranking, hp, folds, 1, 0.01);
    ASSERT_EQ(res.f1_by_size.size(), ranking.size());
    const double best = *std::max_element(res.f1_by_size.begin(), res.f1_by_size.end());
    EXPECT_GE(res.f1_by_size[res.selected_size - 1], best - 0.01);
    for (std::size_t s = 1; s < res.selected_size; ++s) EXPECT_LT(res.f1_by_size[s - 1], best - 0.01);
    for (std::size_t s = 1; s < ranking.size(); ++s) {
        const auto small = res.subset(s), large = res.subset(s + 1);
        EXPECT_TRUE(std::includes(large.begin(), large.end(), small.begin(), small.end()));
    }
    EXPECT_NEAR(res.f1_by_size[1], cv_f1(hp, [&] {
        auto sub = folds;
        for (auto& f : sub) {
            f.train_x = f.train_x.select_columns(res.subset(2));
            f.validate_x = f.validate_x.select_columns(res.subset(2));
        }
        return sub;
    }(), 1), 1e-12);
}

TEST(Rfecv, PlantedInformativeFeaturesRecovered) {
    const auto p = planted_classification(1000, 10, 90, 42, 1.0);
    const auto folds = materialize_folds(p.x, p.y, kfold(p.x.rows(), 4, 42), false);
    const auto rf = fit_random_forest(p.x, p.y, {40, 32, 15, true}, 42);
    std::vector<std::size_t> ranking;
    for (const auto& [i, _] : importance_ranking(rf)) ranking.push_back(i);
    auto hp = default_hyperparameters(ClassifierKind::RandomForest);
    hp.n_trees = 20;
    const auto res = rfecv(ranking, hp, folds, 42);
    const auto chosen = res.selected();
    std::size_t informative = 0;
    for (auto c : chosen) informative += std::binary_search(p.informative.begin(), p.informative.end(), c);
    EXPECT_LE(chosen.size(), 30u);
    EXPECT_GE(informative, 8u);
}
