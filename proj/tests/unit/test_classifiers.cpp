#include <algorithm>
#include <cmath>
#include <set>

#include "mdetect/adaboost.hpp"
#include "mdetect/forest.hpp"
#include "mdetect/knn.hpp"
#include "mdetect/model.hpp"
#include "mdetect/synthgen.hpp"
#include "mdetect/tree.hpp"
#include "mdetect/util.hpp"
#include "support.hpp"

using namespace mdetect;

namespace {

constexpr Label B = Label::Benign;
constexpr Label M = Label::Malicious;

FeatureMatrix matrix(const std::vector<std::vector<double>>& rows) {
    FeatureMatrix x(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) x.at(r, c) = rows[r][c];
    return x;
}

double accuracy(const std::vector<Label>& p, const std::vector<Label>& y) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < p.size(); ++i) ok += p[i] == y[i];
    return static_cast<double>(ok) / static_cast<double>(p.size());
}

template <typename Model>
std::vector<Label> predict_rows(const Model& m, const FeatureMatrix& x) {
    std::vector<Label> out;
    for (std::size_t r = 0; r < x.rows(); ++r) out.push_back(m.predict(x.row(r)));
    return out;
}

struct RandomTable {
    FeatureMatrix x;
    std::vector<Label> y;
};

/// Continuous features; the label depends on two of them plus noise.
RandomTable random_table(std::uint64_t seed, std::size_t rows, std::size_t cols) {
    Rng rng(seed);
    RandomTable t{FeatureMatrix(rows, cols), {}};
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) t.x.at(r, c) = rng.normal() * (1.0 + static_cast<double>(c));
        const double s = t.x.at(r, 0) - 0.5 * t.x.at(r, cols - 1) + 0.5 * rng.normal();
        t.y.push_back(s > 0.3 ? M : B);
    }
    return t;
}

/// Exhaustive root-split search: minimum summed child weighted Gini.
double best_root_impurity(const FeatureMatrix& x, const std::vector<Label>& y) {
    double best = INFINITY;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        std::set<double> values;
        for (std::size_t r = 0; r < x.rows(); ++r) values.insert(x.at(r, c));
        for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
            const double thr = 0.5 * (*it + *std::next(it));
            ClassCounts left, right;
            for (std::size_t r = 0; r < x.rows(); ++r) {
                auto& side = x.at(r, c) <= thr ? left : right;
                (y[r] == M ? side.malicious : side.benign) += 1.0;
            }
            best = std::min(best, left.weighted_gini() + right.weighted_gini());
        }
    }
    return best;
}

}  // namespace

TEST(Tree, OneDimensionalSplitAtMidpoint) {
    const auto x = matrix({{1}, {2}, {3}, {4}});
    const std::vector<Label> y{B, B, M, M};
    const auto t = fit_tree(x, y, {}, {}, 0);
    ASSERT_EQ(t.nodes().size(), 3u);
    EXPECT_EQ(t.nodes()[0].feature, 0);
    EXPECT_DOUBLE_EQ(t.nodes()[0].threshold, 2.5);
    EXPECT_EQ(accuracy(predict_rows(t, x), y), 1.0);
}

TEST(Tree, PureInputIsLeaf) {
    const auto t = fit_tree(matrix({{1, 5}, {2, 6}, {3, 7}}), std::vector<Label>{M, M, M}, {}, {}, 0);
    ASSERT_EQ(t.nodes().size(), 1u);
    EXPECT_TRUE(t.nodes()[0].is_leaf());
    EXPECT_EQ(t.predict(std::vector<double>{0, 0}), M);
}

TEST(Tree, StumpOnXorAtMostThreeQuarters) {
    const auto x = matrix({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    const std::vector<Label> y{B, M, M, B};
    // Every stump on this grid: threshold 0.5 on either axis, either leaf labeling.
    double best_possible = 0.0;
    for (std::size_t f = 0; f < 2; ++f)
        for (Label left : {B, M}) {
            std::vector<Label> p;
            for (std::size_t r = 0; r < 4; ++r) p.push_back(x.at(r, f) <= 0.5 ? left : (left == B ? M : B));
            best_possible = std::max(best_possible, accuracy(p, y));
        }
    const auto t = fit_tree(x, y, {}, TreeParams{1, 0}, 0);
    EXPECT_LE(accuracy(predict_rows(t, x), y), 0.75);
    EXPECT_LE(best_possible, 0.75);
}

TEST(Tree, TiesPreferLowerFeatureThenLowerThreshold) {
    // Column 1 duplicates column 0: feature 0 must win.
    const auto t = fit_tree(matrix({{1, 1}, {2, 2}, {3, 3}, {4, 4}}), std::vector<Label>{B, B, M, M}, {},
                            TreeParams{1, 0}, 0);
    EXPECT_EQ(t.nodes()[0].feature, 0);
    // B M B: thresholds 1.5 and 2.5 give equal impurity, the lower one wins.
    const auto u = fit_tree(matrix({{1}, {2}, {3}}), std::vector<Label>{B, M, B}, {}, TreeParams{1, 0}, 0);
    EXPECT_DOUBLE_EQ(u.nodes()[0].threshold, 1.5);
}

TEST(Tree, DepthCapAndZeroWeights) {
    const auto tab = random_table(5, 300, 4);
    for (int depth : {1, 2, 3, 5}) EXPECT_LE(fit_tree(tab.x, tab.y, {}, {depth, 0}, 1).depth(), std::size_t(depth));
    // Zero-weight rows do not influence the fit.
    std::vector<double> w(tab.x.rows(), 1.0);
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < w.size(); ++r) {
        if (r % 3 == 0) w[r] = 0.0;
        else keep.push_back(r);
    }
    const auto weighted = fit_tree(tab.x, tab.y, w, {32, 0}, 1);
    std::vector<Label> ky;
    for (auto r : keep) ky.push_back(tab.y[r]);
    const auto sub = fit_tree(tab.x.select_rows(keep), ky, {}, {32, 0}, 1);
    EXPECT_EQ(predict_rows(weighted, tab.x), predict_rows(sub, tab.x));
}

TEST(Tree, RootSplitMatchesExhaustiveSearch) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto tab = random_table(seed, 60, 3);
        for (std::size_t r = 0; r < tab.x.rows(); ++r) tab.x.at(r, 1) = std::round(tab.x.at(r, 1));
        const auto t = fit_tree(tab.x, tab.y, {}, TreeParams{1, 0}, 0);
        if (t.nodes().size() == 1) continue;
        const auto& n = t.nodes();
        const double got = n[1].counts.weighted_gini() + n[2].counts.weighted_gini();
        EXPECT_NEAR(got, best_root_impurity(tab.x, tab.y), 1e-9) << seed;
    }
}

TEST(Tree, EmptyInputAndJson) {
    EXPECT_MDETECT_ERROR(fit_tree(FeatureMatrix(0, 2), std::vector<Label>{}, {}, {}, 0), EmptyDataset);
    const auto tab = random_table(3, 100, 3);
    const auto t = fit_tree(tab.x, tab.y, {}, {}, 0);
    EXPECT_EQ(DecisionTree::from_json(t.to_json()), t);
}

TEST(Tree, StumpFitterEqualsDepthOneTree) {
    const auto tab = random_table(9, 200, 5);
    std::vector<double> w(200);
    Rng rng(1);
    for (auto& v : w) v = rng.uniform01();
    const StumpFitter fitter(tab.x, tab.y);
    EXPECT_EQ(fitter.fit(w), fit_tree(tab.x, tab.y, w, TreeParams{1, 0}, 0));
}

TEST(Forest, SingleTreeWithoutBootstrapEqualsTree) {
    const auto tab = random_table(4, 200, 5);
    const auto rf = fit_random_forest(tab.x, tab.y, {1, 32, 5, false}, 11);
    const auto t = fit_tree(tab.x, tab.y, {}, {32, 5}, mix_seed(mix_seed(11, 0), "features"));
    ASSERT_EQ(rf.trees().size(), 1u);
    EXPECT_EQ(predict_rows(rf, tab.x), predict_rows(t, tab.x));
}

TEST(Forest, VoteTieGoesBenign) {
    auto leaf = [](Label l) {
        TreeNode n;
        n.counts = l == M ? ClassCounts{0, 1} : ClassCounts{1, 0};
        return DecisionTree({n}, 1);
    };
    const RandomForest rf({leaf(M), leaf(M), leaf(B), leaf(B)}, {}, 0);
    EXPECT_EQ(rf.predict(std::vector<double>{0.0}), B);
    EXPECT_DOUBLE_EQ(rf.score(std::vector<double>{0.0}), 0.5);
}

TEST(Forest, PlantedSignalTrainingF1) {
    const auto p = planted_classification(600, 10, 20, 42, 2.0);
    const auto rf = fit_random_forest(p.x, p.y, {40, 32, 15, true}, 42);
    const auto pred = predict_rows(rf, p.x);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        tp += pred[i] == M && p.y[i] == M;
        fp += pred[i] == M && p.y[i] == B;
        fn += pred[i] == B && p.y[i] == M;
    }
    EXPECT_GE(2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn), 0.95);
}

TEST(Forest, Deterministic) {
    const auto tab = random_table(8, 150, 6);
    const auto a = fit_random_forest(tab.x, tab.y, {10, 8, 3, true}, 5);
    const auto b = fit_random_forest(tab.x, tab.y, {10, 8, 3, true}, 5);
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
    EXPECT_EQ(RandomForest::from_json(a.to_json()), a);
}

TEST(Forest, EnsembleAtLeastAsAccurateAsOneTreeOnTraining) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto p = planted_classification(300, 5, 15, seed, 1.0);
        const auto forest = fit_random_forest(p.x, p.y, {40, 32, 15, true}, seed);
        const auto single = fit_random_forest(p.x, p.y, {1, 32, 15, true}, seed);
        EXPECT_GE(accuracy(predict_rows(forest, p.x), p.y), accuracy(predict_rows(single, p.x), p.y)) << seed;
    }
}

TEST(Importance, SingleSplitForest) {
    const auto x = matrix({{5, 1}, {5, 2}, {5, 3}, {5, 4}});
    const auto rf = fit_random_forest(x, std::vector<Label>{B, B, M, M}, {1, 1, 2, false}, 0);
    const auto imp = feature_importance(rf);
    EXPECT_DOUBLE_EQ(imp[0], 0.0);
    EXPECT_DOUBLE_EQ(imp[1], 1.0);
}

TEST(Importance, SumsToOneAndRanksDescending) {
    const auto tab = random_table(12, 300, 8);
    const auto rf = fit_random_forest(tab.x, tab.y, {20, 10, 4, true}, 3);
    const auto imp = feature_importance(rf);
    double sum = 0.0;
    for (double v : imp) {
        EXPECT_GE(v, 0.0);
        sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    const auto rank = importance_ranking(rf);
    for (std::size_t i = 1; i < rank.size(); ++i) {
        EXPECT_GE(rank[i - 1].second, rank[i].second);
        if (rank[i - 1].second == rank[i].second) EXPECT_LT(rank[i - 1].first, rank[i].first);
    }
}

TEST(Importance, NoSplitsIsAllZero) {
    const auto rf = fit_random_forest(matrix({{1}, {2}}), std::vector<Label>{M, M}, {3, 5, 3, true}, 0);
    for (double v : feature_importance(rf)) EXPECT_EQ(v, 0.0);
}

TEST(Importance, PlantedInformativeRankHigh) {
    const auto p = planted_classification(1000, 10, 90, 42, 1.0);
    const auto rf = fit_random_forest(p.x, p.y, {40, 32, 15, true}, 42);
    const auto rank = importance_ranking(rf);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < 15; ++i)
        hits += std::binary_search(p.informative.begin(), p.informative.end(), rank[i].first);
    EXPECT_GE(hits, 8u);
}

TEST(AdaBoost, SeparableDataIsOneStage) {
    const auto x = matrix({{1}, {2}, {3}, {4}});
    const std::vector<Label> y{B, B, M, M};
    const auto ab = fit_adaboost(x, y, {50});
    ASSERT_EQ(ab.stages().size(), 1u);
    EXPECT_EQ(ab.stages()[0].error, 0.0);
    EXPECT_DOUBLE_EQ(ab.stages()[0].alpha, 0.5 * std::log(1e10));
    EXPECT_EQ(predict_rows(ab, x), predict_rows(ab.stages()[0].stump, x));
}

TEST(AdaBoost, QuadrantXorFitsWithinFiftyRounds) {
    const auto x = matrix({{-1.0, -0.9}, {1.1, 1.0}, {-0.8, 1.2}, {0.9, -1.1}});
    const std::vector<Label> y{B, B, M, M};
    const auto ab = fit_adaboost(x, y, {50});
    EXPECT_LE(ab.stages().size(), 50u);
    EXPECT_EQ(accuracy(predict_rows(ab, x), y), 1.0);
}

TEST(AdaBoost, StageInvariantsAndLossMonotone) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto tab = random_table(seed, 200, 4);
        const auto ab = fit_adaboost(tab.x, tab.y, {60});
        for (const auto& s : ab.stages()) {
            EXPECT_LT(s.error, 0.5);
            EXPECT_GT(s.alpha, 0.0);
        }
        const auto& loss = ab.loss_trace();
        ASSERT_EQ(loss.size(), ab.stages().size() + 1);
        for (std::size_t i = 1; i < loss.size(); ++i) EXPECT_LE(loss[i], loss[i - 1] * (1 + 1e-12));
        // Independent recomputation of the final loss from the margins.
        double mean = 0.0;
        for (std::size_t r = 0; r < tab.x.rows(); ++r)
            mean += std::exp(-(tab.y[r] == M ? 1.0 : -1.0) * ab.margin(tab.x.row(r)));
        EXPECT_NEAR(mean / static_cast<double>(tab.x.rows()), loss.back(), 1e-9 * loss.back());
    }
}

TEST(AdaBoost, ZeroMarginGoesBenignAndErrors) {
    EXPECT_EQ(AdaBoost().predict(std::vector<double>{1.0}), B);
    EXPECT_MDETECT_ERROR(fit_adaboost(matrix({{1}, {2}}), std::vector<Label>{B, B}, {10}), SingleClassInput);
    const auto tab = random_table(2, 80, 3);
    const auto ab = fit_adaboost(tab.x, tab.y, {20});
    EXPECT_EQ(AdaBoost::from_json(ab.to_json()), ab);
}

TEST(Knn, SelfIsNearest) {
    const auto tab = random_table(6, 50, 3);
    const auto knn = fit_knn(tab.x, tab.y, {1});
    EXPECT_EQ(predict_rows(knn, tab.x), tab.y);
}

TEST(Knn, HandComputedExample) {
    const auto knn = fit_knn(matrix({{0, 0}, {0, 1}, {5, 5}}), std::vector<Label>{B, B, M}, {3});
    EXPECT_EQ(knn.predict(std::vector<double>{0, 0.4}), B);
    EXPECT_MDETECT_ERROR(fit_knn(matrix({{0}, {1}}), std::vector<Label>{B, M}, {3}), KTooLarge);
    EXPECT_MDETECT_ERROR(fit_knn(matrix({{0}, {1}}), std::vector<Label>{B, M}, {0}), KTooLarge);
}

TEST(Knn, DistanceAndVoteTies) {
    // Query equidistant from rows 0 and 1: the lower index is nearer.
    const auto knn = fit_knn(matrix({{-1}, {1}, {5}}), std::vector<Label>{M, B, B}, {1});
    EXPECT_EQ(knn.neighbors(std::vector<double>{0}, 2), (std::vector<std::uint32_t>{0, 1}));
    EXPECT_EQ(knn.predict(std::vector<double>{0}), M);
    const auto two = fit_knn(matrix({{-1}, {1}}), std::vector<Label>{M, B}, {2});
    EXPECT_EQ(two.predict(std::vector<double>{0.3}), B);
}

TEST(Knn, PermutationInvariantWithDistinctDistances) {
    const auto tab = random_table(10, 120, 3);
    const auto q = random_table(11, 40, 3);
    const auto base = predict_rows(fit_knn(tab.x, tab.y, {5}), q.x);
    auto order = iota_indices(tab.x.rows());
    Rng rng(4);
    rng.shuffle(order);
    std::vector<Label> py;
    for (auto r : order) py.push_back(tab.y[r]);
    EXPECT_EQ(predict_rows(fit_knn(tab.x.select_rows(order), py, {5}), q.x), base);
}

TEST(ScalingInvariance, TreesIgnoreColumnScale) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto tab = random_table(seed, 150, 4);
        const auto probe = random_table(seed + 100, 50, 4);
        const auto rf = fit_random_forest(tab.x, tab.y, {10, 8, 2, true}, seed);
        const auto ab = fit_adaboost(tab.x, tab.y, {30});
        for (double c : {0.5, 3.0, 100.0}) {
            const std::size_t col = seed % 4;
            auto sx = tab.x;
            auto sp = probe.x;
            for (std::size_t r = 0; r < sx.rows(); ++r) sx.at(r, col) *= c;
            for (std::size_t r = 0; r < sp.rows(); ++r) sp.at(r, col) *= c;
            EXPECT_EQ(predict_rows(fit_random_forest(sx, tab.y, {10, 8, 2, true}, seed), sp), predict_rows(rf, probe.x));
            EXPECT_EQ(predict_rows(fit_adaboost(sx, tab.y, {30}), sp), predict_rows(ab, probe.x));
        }
    }
}

TEST(Model, JsonRoundTripAllKinds) {
    const auto tab = random_table(21, 120, 4);
    for (auto kind : all_classifiers()) {
        auto hp = default_hyperparameters(kind);
        hp.n_trees = 5;
        hp.n_estimators = 10;
        const auto m = fit_classifier(hp, tab.x, tab.y, 3);
        const auto back = classifier_from_json(nlohmann::json::parse(classifier_to_json(m).dump()));
        EXPECT_EQ(kind_of(back), kind);
        EXPECT_EQ(predict_all(back, tab.x), predict_all(m, tab.x));
        EXPECT_EQ(score_all(back, tab.x), score_all(m, tab.x));
    }
}

TEST(Model, ParseClassifier) {
    EXPECT_EQ(parse_classifier("rf"), ClassifierKind::RandomForest);
    EXPECT_EQ(parse_classifier("AdaBoost"), ClassifierKind::AdaBoost);
    EXPECT_EQ(parse_classifier("knn"), ClassifierKind::Knn);
    EXPECT_MDETECT_ERROR(parse_classifier("svm"), ConfigError);
}
