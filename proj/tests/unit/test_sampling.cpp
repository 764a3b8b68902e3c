#include <set>

#include "mdetect/sampling.hpp"
#include "mdetect/util.hpp"
#include "support.hpp"

using namespace mdetect;
using testing_support::small_dataset;

namespace {

Dataset labeled(std::size_t benign, std::size_t malicious, std::size_t users = 4) {
    std::vector<std::vector<double>> rows;
    std::vector<Label> labels;
    std::vector<std::string> user_ids;
    for (std::size_t i = 0; i < benign + malicious; ++i) {
        rows.push_back({static_cast<double>(i)});
        labels.push_back(i < benign ? Label::Benign : Label::Malicious);
        user_ids.push_back("u" + std::to_string(i % users));
    }
    return small_dataset(rows, labels, user_ids);
}

}  // namespace

TEST(Undersample, NineToOneFromMaliciousMajority) {
    const auto r = undersample(labeled(1000, 9000), {0.9, 1});
    EXPECT_EQ(r.dataset.count(Label::Benign), 1000u);
    EXPECT_EQ(r.dataset.count(Label::Malicious), 111u);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Undersample, AlreadyAtTarget) {
    const auto r = undersample(labeled(900, 100), {0.9, 1});
    EXPECT_EQ(r.dataset.count(Label::Benign), 900u);
    EXPECT_EQ(r.dataset.count(Label::Malicious), 100u);
}

TEST(Undersample, TooFewMaliciousKeepsAllAndWarns) {
    const auto r = undersample(labeled(900, 10), {0.9, 1});
    EXPECT_EQ(r.dataset.count(Label::Malicious), 10u);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(Undersample, SameSeedSameRows) {
    const auto d = labeled(500, 3000);
    const auto a = undersample(d, {0.9, 77});
    const auto b = undersample(d, {0.9, 77});
    const auto c = undersample(d, {0.9, 78});
    EXPECT_EQ(a.kept_rows, b.kept_rows);
    EXPECT_NE(a.kept_rows, c.kept_rows);
}

TEST(Undersample, Errors) {
    EXPECT_MDETECT_ERROR(undersample(labeled(0, 10), {0.9, 1}), NoBenignRows);
    EXPECT_MDETECT_ERROR(undersample(labeled(10, 10), {1.0, 1}), InvalidSpec);
    EXPECT_MDETECT_ERROR(undersample(labeled(10, 10), {0.0, 1}), InvalidSpec);
}

TEST(Undersample, PerVersionHoldsInEveryGroup) {
    std::vector<std::vector<double>> rows;
    std::vector<Label> labels;
    std::vector<int> versions;
    for (int v : {1, 2, 3}) {
        const std::size_t benign = 90 * static_cast<std::size_t>(v);
        for (std::size_t i = 0; i < benign + 1000; ++i) {
            rows.push_back({static_cast<double>(rows.size())});
            labels.push_back(i < benign ? Label::Benign : Label::Malicious);
            versions.push_back(v);
        }
    }
    const auto r = undersample(small_dataset(rows, labels, {}, versions), {0.9, 5, true});
    for (int v : {1, 2, 3}) {
        std::size_t b = 0, m = 0;
        for (std::size_t i = 0; i < r.dataset.size(); ++i) {
            if (r.dataset.meta()[i].malware_version != v) continue;
            (r.dataset.labels()[i] == Label::Benign ? b : m)++;
        }
        EXPECT_EQ(b, 90u * static_cast<std::size_t>(v));
        EXPECT_EQ(m, 10u * static_cast<std::size_t>(v));
    }
}

TEST(UndersampleProperty, BenignFractionWithinOneRow) {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t benign = 1 + rng.uniform_index(2000);
        const double f = 0.5 + 0.45 * rng.uniform01();
        const std::size_t malicious = malicious_quota(benign, f) + rng.uniform_index(3000);
        const auto r = undersample(labeled(benign, malicious), {f, rng.next()});
        const double total = static_cast<double>(r.dataset.size());
        const double ideal_benign = f * total;
        EXPECT_LE(std::abs(static_cast<double>(r.dataset.count(Label::Benign)) - ideal_benign), 1.0)
            << benign << " " << f;
    }
}

TEST(HoldoutSplit, NormalFraction) {
    const auto s = holdout_split(labeled(500, 500), {0.25, SplitMode::NormalHoldout, 3});
    EXPECT_NEAR(static_cast<double>(s.test.size()), 250.0, 1.0);
    EXPECT_NEAR(static_cast<double>(s.train.size()), 750.0, 1.0);
    std::set<std::size_t> all(s.train_rows.begin(), s.train_rows.end());
    all.insert(s.test_rows.begin(), s.test_rows.end());
    EXPECT_EQ(all.size(), 1000u);
}

TEST(HoldoutSplit, UnknownDeviceDisjointUsers) {
    const auto d = labeled(600, 400, 47);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = holdout_split(d, {0.25, SplitMode::UnknownDevice, seed});
        std::set<std::string> train_users, test_users;
        for (const auto& m : s.train.meta()) train_users.insert(m.user_id);
        for (const auto& m : s.test.meta()) test_users.insert(m.user_id);
        for (const auto& u : test_users) EXPECT_EQ(train_users.count(u), 0u) << u;
        EXPECT_GE(static_cast<double>(s.test.size()), 0.25 * 1000);
        EXPECT_FALSE(s.train.empty());
    }
}

TEST(HoldoutSplit, Errors) {
    EXPECT_MDETECT_ERROR(holdout_split(labeled(10, 10, 1), {0.25, SplitMode::UnknownDevice, 1}), TooFewUsers);
    EXPECT_MDETECT_ERROR(holdout_split(labeled(0, 0), {0.25, SplitMode::NormalHoldout, 1}), EmptyDataset);
}

TEST(HoldoutSplit, Deterministic) {
    const auto d = labeled(300, 300, 9);
    for (auto mode : {SplitMode::NormalHoldout, SplitMode::UnknownDevice}) {
        EXPECT_EQ(holdout_split(d, {0.25, mode, 9}).test_rows, holdout_split(d, {0.25, mode, 9}).test_rows);
    }
}

TEST(Kfold, EqualFolds) {
    const auto folds = kfold(100, 4, 1);
    ASSERT_EQ(folds.size(), 4u);
    std::vector<int> seen(100, 0);
    for (const auto& f : folds) {
        EXPECT_EQ(f.validate.size(), 25u);
        EXPECT_EQ(f.train.size(), 75u);
        for (auto r : f.validate) ++seen[r];
    }
    for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Kfold, RemainderGoesToFirstFolds) {
    const auto folds = kfold(10, 4, 1);
    std::vector<std::size_t> sizes;
    for (const auto& f : folds) sizes.push_back(f.validate.size());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 2, 2}));
}

TEST(Kfold, UnionIsTrainAndErrors) {
    for (const auto& f : kfold(37, 5, 4)) {
        std::set<std::size_t> all(f.train.begin(), f.train.end());
        for (auto r : f.validate) EXPECT_TRUE(all.insert(r).second);
        EXPECT_EQ(all.size(), 37u);
    }
    EXPECT_MDETECT_ERROR(kfold(3, 4, 1), TooFewRows);
    EXPECT_MDETECT_ERROR(kfold(30, 1, 1), InvalidSpec);
}

TEST(Scaler, MinMaxFormula) {
    const FeatureMatrix train(3, 1, std::vector<double>{2, 4, 6});
    const auto s = MinMaxScaler::fit(train);
    const auto t = s.transform(train);
    EXPECT_EQ(t.at(0, 0), 0.0);
    EXPECT_EQ(t.at(1, 0), 0.5);
    EXPECT_EQ(t.at(2, 0), 1.0);
    EXPECT_EQ(s.transform(0, 10.0), 1.0);
    EXPECT_EQ(s.transform(0, -3.0), 0.0);
}

TEST(Scaler, ConstantColumnMapsToZero) {
    const FeatureMatrix train(3, 1, std::vector<double>{7, 7, 7});
    const auto t = MinMaxScaler::fit(train).transform(train);
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(t.at(r, 0), 0.0);
    EXPECT_MDETECT_ERROR(MinMaxScaler::fit(FeatureMatrix(0, 1)), EmptyTrainingSet);
}

TEST(Scaler, FitOnTrainDiffersFromFitOnAllWhenTestExtendsRange) {
    const FeatureMatrix train(2, 1, std::vector<double>{0, 10});
    const FeatureMatrix both(3, 1, std::vector<double>{0, 10, 20});
    const auto a = MinMaxScaler::fit(train);
    const auto b = MinMaxScaler::fit(both);
    EXPECT_NE(a.transform(0, 5.0), b.transform(0, 5.0));
}

TEST(Scaler, JsonRoundTrip) {
    const auto s = MinMaxScaler::fit(FeatureMatrix(2, 2, std::vector<double>{1, 2, 3, 8}));
    const auto back = MinMaxScaler::from_json(s.to_json());
    EXPECT_EQ(back.min(), s.min());
    EXPECT_EQ(back.max(), s.max());
}

TEST(Impute, MedianOfTrain) {
    const auto train = small_dataset({{1.0}, {kMissing}, {3.0}}, {Label::Benign, Label::Benign, Label::Malicious});
    const auto test = small_dataset({{kMissing}}, {Label::Benign});
    const auto r = impute(train, {test});
    EXPECT_EQ(r.train.features().at(1, 0), 2.0);
    EXPECT_EQ(r.others[0].features().at(0, 0), 2.0);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Impute, NoMissingIsIdentity) {
    const auto train = small_dataset({{1.0, 5.0}, {2.0, 6.0}}, {Label::Benign, Label::Malicious});
    const auto r = impute(train, {train});
    EXPECT_EQ(r.train, train);
    EXPECT_EQ(r.others[0], train);
}

TEST(Impute, AllMissingColumnIsZeroWithWarning) {
    const auto train = small_dataset({{kMissing, 1.0}, {kMissing, 2.0}}, {Label::Benign, Label::Malicious});
    const auto r = impute(train, {});
    EXPECT_EQ(r.train.features().at(0, 0), 0.0);
    EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Impute, UsesTrainOnly) {
    const auto train = small_dataset({{1.0}, {3.0}, {kMissing}}, {Label::Benign, Label::Benign, Label::Benign});
    const auto test = small_dataset({{100.0}, {kMissing}}, {Label::Benign, Label::Benign});
    const auto r = impute(train, {test});
    EXPECT_EQ(r.others[0].features().at(1, 0), 2.0);
}
