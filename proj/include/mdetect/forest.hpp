#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mdetect/tree.hpp"

namespace mdetect {

struct RandomForestParams {
    std::size_t n_trees = 40;
    int max_depth = 32;
    std::size_t max_features = 15;  // capped at the data width
    bool bootstrap = true;           // tests switch this off to compare with a single tree

    bool operator==(const RandomForestParams&) const = default;
};

class RandomForest {
public:
    RandomForest() = default;
    RandomForest(std::vector<DecisionTree> trees, RandomForestParams params, std::uint64_t seed)
        : trees_(std::move(trees)), params_(params), seed_(seed) {}

    const std::vector<DecisionTree>& trees() const { return trees_; }
    const RandomForestParams& params() const { return params_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t n_features() const { return trees_.empty() ? 0 : trees_.front().n_features(); }

    /// Majority vote; a tie goes to Benign.
    Label predict(std::span<const double> row) const;
    /// Share of trees voting Malicious.
    double score(std::span<const double> row) const;

    nlohmann::json to_json() const;
    static RandomForest from_json(const nlohmann::json& j);

    bool operator==(const RandomForest&) const = default;

private:
    std::vector<DecisionTree> trees_;
    RandomForestParams params_;
    std::uint64_t seed_ = 0;
};

/// Each tree sees a bootstrap sample of n draws with replacement (encoded as
/// integer row weights) and its own seed derived from `seed` and the tree
/// index. Throws EmptyDataset, InvalidSpec.
RandomForest fit_random_forest(const FeatureMatrix& x, std::span<const Label> y, const RandomForestParams& params,
                               std::uint64_t seed);

/// Mean decrease in weighted Gini impurity per feature, normalized to sum 1.
/// All zeros when no tree has a split.
std::vector<double> feature_importance(const RandomForest& forest);

/// (feature index, importance) by descending importance, ties by index.
std::vector<std::pair<std::size_t, double>> importance_ranking(const RandomForest& forest);

}  // namespace mdetect
