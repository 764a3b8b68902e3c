#include "mdetect/forest.hpp"

#include <algorithm>
#include <numeric>

#include "mdetect/error.hpp"
#include "mdetect/util.hpp"

namespace mdetect {

Label RandomForest::predict(std::span<const double> row) const {
    std::size_t votes = 0;
    for (const auto& t : trees_) votes += t.predict(row) == Label::Malicious ? 1 : 0;
    return 2 * votes > trees_.size() ? Label::Malicious : Label::Benign;
}

double RandomForest::score(std::span<const double> row) const {
    if (trees_.empty()) return 0.0;
    std::size_t votes = 0;
    for (const auto& t : trees_) votes += t.predict(row) == Label::Malicious ? 1 : 0;
    return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

nlohmann::json RandomForest::to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    return {{"n_trees", params_.n_trees},
            {"max_depth", params_.max_depth},
            {"max_features", params_.max_features},
            {"bootstrap", params_.bootstrap},
            {"seed", seed_},
            {"trees", trees}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
    RandomForestParams p;
    p.n_trees = j.at("n_trees").get<std::size_t>();
    p.max_depth = j.at("max_depth").get<int>();
    p.max_features = j.at("max_features").get<std::size_t>();
    p.bootstrap = j.at("bootstrap").get<bool>();
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(DecisionTree::from_json(t));
    return RandomForest(std::move(trees), p, j.at("seed").get<std::uint64_t>());
}

RandomForest fit_random_forest(const FeatureMatrix& x, std::span<const Label> y, const RandomForestParams& params,
                               std::uint64_t seed) {
    if (x.rows() == 0) fail(ErrorCode::EmptyDataset, "cannot fit a forest on zero rows");
    if (params.n_trees == 0) fail(ErrorCode::InvalidSpec, "a forest needs at least one tree");
    const TreeParams tree_params{params.max_depth, params.max_features};
    const std::size_t n = x.rows();
    std::vector<DecisionTree> trees;
    trees.reserve(params.n_trees);
    const SortedColumns sorted(x);
    std::vector<double> weights;
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        const std::uint64_t tree_seed = mix_seed(seed, t);
        if (params.bootstrap) {
            weights.assign(n, 0.0);
            Rng rng(mix_seed(tree_seed, "bootstrap"));
            for (std::size_t i = 0; i < n; ++i) weights[rng.uniform_index(n)] += 1.0;
        } else {
            weights.clear();
        }
        trees.push_back(fit_tree(x, y, weights, tree_params, mix_seed(tree_seed, "features"), &sorted));
    }
    return RandomForest(std::move(trees), params, seed);
}

std::vector<double> feature_importance(const RandomForest& forest) {
    std::vector<double> imp(forest.n_features(), 0.0);
    for (const auto& t : forest.trees()) t.accumulate_importance(imp);
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0.0)
        for (auto& v : imp) v /= total;
    return imp;
}

std::vector<std::pair<std::size_t, double>> importance_ranking(const RandomForest& forest) {
    const auto imp = feature_importance(forest);
    std::vector<std::pair<std::size_t, double>> ranking;
    for (std::size_t i = 0; i < imp.size(); ++i) ranking.emplace_back(i, imp[i]);
    std::stable_sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return ranking;
}

}  // namespace mdetect
