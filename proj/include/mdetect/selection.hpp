#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdetect/metrics.hpp"
#include "mdetect/model.hpp"
#include "mdetect/sampling.hpp"

namespace mdetect {

/// Candidate values per classifier. Allowed intervals: estimators [5, 400],
/// trees [5, 320], depth [3, 320], max_features [3, 102], k [1, 61].
struct HyperGrid {
    std::vector<std::size_t> ab_estimators;
    std::vector<std::size_t> rf_trees;
    std::vector<int> rf_max_depth;
    std::vector<std::size_t> rf_max_features;
    std::vector<std::size_t> knn_k;

    /// Log-spaced values spanning each interval end to end.
    static HyperGrid full();
    /// A small grid that keeps a desk-scale matrix in minutes.
    static HyperGrid desk();

    /// Throws InvalidSpec for a value outside its interval.
    void validate() const;
    /// Throws EmptyGrid when the kind has no candidates.
    std::vector<Hyperparameters> candidates(ClassifierKind kind) const;

    nlohmann::json to_json() const;
};

/// Training and validation parts of one fold, materialized once. For KNN
/// the scaler is fit on the fold's training part only.
struct FoldData {
    FeatureMatrix train_x, validate_x;
    std::vector<Label> train_y, validate_y;
};

std::vector<FoldData> materialize_folds(const FeatureMatrix& x, std::span<const Label> y,
                                        std::span<const FoldIndices> folds, bool scale);

/// F1 of `predicted` against `truth` as a double (0 when degenerate).
double f1_score(std::span<const Label> predicted, std::span<const Label> truth);

/// Mean validation F1 of one hyperparameter point over the folds.
double cv_f1(const Hyperparameters& hp, std::span<const FoldData> folds, std::uint64_t seed);

struct GridPoint {
    Hyperparameters hp;
    double cv_f1 = 0.0;
};

struct GridSearchResult {
    Hyperparameters best;
    double best_cv_f1 = 0.0;
    std::vector<GridPoint> trace;  // every evaluated point, grid order
};

/// Argmax of mean fold F1; exact ties go to the smaller capacity.
/// Throws EmptyGrid, InvalidSpec.
GridSearchResult grid_search_cv(const HyperGrid& grid, ClassifierKind kind, std::span<const FoldData> folds,
                                std::uint64_t seed);
GridSearchResult grid_search_cv(const FeatureMatrix& x, std::span<const Label> y, const HyperGrid& grid,
                                ClassifierKind kind, std::size_t k, std::uint64_t seed);

/// KNN predictions for every prefix size of `ranking` in one pass: entry
/// s-1 holds the predictions using the top s features. Distances are
/// accumulated one ranked feature at a time.
std::vector<std::vector<Label>> knn_prefix_predictions(const FeatureMatrix& train_x, std::span<const Label> train_y,
                                                       const FeatureMatrix& query_x,
                                                       std::span<const std::size_t> ranking, std::size_t k);

struct RfecvResult {
    std::vector<std::size_t> ranking;  // feature indices, most important first
    std::vector<double> f1_by_size;    // entry s-1 is the mean CV F1 with the top s features
    std::size_t selected_size = 0;
    double epsilon_f1 = 0.005;

    /// Top-s features of the ranking in ascending index order.
    std::vector<std::size_t> subset(std::size_t size) const;
    std::vector<std::size_t> selected() const { return subset(selected_size); }
    nlohmann::json to_json(std::span<const std::string> names) const;
};

/// Recursive elimination along a fixed ranking: the lowest-ranked remaining
/// feature is dropped at each step, so subsets are nested. Returns the
/// smallest size whose mean CV F1 is within epsilon_f1 of the best size.
RfecvResult rfecv(std::span<const std::size_t> ranking, const Hyperparameters& hp, std::span<const FoldData> folds,
                  std::uint64_t seed, double epsilon_f1 = 0.005);

struct McNemarResult {
    std::uint64_t b = 0;  // a right, b wrong
    std::uint64_t c = 0;  // a wrong, b right
    double statistic = 0.0;
    std::optional<double> exact_p;  // set when b + c < 25
    bool significant = false;
};

/// Continuity-corrected McNemar test at alpha = 0.05, with the exact
/// two-sided binomial test deciding significance when b + c < 25.
/// Throws LengthMismatch.
McNemarResult mcnemar(std::span<const Label> a, std::span<const Label> b, std::span<const Label> truth);
McNemarResult mcnemar_from_counts(std::uint64_t b, std::uint64_t c);

struct CandidateResult {
    Hyperparameters hp;
    std::vector<std::string> features;
    double cv_f1 = 0.0;
    std::vector<Label> predictions;  // on the holdout rows
    MetricsReport test;
};

struct SelectionOutcome {
    std::size_t chosen = 0;
    std::size_t best = 0;                   // best test F1
    std::vector<std::size_t> equivalent;    // not significantly different from `best`, ascending
    std::vector<McNemarResult> vs_best;     // per candidate
};

/// Picks the candidate with the fewest features among those a McNemar test
/// cannot tell apart from the best-F1 candidate. Ties: higher F1, then
/// smaller capacity, then input order. Throws EmptyCandidates, LengthMismatch.
SelectionOutcome select_least_features(std::span<const CandidateResult> candidates, std::span<const Label> truth);

}  // namespace mdetect
