#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdetect/data_model.hpp"

namespace mdetect {

struct RebalanceSpec {
    double target_benign_fraction = 0.90;
    std::uint64_t seed = 0;
    /// Rebalance each malware version separately (the corpus-level ratio
    /// then holds per type as well as overall).
    bool per_version = false;
};

struct RebalanceResult {
    Dataset dataset;
    std::vector<std::size_t> kept_rows;  // ascending row ids of the input
    std::vector<std::string> warnings;
};

/// Keeps every benign row and floor(benign * (1 - f) / f) malicious rows
/// drawn uniformly without replacement. Throws NoBenignRows, InvalidSpec.
RebalanceResult undersample(const Dataset& dataset, const RebalanceSpec& spec);

/// Number of malicious rows a rebalanced table keeps for `benign` benign rows.
std::size_t malicious_quota(std::size_t benign, double target_benign_fraction);

enum class SplitMode { NormalHoldout, UnknownDevice };

std::string_view to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view text);

struct SplitSpec {
    double test_fraction = 0.25;
    SplitMode mode = SplitMode::NormalHoldout;
    std::uint64_t seed = 0;
};

struct SplitResult {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    std::vector<std::string> test_users;  // UnknownDevice only
};

/// NormalHoldout: uniform random row split with round(n * test_fraction)
/// test rows. UnknownDevice: users are drawn in random order into the test
/// side until it holds at least test_fraction of the rows; at least one user
/// always stays on the training side. Throws EmptyDataset, TooFewUsers.
SplitResult holdout_split(const Dataset& dataset, const SplitSpec& spec);

struct FoldIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validate;
};

/// k disjoint validation folds covering every row once. The first n % k
/// folds get one extra row. Both index lists of a fold are ascending.
/// Throws TooFewRows (n < k) and InvalidSpec (k < 2).
std::vector<FoldIndices> kfold(std::size_t n_rows, std::size_t k, std::uint64_t seed);
std::vector<FoldIndices> kfold(const Dataset& train, std::size_t k, std::uint64_t seed);

/// Per-column min-max scaling fit on training rows only.
class MinMaxScaler {
public:
    MinMaxScaler() = default;
    MinMaxScaler(std::vector<double> min, std::vector<double> max) : min_(std::move(min)), max_(std::move(max)) {}

    /// Throws EmptyTrainingSet.
    static MinMaxScaler fit(const FeatureMatrix& train);

    /// (x - min) / (max - min) clipped to [0, 1]; constant columns map to 0.
    /// Missing cells stay missing.
    double transform(std::size_t column, double value) const;
    FeatureMatrix transform(const FeatureMatrix& data) const;
    std::vector<double> transform_row(std::span<const double> row) const;

    const std::vector<double>& min() const { return min_; }
    const std::vector<double>& max() const { return max_; }
    std::size_t size() const { return min_.size(); }

    nlohmann::json to_json() const;
    static MinMaxScaler from_json(const nlohmann::json& j);

private:
    std::vector<double> min_;
    std::vector<double> max_;
};

MinMaxScaler fit_scaler(const Dataset& train);
Dataset apply_scaler(const MinMaxScaler& scaler, const Dataset& data);

/// Median imputation learned on the training split.
class MedianImputer {
public:
    MedianImputer() = default;
    explicit MedianImputer(std::vector<double> fill) : fill_(std::move(fill)) {}

    /// all-missing columns get 0 and a warning. Throws EmptyTrainingSet.
    static MedianImputer fit(const FeatureMatrix& train, std::span<const std::string> names,
                             std::vector<std::string>* warnings = nullptr);

    FeatureMatrix transform(const FeatureMatrix& data) const;
    void transform_row(std::span<double> row) const;

    const std::vector<double>& fill_values() const { return fill_; }

    nlohmann::json to_json() const;
    static MedianImputer from_json(const nlohmann::json& j);

private:
    std::vector<double> fill_;
};

struct ImputeResult {
    Dataset train;
    std::vector<Dataset> others;
    MedianImputer imputer;
    std::vector<std::string> warnings;
};

ImputeResult impute(const Dataset& train, const std::vector<Dataset>& others);

}  // namespace mdetect
