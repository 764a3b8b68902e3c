#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "mdetect/data_model.hpp"

namespace mdetect {

struct KnnParams {
    std::size_t k = 5;
};

/// Stores the (already scaled) training rows; prediction is a Euclidean
/// k-nearest vote.
class Knn {
public:
    Knn() = default;
    Knn(FeatureMatrix x, std::vector<Label> y, KnnParams params)
        : x_(std::move(x)), y_(std::move(y)), params_(params) {}

    const FeatureMatrix& points() const { return x_; }
    const std::vector<Label>& labels() const { return y_; }
    const KnnParams& params() const { return params_; }

    /// Indices of the k nearest rows, nearest first; equal distances keep
    /// the lower row index first.
    std::vector<std::uint32_t> neighbors(std::span<const double> query, std::size_t k) const;

    /// Majority of the k nearest labels; a tie goes to Benign.
    Label predict(std::span<const double> query) const;
    /// Share of Malicious labels among the k nearest.
    double score(std::span<const double> query) const;

    nlohmann::json to_json() const;
    static Knn from_json(const nlohmann::json& j);

    bool operator==(const Knn&) const = default;

private:
    FeatureMatrix x_;
    std::vector<Label> y_;
    KnnParams params_;
};

/// Throws KTooLarge (k > rows or k == 0) and LengthMismatch.
Knn fit_knn(const FeatureMatrix& x, std::span<const Label> y, const KnnParams& params);

/// Orders candidates by (squared distance, row index) and keeps the first k.
/// Shared by the model and the batched search helpers.
std::vector<std::uint32_t> nearest_k(std::span<const double> sq_dist, std::size_t k);

/// Vote over the first k entries of a nearest-first neighbor list.
Label knn_vote(std::span<const std::uint32_t> neighbors, std::span<const Label> y, std::size_t k);

}  // namespace mdetect
