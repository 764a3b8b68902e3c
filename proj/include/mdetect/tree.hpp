#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "mdetect/data_model.hpp"

namespace mdetect {

/// Weighted class totals at a node.
struct ClassCounts {
    double benign = 0.0;
    double malicious = 0.0;

    double total() const { return benign + malicious; }
    /// Majority label; ties go to Benign.
    Label majority() const { return malicious > benign ? Label::Malicious : Label::Benign; }
    double malicious_share() const { return total() > 0.0 ? malicious / total() : 0.0; }
    /// Weighted Gini impurity times node weight: W * (1 - p_b^2 - p_m^2).
    double weighted_gini() const;

    bool operator==(const ClassCounts&) const = default;
};

/// Flat-array CART node. A node is a leaf when `feature < 0`; otherwise rows
/// with x[feature] <= threshold go to `left`, the rest to `right`.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    ClassCounts counts;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct TreeParams {
    int max_depth = 32;           // a depth-1 tree is a stump
    std::size_t max_features = 0;  // 0 means all features
};

class DecisionTree {
public:
    DecisionTree() = default;
    DecisionTree(std::vector<TreeNode> nodes, std::size_t n_features)
        : nodes_(std::move(nodes)), n_features_(n_features) {}

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t n_features() const { return n_features_; }
    std::size_t depth() const;

    const TreeNode& leaf_for(std::span<const double> row) const;
    Label predict(std::span<const double> row) const { return leaf_for(row).counts.majority(); }
    /// Weighted share of Malicious training rows in the reached leaf.
    double score(std::span<const double> row) const { return leaf_for(row).counts.malicious_share(); }

    /// Adds each split's weighted impurity decrease, divided by the root
    /// weight, to `importance[feature]`.
    void accumulate_importance(std::span<double> importance) const;

    nlohmann::json to_json() const;
    static DecisionTree from_json(const nlohmann::json& j);

    bool operator==(const DecisionTree&) const = default;

private:
    std::vector<TreeNode> nodes_;
    std::size_t n_features_ = 0;
};

/// Row order of every column by (value, row index), computed once and
/// shared by all trees fit on the same matrix.
class SortedColumns {
public:
    explicit SortedColumns(const FeatureMatrix& x);

    std::size_t cols() const { return order_.size(); }
    const std::vector<std::uint32_t>& order(std::size_t col) const { return order_[col]; }

private:
    std::vector<std::vector<std::uint32_t>> order_;
};

/// Greedy CART on weighted Gini impurity.
///
/// At every node a uniform subset of `max_features` feature indices is
/// drawn (all of them when max_features is 0 or exceeds the width). For
/// each candidate feature the thresholds are the midpoints between
/// consecutive distinct values present at the node. The split with the
/// smallest summed child impurity wins; ties keep the lower feature index,
/// then the lower threshold. Growth stops at max_depth, on pure nodes, and
/// when no split lowers impurity. Rows with zero weight are ignored.
///
/// `weights` may be empty (all ones). `presorted`, when given, must come
/// from the same matrix. Throws EmptyDataset and LengthMismatch.
DecisionTree fit_tree(const FeatureMatrix& x, std::span<const Label> y, std::span<const double> weights,
                      const TreeParams& params, std::uint64_t seed, const SortedColumns* presorted = nullptr);

/// Depth-1 weighted Gini stump over all features, for repeated refits
/// under changing weights (boosting). Same result as fit_tree with
/// max_depth = 1 and every feature considered.
class StumpFitter {
public:
    StumpFitter(const FeatureMatrix& x, std::span<const Label> y);

    DecisionTree fit(std::span<const double> weights) const;

private:
    const FeatureMatrix& x_;
    std::span<const Label> y_;
    SortedColumns sorted_;
};

}  // namespace mdetect
