#include "mdetect/tree.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "mdetect/error.hpp"
#include "mdetect/util.hpp"

namespace mdetect {

double ClassCounts::weighted_gini() const {
    const double w = total();
    if (w <= 0.0) return 0.0;
    return w - (benign * benign + malicious * malicious) / w;
}

std::size_t DecisionTree::depth() const {
    if (nodes_.empty()) return 0;
    std::size_t best = 0;
    std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [id, d] = stack.back();
        stack.pop_back();
        const auto& n = nodes_[static_cast<std::size_t>(id)];
        if (n.is_leaf()) {
            best = std::max(best, d);
        } else {
            stack.push_back({n.left, d + 1});
            stack.push_back({n.right, d + 1});
        }
    }
    return best;
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> row) const {
    std::size_t id = 0;
    while (!nodes_[id].is_leaf()) {
        const auto& n = nodes_[id];
        id = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[id];
}

void DecisionTree::accumulate_importance(std::span<double> importance) const {
    if (nodes_.empty()) return;
    const double root = nodes_[0].counts.total();
    if (root <= 0.0) return;
    for (const auto& n : nodes_) {
        if (n.is_leaf()) continue;
        const double decrease = n.counts.weighted_gini() -
                                nodes_[static_cast<std::size_t>(n.left)].counts.weighted_gini() -
                                nodes_[static_cast<std::size_t>(n.right)].counts.weighted_gini();
        importance[static_cast<std::size_t>(n.feature)] += std::max(0.0, decrease) / root;
    }
}

nlohmann::json DecisionTree::to_json() const {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : nodes_) {
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.counts.benign, n.counts.malicious});
    }
    return {{"n_features", n_features_}, {"nodes", nodes}};
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j) {
    std::vector<TreeNode> nodes;
    for (const auto& n : j.at("nodes")) {
        TreeNode t;
        t.feature = n.at(0).get<std::int32_t>();
        t.threshold = n.at(1).get<double>();
        t.left = n.at(2).get<std::int32_t>();
        t.right = n.at(3).get<std::int32_t>();
        t.counts = {n.at(4).get<double>(), n.at(5).get<double>()};
        nodes.push_back(t);
    }
    const auto width = j.at("n_features").get<std::size_t>();
    for (const auto& n : nodes) {
        const auto limit = static_cast<std::int32_t>(nodes.size());
        if (!n.is_leaf() && (static_cast<std::size_t>(n.feature) >= width || n.left <= 0 || n.right <= 0 ||
                             n.left >= limit || n.right >= limit))
            fail(ErrorCode::InvalidRecord, "malformed tree node");
    }
    if (nodes.empty()) fail(ErrorCode::InvalidRecord, "tree without nodes");
    return DecisionTree(std::move(nodes), width);
}

namespace {

struct SortedCell {
    double value;
    std::uint32_t row;
};

struct SplitChoice {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double child_impurity = 0.0;
};

double midpoint(double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    // Guard against rounding up to `hi`, which would move it to the left side.
    return mid < hi ? mid : lo;
}

/// Sweeps one feature's cells (sorted by value, then row) and updates `best`
/// when a strictly better threshold is found.
void scan_feature(std::span<const SortedCell> cells, std::span<const Label> y, std::span<const double> w,
                  const ClassCounts& total, std::int32_t feature, double tolerance, SplitChoice& best) {
    ClassCounts left;
    for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
        const auto r = cells[i].row;
        (y[r] == Label::Malicious ? left.malicious : left.benign) += w.empty() ? 1.0 : w[r];
        if (cells[i].value == cells[i + 1].value) continue;
        const ClassCounts right{total.benign - left.benign, total.malicious - left.malicious};
        const double impurity = left.weighted_gini() + right.weighted_gini();
        if (best.feature < 0 || impurity < best.child_impurity - tolerance) {
            best.feature = feature;
            best.threshold = midpoint(cells[i].value, cells[i + 1].value);
            best.child_impurity = impurity;
        }
    }
}

bool splittable(const ClassCounts& c) { return c.benign > 0.0 && c.malicious > 0.0; }

}  // namespace

SortedColumns::SortedColumns(const FeatureMatrix& x) : order_(x.cols()) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
        auto& ord = order_[c];
        ord.resize(x.rows());
        std::iota(ord.begin(), ord.end(), 0U);
        std::sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = x.at(a, c), vb = x.at(b, c);
            return va < vb || (va == vb && a < b);
        });
    }
}

// Each node owns the same segment [lo, hi) of every per-feature row list;
// the lists stay sorted by (value, row) because splits partition them
// stably.
DecisionTree fit_tree(const FeatureMatrix& x, std::span<const Label> y, std::span<const double> weights,
                      const TreeParams& params, std::uint64_t seed, const SortedColumns* presorted) {
    if (x.rows() == 0) fail(ErrorCode::EmptyDataset, "cannot fit a tree on zero rows");
    if (y.size() != x.rows() || (!weights.empty() && weights.size() != x.rows()))
        fail(ErrorCode::LengthMismatch, "features, labels and weights disagree on row count");

    const std::size_t d = x.cols();
    if (d == 0) fail(ErrorCode::EmptyDataset, "cannot fit a tree without features");
    std::optional<SortedColumns> local;
    if (!presorted) presorted = &local.emplace(x);
    if (presorted->cols() != d) fail(ErrorCode::LengthMismatch, "presorted columns do not match the matrix");

    const std::size_t n_try = (params.max_features == 0 || params.max_features >= d) ? d : params.max_features;
    Rng rng(seed);
    auto weight = [&](std::uint32_t r) { return weights.empty() ? 1.0 : weights[r]; };

    std::vector<std::vector<std::uint32_t>> lists(d);
    for (std::size_t f = 0; f < d; ++f) {
        const auto& ord = presorted->order(f);
        auto& list = lists[f];
        list.reserve(ord.size());
        for (auto r : ord)
            if (weights.empty() || weights[r] > 0.0) list.push_back(r);
    }
    const std::size_t n_active = lists[0].size();
    if (n_active == 0) fail(ErrorCode::EmptyDataset, "every row has zero weight");

    auto count_segment = [&](std::size_t lo, std::size_t hi) {
        ClassCounts c;
        for (std::size_t i = lo; i < hi; ++i) {
            const auto r = lists[0][i];
            (y[r] == Label::Malicious ? c.malicious : c.benign) += weight(r);
        }
        return c;
    };

    struct Work {
        std::int32_t node;
        std::size_t lo, hi;
        int depth;
    };

    std::vector<TreeNode> nodes(1);
    nodes[0].counts = count_segment(0, n_active);
    std::vector<Work> stack{{0, 0, n_active, 0}};

    std::vector<std::size_t> features = iota_indices(d);
    std::vector<std::size_t> candidates;
    std::vector<SortedCell> cells;
    std::vector<char> goes_left(x.rows(), 0);
    std::vector<std::uint32_t> scratch;

    while (!stack.empty()) {
        const Work work = stack.back();
        stack.pop_back();
        const ClassCounts counts = nodes[static_cast<std::size_t>(work.node)].counts;
        if (work.depth >= params.max_depth || !splittable(counts) || work.hi - work.lo < 2) continue;

        candidates.clear();
        if (n_try == d) {
            candidates = features;
        } else {
            for (std::size_t i = 0; i < n_try; ++i) {
                const std::size_t j = i + rng.uniform_index(d - i);
                std::swap(features[i], features[j]);
            }
            candidates.assign(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(n_try));
            std::sort(candidates.begin(), candidates.end());
        }

        const double parent = counts.weighted_gini();
        const double tolerance = 1e-12 * counts.total();
        SplitChoice best;
        for (std::size_t f : candidates) {
            cells.clear();
            for (std::size_t i = work.lo; i < work.hi; ++i) {
                const auto r = lists[f][i];
                cells.push_back({x.at(r, f), r});
            }
            scan_feature(cells, y, weights, counts, static_cast<std::int32_t>(f), tolerance, best);
        }
        if (best.feature < 0 || !(parent - best.child_impurity > tolerance)) continue;

        const auto bf = static_cast<std::size_t>(best.feature);
        std::size_t n_left = 0;
        for (std::size_t i = work.lo; i < work.hi; ++i) {
            const auto r = lists[0][i];
            goes_left[r] = x.at(r, bf) <= best.threshold ? 1 : 0;
            n_left += static_cast<std::size_t>(goes_left[r]);
        }
        for (auto& list : lists) {
            scratch.clear();
            std::size_t out = work.lo;
            for (std::size_t i = work.lo; i < work.hi; ++i) {
                const auto r = list[i];
                if (goes_left[r]) list[out++] = r;
                else scratch.push_back(r);
            }
            std::copy(scratch.begin(), scratch.end(), list.begin() + static_cast<std::ptrdiff_t>(out));
        }

        const auto left_id = static_cast<std::int32_t>(nodes.size());
        const auto right_id = left_id + 1;
        const std::size_t mid = work.lo + n_left;
        nodes.resize(nodes.size() + 2);
        auto& node = nodes[static_cast<std::size_t>(work.node)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left_id;
        node.right = right_id;
        nodes[static_cast<std::size_t>(left_id)].counts = count_segment(work.lo, mid);
        nodes[static_cast<std::size_t>(right_id)].counts = count_segment(mid, work.hi);

        stack.push_back({right_id, mid, work.hi, work.depth + 1});
        stack.push_back({left_id, work.lo, mid, work.depth + 1});
    }
    return DecisionTree(std::move(nodes), d);
}

StumpFitter::StumpFitter(const FeatureMatrix& x, std::span<const Label> y) : x_(x), y_(y), sorted_(x) {
    if (x.rows() == 0) fail(ErrorCode::EmptyDataset, "cannot fit a stump on zero rows");
    if (y.size() != x.rows()) fail(ErrorCode::LengthMismatch, "features and labels disagree on row count");
}

DecisionTree StumpFitter::fit(std::span<const double> weights) const {
    if (weights.size() != x_.rows()) fail(ErrorCode::LengthMismatch, "weights disagree on row count");
    return fit_tree(x_, y_, weights, TreeParams{1, 0}, 0, &sorted_);
}

}  // namespace mdetect
