#include "mdetect/knn.hpp"

#include <algorithm>

#include "mdetect/error.hpp"

namespace mdetect {

std::vector<std::uint32_t> nearest_k(std::span<const double> sq_dist, std::size_t k) {
    std::vector<std::uint32_t> idx(sq_dist.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
    k = std::min(k, idx.size());
    auto closer = [&](std::uint32_t a, std::uint32_t b) {
        return sq_dist[a] < sq_dist[b] || (sq_dist[a] == sq_dist[b] && a < b);
    };
    if (k < idx.size()) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), closer);
    idx.resize(k);
    std::sort(idx.begin(), idx.end(), closer);
    return idx;
}

Label knn_vote(std::span<const std::uint32_t> neighbors, std::span<const Label> y, std::size_t k) {
    std::size_t malicious = 0;
    const std::size_t n = std::min(k, neighbors.size());
    for (std::size_t i = 0; i < n; ++i) malicious += y[neighbors[i]] == Label::Malicious ? 1 : 0;
    return 2 * malicious > n ? Label::Malicious : Label::Benign;
}

std::vector<std::uint32_t> Knn::neighbors(std::span<const double> query, std::size_t k) const {
    if (query.size() != x_.cols()) fail(ErrorCode::LengthMismatch, "query width differs from stored rows");
    std::vector<double> dist(x_.rows());
    for (std::size_t r = 0; r < x_.rows(); ++r) {
        const auto row = x_.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            const double d = row[c] - query[c];
            s += d * d;
        }
        dist[r] = s;
    }
    return nearest_k(dist, k);
}

Label Knn::predict(std::span<const double> query) const { return knn_vote(neighbors(query, params_.k), y_, params_.k); }

double Knn::score(std::span<const double> query) const {
    const auto nb = neighbors(query, params_.k);
    if (nb.empty()) return 0.0;
    std::size_t malicious = 0;
    for (auto i : nb) malicious += y_[i] == Label::Malicious ? 1 : 0;
    return static_cast<double>(malicious) / static_cast<double>(nb.size());
}

nlohmann::json Knn::to_json() const {
    std::vector<int> labels;
    for (auto l : y_) labels.push_back(l == Label::Malicious ? 1 : 0);
    return {{"k", params_.k}, {"rows", x_.rows()}, {"cols", x_.cols()}, {"points", x_.data()}, {"labels", labels}};
}

Knn Knn::from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    auto data = j.at("points").get<std::vector<double>>();
    std::vector<Label> labels;
    for (int l : j.at("labels").get<std::vector<int>>()) labels.push_back(l ? Label::Malicious : Label::Benign);
    if (data.size() != rows * cols || labels.size() != rows) fail(ErrorCode::InvalidRecord, "malformed KNN model");
    return Knn(FeatureMatrix(rows, cols, std::move(data)), std::move(labels), {j.at("k").get<std::size_t>()});
}

Knn fit_knn(const FeatureMatrix& x, std::span<const Label> y, const KnnParams& params) {
    if (y.size() != x.rows()) fail(ErrorCode::LengthMismatch, "features and labels disagree on row count");
    if (params.k == 0 || params.k > x.rows())
        fail(ErrorCode::KTooLarge,
             "k = " + std::to_string(params.k) + " needs between 1 and " + std::to_string(x.rows()) + " stored rows");
    return Knn(x, std::vector<Label>(y.begin(), y.end()), params);
}

}  // namespace mdetect
