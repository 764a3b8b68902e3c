#include "mdetect/adaboost.hpp"

#include <cmath>

#include "mdetect/error.hpp"

namespace mdetect {

namespace {

double sign_of(Label label) { return label == Label::Malicious ? 1.0 : -1.0; }

const double kCappedAlpha = 0.5 * std::log(1e10);

}  // namespace

double AdaBoost::margin(std::span<const double> row) const {
    double sum = 0.0;
    for (const auto& s : stages_) sum += s.alpha * sign_of(s.stump.predict(row));
    return sum;
}

double AdaBoost::score(std::span<const double> row) const {
    double total = 0.0;
    for (const auto& s : stages_) total += s.alpha;
    if (total <= 0.0) return 0.0;
    return 0.5 * (1.0 + margin(row) / total);
}

nlohmann::json AdaBoost::to_json() const {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : stages_) stages.push_back({{"alpha", s.alpha}, {"error", s.error}, {"stump", s.stump.to_json()}});
    return {{"n_estimators", params_.n_estimators}, {"stages", stages}, {"loss_trace", loss_trace_}};
}

AdaBoost AdaBoost::from_json(const nlohmann::json& j) {
    AdaBoostParams p;
    p.n_estimators = j.at("n_estimators").get<std::size_t>();
    std::vector<BoostStage> stages;
    for (const auto& s : j.at("stages"))
        stages.push_back({DecisionTree::from_json(s.at("stump")), s.at("alpha").get<double>(), s.at("error").get<double>()});
    return AdaBoost(std::move(stages), p, j.at("loss_trace").get<std::vector<double>>());
}

AdaBoost fit_adaboost(const FeatureMatrix& x, std::span<const Label> y, const AdaBoostParams& params) {
    if (x.rows() == 0) fail(ErrorCode::EmptyDataset, "cannot boost on zero rows");
    if (y.size() != x.rows()) fail(ErrorCode::LengthMismatch, "features and labels disagree on row count");
    bool has_benign = false, has_malicious = false;
    for (auto l : y) (l == Label::Malicious ? has_malicious : has_benign) = true;
    if (!has_benign || !has_malicious) fail(ErrorCode::SingleClassInput, "boosting needs both classes");

    const std::size_t n = x.rows();
    const StumpFitter fitter(x, y);
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<double> margins(n, 0.0);
    std::vector<double> h(n);
    auto mean_loss = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::exp(-sign_of(y[i]) * margins[i]);
        return s / static_cast<double>(n);
    };

    std::vector<BoostStage> stages;
    std::vector<double> trace{mean_loss()};
    for (std::size_t round = 0; round < params.n_estimators; ++round) {
        DecisionTree stump = fitter.fit(w);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = sign_of(stump.predict(x.row(i)));
            if (h[i] != sign_of(y[i])) err += w[i];
        }
        if (err >= 0.5) break;
        const bool perfect = err <= 0.0;
        const double alpha = perfect ? kCappedAlpha : 0.5 * std::log((1.0 - err) / err);
        stages.push_back({std::move(stump), alpha, err});
        for (std::size_t i = 0; i < n; ++i) margins[i] += alpha * h[i];
        trace.push_back(mean_loss());
        if (perfect) break;

        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] *= std::exp(-alpha * sign_of(y[i]) * h[i]);
            z += w[i];
        }
        for (auto& v : w) v /= z;
    }
    return AdaBoost(std::move(stages), params, std::move(trace));
}

}  // namespace mdetect
