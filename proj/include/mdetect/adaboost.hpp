#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "mdetect/tree.hpp"

namespace mdetect {

struct AdaBoostParams {
    std::size_t n_estimators = 50;
    bool operator==(const AdaBoostParams&) const = default;
};

struct BoostStage {
    DecisionTree stump;
    double alpha = 0.0;
    double error = 0.0;  // weighted training error when the stage was fit

    bool operator==(const BoostStage&) const = default;
};

class AdaBoost {
public:
    AdaBoost() = default;
    AdaBoost(std::vector<BoostStage> stages, AdaBoostParams params, std::vector<double> loss_trace)
        : stages_(std::move(stages)), params_(params), loss_trace_(std::move(loss_trace)) {}

    const std::vector<BoostStage>& stages() const { return stages_; }
    const AdaBoostParams& params() const { return params_; }
    /// Mean exponential training loss: entry 0 before any stage, entry t
    /// after t stored stages.
    const std::vector<double>& loss_trace() const { return loss_trace_; }

    /// Sum of alpha * h(x) with Malicious = +1, Benign = -1.
    double margin(std::span<const double> row) const;
    /// Sign of the margin; zero goes to Benign.
    Label predict(std::span<const double> row) const { return margin(row) > 0.0 ? Label::Malicious : Label::Benign; }
    /// Margin divided by the total alpha, mapped to [0, 1].
    double score(std::span<const double> row) const;

    nlohmann::json to_json() const;
    static AdaBoost from_json(const nlohmann::json& j);

    bool operator==(const AdaBoost&) const = default;

private:
    std::vector<BoostStage> stages_;
    AdaBoostParams params_;
    std::vector<double> loss_trace_;
};

/// Discrete AdaBoost over depth-1 Gini stumps. Each round fits a stump under
/// the current weights, takes its weighted error e and alpha = ln((1-e)/e)/2,
/// then multiplies the weight of every row by exp(-alpha * y * h) and
/// renormalizes. e = 0 keeps the stage with alpha = ln(1e10)/2 and stops;
/// e >= 0.5 drops the stage and stops. Throws SingleClassInput, EmptyDataset.
AdaBoost fit_adaboost(const FeatureMatrix& x, std::span<const Label> y, const AdaBoostParams& params);

}  // namespace mdetect
