#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mdetect/data_model.hpp"

namespace mdetect {

/// Exact non-negative ratio. A zero denominator marks a degenerate metric
/// whose value is reported as 0.
struct Fraction {
    std::uint64_t num = 0;
    std::uint64_t den = 0;

    bool degenerate() const { return den == 0; }
    double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
    /// Cross-multiplied equality, so 1/2 == 2/4.
    bool same_value(const Fraction& other) const { return num * other.den == other.num * den; }

    bool operator==(const Fraction&) const = default;
};

/// Malicious is the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    nlohmann::json to_json() const { return {{"tp", tp}, {"fp", fp}, {"tn", tn}, {"fn", fn}}; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Throws LengthMismatch.
ConfusionCounts confusion(std::span<const Label> predicted, std::span<const Label> truth);

struct MetricsReport {
    ConfusionCounts counts;
    Fraction accuracy, precision, recall, f1, fpr, fnr;
    std::vector<std::string> degenerate;  // names of metrics with a 0/0 denominator
    std::size_t n_features = 0;
    double train_seconds = 0.0;
    double test_seconds = 0.0;

    /// Timing fields are written only when `with_timing` is set.
    nlohmann::json to_json(bool with_timing = true) const;
    static MetricsReport from_json(const nlohmann::json& j);
};

/// accuracy (tp+tn)/total, precision tp/(tp+fp), recall tp/(tp+fn),
/// f1 2tp/(2tp+fp+fn), fpr fp/(fp+tn), fnr fn/(fn+tp). Throws EmptyEvaluation.
MetricsReport metrics(const ConfusionCounts& c);

/// Runs `f` and returns its wall-clock duration in seconds (and its result,
/// when it has one).
template <typename F>
auto timed(F&& f) {
    const auto start = std::chrono::steady_clock::now();
    auto seconds = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
        std::forward<F>(f)();
        return seconds();
    } else {
        auto result = std::forward<F>(f)();
        const double s = seconds();
        return std::pair<decltype(result), double>(std::move(result), s);
    }
}

struct MeanStdev {
    double mean = 0.0;
    double stdev = 0.0;  // sample standard deviation (n - 1); 0 for fewer than 2 values
};

MeanStdev mean_stdev(std::span<const double> values);

}  // namespace mdetect
