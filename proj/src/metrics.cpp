#include "mdetect/metrics.hpp"

#include <cmath>

#include "mdetect/error.hpp"

namespace mdetect {

ConfusionCounts confusion(std::span<const Label> predicted, std::span<const Label> truth) {
    if (predicted.size() != truth.size())
        fail(ErrorCode::LengthMismatch, "prediction and truth lengths differ (" + std::to_string(predicted.size()) +
                                            " vs " + std::to_string(truth.size()) + ")");
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = predicted[i] == Label::Malicious;
        const bool t = truth[i] == Label::Malicious;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

MetricsReport metrics(const ConfusionCounts& c) {
    if (c.total() == 0) fail(ErrorCode::EmptyEvaluation, "no evaluated instances");
    MetricsReport m;
    m.counts = c;
    m.accuracy = {c.tp + c.tn, c.total()};
    m.precision = {c.tp, c.tp + c.fp};
    m.recall = {c.tp, c.tp + c.fn};
    m.f1 = {2 * c.tp, 2 * c.tp + c.fp + c.fn};
    m.fpr = {c.fp, c.fp + c.tn};
    m.fnr = {c.fn, c.fn + c.tp};
    const std::pair<const char*, const Fraction*> all[] = {{"accuracy", &m.accuracy}, {"precision", &m.precision},
                                                           {"recall", &m.recall},     {"f1", &m.f1},
                                                           {"fpr", &m.fpr},           {"fnr", &m.fnr}};
    for (const auto& [name, f] : all)
        if (f->degenerate()) m.degenerate.emplace_back(name);
    return m;
}

nlohmann::json MetricsReport::to_json(bool with_timing) const {
    nlohmann::json j{{"confusion", counts.to_json()},
                     {"accuracy", accuracy.value()},
                     {"precision", precision.value()},
                     {"recall", recall.value()},
                     {"f1", f1.value()},
                     {"fpr", fpr.value()},
                     {"fnr", fnr.value()},
                     {"degenerate", degenerate},
                     {"n_features", n_features}};
    if (with_timing) {
        j["train_seconds"] = train_seconds;
        j["test_seconds"] = test_seconds;
    }
    return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    const auto& c = j.at("confusion");
    MetricsReport m = metrics({c.at("tp").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(),
                               c.at("tn").get<std::uint64_t>(), c.at("fn").get<std::uint64_t>()});
    m.n_features = j.at("n_features").get<std::size_t>();
    m.train_seconds = j.value("train_seconds", 0.0);
    m.test_seconds = j.value("test_seconds", 0.0);
    return m;
}

MeanStdev mean_stdev(std::span<const double> values) {
    MeanStdev out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return out;
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.stdev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    return out;
}

}  // namespace mdetect
