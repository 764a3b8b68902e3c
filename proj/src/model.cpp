#include "mdetect/model.hpp"

#include <array>

#include "mdetect/error.hpp"
#include "mdetect/util.hpp"

namespace mdetect {

std::string_view to_string(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::RandomForest: return "RF";
        case ClassifierKind::AdaBoost: return "AdaBoost";
        case ClassifierKind::Knn: return "KNN";
    }
    return "?";
}

ClassifierKind parse_classifier(std::string_view text) {
    const auto t = to_lower(trim(text));
    if (t == "rf" || t == "randomforest" || t == "random_forest") return ClassifierKind::RandomForest;
    if (t == "adaboost" || t == "ab" || t == "ada") return ClassifierKind::AdaBoost;
    if (t == "knn" || t == "k-nn") return ClassifierKind::Knn;
    fail(ErrorCode::ConfigError, "unknown classifier '" + std::string(text) + "'");
}

std::span<const ClassifierKind> all_classifiers() {
    static constexpr std::array<ClassifierKind, 3> kinds{ClassifierKind::RandomForest, ClassifierKind::AdaBoost,
                                                         ClassifierKind::Knn};
    return kinds;
}

std::tuple<std::size_t, int, std::size_t> Hyperparameters::capacity() const {
    switch (kind) {
        case ClassifierKind::RandomForest: return {n_trees, max_depth, max_features};
        case ClassifierKind::AdaBoost: return {n_estimators, 0, 0};
        case ClassifierKind::Knn: return {k, 0, 0};
    }
    return {};
}

std::string Hyperparameters::describe() const {
    switch (kind) {
        case ClassifierKind::RandomForest:
            return "trees=" + std::to_string(n_trees) + " depth=" + std::to_string(max_depth) +
                   " features=" + std::to_string(max_features);
        case ClassifierKind::AdaBoost: return "estimators=" + std::to_string(n_estimators);
        case ClassifierKind::Knn: return "k=" + std::to_string(k);
    }
    return {};
}

nlohmann::json Hyperparameters::to_json() const {
    nlohmann::json j{{"classifier", std::string(to_string(kind))}};
    switch (kind) {
        case ClassifierKind::RandomForest:
            j["n_trees"] = n_trees;
            j["max_depth"] = max_depth;
            j["max_features"] = max_features;
            break;
        case ClassifierKind::AdaBoost: j["n_estimators"] = n_estimators; break;
        case ClassifierKind::Knn: j["k"] = k; break;
    }
    return j;
}

Hyperparameters Hyperparameters::from_json(const nlohmann::json& j) {
    Hyperparameters hp = default_hyperparameters(parse_classifier(j.at("classifier").get<std::string>()));
    if (j.contains("n_trees")) hp.n_trees = j["n_trees"].get<std::size_t>();
    if (j.contains("max_depth")) hp.max_depth = j["max_depth"].get<int>();
    if (j.contains("max_features")) hp.max_features = j["max_features"].get<std::size_t>();
    if (j.contains("n_estimators")) hp.n_estimators = j["n_estimators"].get<std::size_t>();
    if (j.contains("k")) hp.k = j["k"].get<std::size_t>();
    return hp;
}

Hyperparameters default_hyperparameters(ClassifierKind kind) {
    Hyperparameters hp;
    hp.kind = kind;
    return hp;
}

Classifier fit_classifier(const Hyperparameters& hp, const FeatureMatrix& x, std::span<const Label> y,
                          std::uint64_t seed) {
    switch (hp.kind) {
        case ClassifierKind::RandomForest:
            return fit_random_forest(x, y, {hp.n_trees, hp.max_depth, hp.max_features, true}, seed);
        case ClassifierKind::AdaBoost: return fit_adaboost(x, y, {hp.n_estimators});
        case ClassifierKind::Knn: return fit_knn(x, y, {hp.k});
    }
    fail(ErrorCode::InvalidSpec, "unknown classifier kind");
}

Label predict(const Classifier& model, std::span<const double> row) {
    return std::visit([&](const auto& m) { return m.predict(row); }, model);
}

double score(const Classifier& model, std::span<const double> row) {
    return std::visit([&](const auto& m) { return m.score(row); }, model);
}

std::vector<Label> predict_all(const Classifier& model, const FeatureMatrix& x) {
    std::vector<Label> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict(model, x.row(r));
    return out;
}

std::vector<double> score_all(const Classifier& model, const FeatureMatrix& x) {
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = score(model, x.row(r));
    return out;
}

ClassifierKind kind_of(const Classifier& model) {
    if (std::holds_alternative<RandomForest>(model)) return ClassifierKind::RandomForest;
    if (std::holds_alternative<AdaBoost>(model)) return ClassifierKind::AdaBoost;
    return ClassifierKind::Knn;
}

nlohmann::json classifier_to_json(const Classifier& model) {
    return {{"kind", std::string(to_string(kind_of(model)))},
            {"model", std::visit([](const auto& m) { return m.to_json(); }, model)}};
}

Classifier classifier_from_json(const nlohmann::json& j) {
    const auto& body = j.at("model");
    switch (parse_classifier(j.at("kind").get<std::string>())) {
        case ClassifierKind::RandomForest: return RandomForest::from_json(body);
        case ClassifierKind::AdaBoost: return AdaBoost::from_json(body);
        case ClassifierKind::Knn: return Knn::from_json(body);
    }
    fail(ErrorCode::InvalidRecord, "unknown model kind");
}

}  // namespace mdetect
