#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mdetect/adaboost.hpp"
#include "mdetect/forest.hpp"
#include "mdetect/knn.hpp"

namespace mdetect {

enum class ClassifierKind { RandomForest, AdaBoost, Knn };

std::string_view to_string(ClassifierKind kind);  // "RF", "AdaBoost", "KNN"
ClassifierKind parse_classifier(std::string_view text);
std::span<const ClassifierKind> all_classifiers();

/// One point of a classifier's hyperparameter space. Only the fields of the
/// matching kind are meaningful.
struct Hyperparameters {
    ClassifierKind kind = ClassifierKind::RandomForest;
    std::size_t n_trees = 40;
    int max_depth = 32;
    std::size_t max_features = 15;
    std::size_t n_estimators = 50;
    std::size_t k = 5;

    /// Tie-break key: fewer estimators/trees/neighbors, then lower depth,
    /// then fewer max_features.
    std::tuple<std::size_t, int, std::size_t> capacity() const;
    std::string describe() const;
    nlohmann::json to_json() const;
    static Hyperparameters from_json(const nlohmann::json& j);

    bool operator==(const Hyperparameters&) const = default;
};

Hyperparameters default_hyperparameters(ClassifierKind kind);

using Classifier = std::variant<RandomForest, AdaBoost, Knn>;

/// Fits the classifier named by `hp.kind`. KNN expects scaled inputs.
Classifier fit_classifier(const Hyperparameters& hp, const FeatureMatrix& x, std::span<const Label> y,
                          std::uint64_t seed);

Label predict(const Classifier& model, std::span<const double> row);
double score(const Classifier& model, std::span<const double> row);
std::vector<Label> predict_all(const Classifier& model, const FeatureMatrix& x);
std::vector<double> score_all(const Classifier& model, const FeatureMatrix& x);

ClassifierKind kind_of(const Classifier& model);
nlohmann::json classifier_to_json(const Classifier& model);
Classifier classifier_from_json(const nlohmann::json& j);

}  // namespace mdetect
