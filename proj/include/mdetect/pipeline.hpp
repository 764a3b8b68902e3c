#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdetect/config.hpp"
#include "mdetect/ingest.hpp"
#include "mdetect/report.hpp"
#include "mdetect/sampling.hpp"
#include "mdetect/selection.hpp"
#include "mdetect/synthgen.hpp"

namespace mdetect {

struct ExperimentConfig {
    FeatureSet feature_set = FeatureSet::Apps;
    Target target;
    SplitMode mode = SplitMode::NormalHoldout;
    ClassifierKind classifier = ClassifierKind::RandomForest;
    std::uint64_t seed = 42;

    std::string data_dir = "data/synth";  // malware.csv, system.csv, apps.csv
    std::string dataset_csv;              // a joined table; used instead of data_dir when set
    std::string malware_package = GenSpec{}.malware_package;
    std::int64_t tolerance_ms = 5000;

    double test_fraction = 0.25;
    double target_benign_fraction = 0.90;
    bool per_version_rebalance = true;
    std::size_t cv_folds = 4;
    double epsilon_f1 = 0.005;
    HyperGrid grid = HyperGrid::desk();

    /// Forest whose impurity importances order the features for elimination.
    RandomForestParams ranking_forest{40, 32, 15, true};
    /// Settings used while scoring elimination sizes (before the grid runs).
    std::size_t elimination_trees = 20;
    std::size_t elimination_estimators = 200;
    std::size_t elimination_k = 5;

    /// Reads every experiment key from `cfg` (missing keys keep defaults).
    /// Throws ConfigError, ExcludedVersion, UnknownFeatureSet.
    static ExperimentConfig from_config(const Config& cfg);
    nlohmann::json to_json() const;
};

/// Every key the CLI accepts in a config file.
const std::vector<std::string>& known_config_keys();

/// Synthetic generation settings from `gen.*` keys.
GenSpec gen_spec_from_config(const Config& cfg);

struct LoadedData {
    Dataset dataset;  // Combined projection, every admitted version
    nlohmann::json join_stats = nlohmann::json::object();
};

/// Reads the joined CSV when configured, else parses and joins the three
/// probe exports. Throws IoError, SchemaMismatch, InvalidRecord.
LoadedData load_data(const ExperimentConfig& cfg);

/// Train and test sides after version filter, feature-set projection,
/// split, undersampling, imputation and (KNN only) scaling. Imputer and
/// scaler are fit on the training side only.
struct PreparedSplit {
    Dataset train;
    Dataset test;
    MedianImputer imputer;
    std::optional<MinMaxScaler> scaler;
    nlohmann::json audit = nlohmann::json::object();
};

PreparedSplit prepare_split(const ExperimentConfig& cfg, const Dataset& joined);

/// What `predict` needs to score fresh probe exports.
struct ModelBundle {
    static constexpr std::string_view kFormatVersion = "1";

    std::string catalog_version;
    std::string catalog_fingerprint;
    FeatureSet feature_set = FeatureSet::Apps;
    Target target;
    std::vector<std::string> input_features;  // feature-set columns the imputer and scaler expect
    std::vector<std::string> features;        // subset the classifier reads
    MedianImputer imputer;
    std::optional<MinMaxScaler> scaler;
    Hyperparameters hp;
    Classifier model;
    std::string malware_package;
    std::int64_t tolerance_ms = 5000;

    nlohmann::json to_json() const;
    /// Throws ModelVersionMismatch when the format or catalog differ.
    static ModelBundle from_json(const nlohmann::json& j);
};

struct ExperimentOutcome {
    EvaluationReport report;
    ModelBundle bundle;
};

/// ingest -> version filter -> split -> undersample -> impute -> scale (KNN)
/// -> importance ranking -> feature elimination -> grid search -> candidate
/// pool on the holdout -> least-features selection -> report.
/// Module errors are rethrown with the failing stage in the message.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const LoadedData& data);
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

struct MatrixSpec {
    std::vector<FeatureSet> feature_sets;  // an empty axis keeps the base value
    std::vector<Target> targets;
    std::vector<SplitMode> modes;
    std::vector<ClassifierKind> classifiers;

    /// Reads `matrix.*` keys; "all" expands an axis fully.
    static MatrixSpec from_config(const Config& cfg);
    std::vector<ExperimentConfig> expand(const ExperimentConfig& base) const;
};

struct MatrixResult {
    std::vector<EvaluationReport> reports;  // expansion order
    std::vector<std::string> expected;      // cell names
    std::vector<std::pair<std::string, std::string>> failures;  // cell, message
};

/// Runs the cells on up to `workers` threads. Each cell is deterministic,
/// and results are assembled in expansion order.
MatrixResult run_matrix(const ExperimentConfig& base, const MatrixSpec& spec, std::size_t workers);

struct Prediction {
    std::string user_id;
    std::int64_t timestamp_ms = 0;
    int malware_version = 0;
    Label label = Label::Benign;
    double score = 0.0;
    Label truth = Label::Benign;  // action type from the malware probe
};

/// Joins the probe exports in `data_dir` and scores every matched event.
/// Empty exports give an empty result.
std::vector<Prediction> predict(const ModelBundle& bundle, const std::string& data_dir);
std::string predictions_to_csv(const std::vector<Prediction>& predictions);

}  // namespace mdetect
