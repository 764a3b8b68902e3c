#include "mdetect/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <mutex>
#include <thread>

#include "mdetect/error.hpp"
#include "mdetect/util.hpp"

namespace mdetect {

namespace {

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.code(), std::string(name) + ": " + e.what());
    }
}

std::vector<std::size_t> to_sizes(const std::vector<std::int64_t>& v) {
    std::vector<std::size_t> out;
    for (auto x : v) {
        if (x < 0) fail(ErrorCode::ConfigError, "grid values must be non-negative");
        out.push_back(static_cast<std::size_t>(x));
    }
    return out;
}

std::vector<std::int64_t> to_ints(const std::vector<std::size_t>& v) {
    return std::vector<std::int64_t>(v.begin(), v.end());
}

std::vector<std::string> names_at(const std::vector<std::string>& names, const std::vector<std::size_t>& idx) {
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(names[i]);
    return out;
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "seed", "feature_set", "target", "mode", "classifier", "data_dir", "dataset", "malware_package",
        "tolerance_ms", "test_fraction", "target_benign_fraction", "per_version_rebalance", "cv_folds",
        "epsilon_f1", "grid", "grid.adaboost_n_estimators", "grid.rf_n_trees", "grid.rf_max_depth",
        "grid.rf_max_features", "grid.knn_k", "ranking.n_trees", "ranking.max_depth", "ranking.max_features",
        "elimination.n_trees", "elimination.n_estimators", "elimination.k", "out_dir", "format", "workers",
        "matrix.feature_sets", "matrix.targets", "matrix.modes", "matrix.classifiers", "gen.n_users", "gen.days",
        "gen.seed", "gen.user_baseline_spread", "gen.snapshot_dropout_rate", "gen.malicious_session_fraction",
        "gen.malicious_action_fraction", "gen.missing_cell_rate", "gen.versions", "gen.events_min",
        "gen.events_max", "model", "predictions"};
    return keys;
}

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
    ExperimentConfig e;
    e.seed = c.get_uint("seed", e.seed);
    if (auto v = c.get("feature_set")) e.feature_set = parse_feature_set(*v);
    if (auto v = c.get("target")) e.target = Target::parse(*v);
    if (auto v = c.get("mode")) e.mode = parse_split_mode(*v);
    if (auto v = c.get("classifier")) e.classifier = parse_classifier(*v);
    e.data_dir = c.get_string("data_dir", e.data_dir);
    e.dataset_csv = c.get_string("dataset", e.dataset_csv);
    e.malware_package = c.get_string("malware_package", e.malware_package);
    e.tolerance_ms = c.get_int("tolerance_ms", e.tolerance_ms);
    e.test_fraction = c.get_double("test_fraction", e.test_fraction);
    e.target_benign_fraction = c.get_double("target_benign_fraction", e.target_benign_fraction);
    e.per_version_rebalance = c.get_bool("per_version_rebalance", e.per_version_rebalance);
    e.cv_folds = c.get_uint("cv_folds", e.cv_folds);
    e.epsilon_f1 = c.get_double("epsilon_f1", e.epsilon_f1);
    if (auto v = c.get("grid")) {
        const auto g = to_lower(*v);
        if (g == "full") e.grid = HyperGrid::full();
        else if (g == "desk") e.grid = HyperGrid::desk();
        else fail(ErrorCode::ConfigError, "grid must be 'desk' or 'full', got '" + *v + "'");
    }
    auto& g = e.grid;
    g.ab_estimators = to_sizes(c.get_int_list("grid.adaboost_n_estimators", to_ints(g.ab_estimators)));
    g.rf_trees = to_sizes(c.get_int_list("grid.rf_n_trees", to_ints(g.rf_trees)));
    const auto depths = c.get_int_list("grid.rf_max_depth", std::vector<std::int64_t>(g.rf_max_depth.begin(),
                                                                                      g.rf_max_depth.end()));
    g.rf_max_depth.assign(depths.begin(), depths.end());
    g.rf_max_features = to_sizes(c.get_int_list("grid.rf_max_features", to_ints(g.rf_max_features)));
    g.knn_k = to_sizes(c.get_int_list("grid.knn_k", to_ints(g.knn_k)));
    try {
        g.validate();
    } catch (const Error& err) {
        fail(ErrorCode::ConfigError, err.what());
    }
    e.ranking_forest.n_trees = c.get_uint("ranking.n_trees", e.ranking_forest.n_trees);
    e.ranking_forest.max_depth = static_cast<int>(c.get_int("ranking.max_depth", e.ranking_forest.max_depth));
    e.ranking_forest.max_features = c.get_uint("ranking.max_features", e.ranking_forest.max_features);
    e.elimination_trees = c.get_uint("elimination.n_trees", e.elimination_trees);
    e.elimination_estimators = c.get_uint("elimination.n_estimators", e.elimination_estimators);
    e.elimination_k = c.get_uint("elimination.k", e.elimination_k);
    if (!(e.test_fraction > 0.0 && e.test_fraction < 1.0)) fail(ErrorCode::ConfigError, "test_fraction must lie in (0, 1)");
    if (!(e.target_benign_fraction > 0.0 && e.target_benign_fraction < 1.0))
        fail(ErrorCode::ConfigError, "target_benign_fraction must lie in (0, 1)");
    if (e.cv_folds < 2) fail(ErrorCode::ConfigError, "cv_folds must be at least 2");
    if (e.epsilon_f1 < 0.0) fail(ErrorCode::ConfigError, "epsilon_f1 must be non-negative");
    if (e.ranking_forest.n_trees == 0 || e.elimination_trees == 0 || e.elimination_estimators == 0 ||
        e.elimination_k == 0)
        fail(ErrorCode::ConfigError, "ranking and elimination settings must be positive");
    if (e.tolerance_ms < 0) fail(ErrorCode::ConfigError, "tolerance_ms must be non-negative");
    return e;
}

nlohmann::json ExperimentConfig::to_json() const {
    return {{"feature_set", std::string(to_string(feature_set))},
            {"target", target.name()},
            {"mode", std::string(to_string(mode))},
            {"classifier", std::string(to_string(classifier))},
            {"seed", seed},
            {"malware_package", malware_package},
            {"tolerance_ms", tolerance_ms},
            {"test_fraction", test_fraction},
            {"target_benign_fraction", target_benign_fraction},
            {"per_version_rebalance", per_version_rebalance},
            {"cv_folds", cv_folds},
            {"epsilon_f1", epsilon_f1},
            {"grid", grid.to_json()},
            {"ranking_forest",
             {{"n_trees", ranking_forest.n_trees},
              {"max_depth", ranking_forest.max_depth},
              {"max_features", ranking_forest.max_features}}},
            {"elimination",
             {{"n_trees", elimination_trees}, {"n_estimators", elimination_estimators}, {"k", elimination_k}}}};
}

GenSpec gen_spec_from_config(const Config& c) {
    GenSpec g;
    g.n_users = c.get_uint("gen.n_users", g.n_users);
    g.days = c.get_uint("gen.days", g.days);
    g.seed = c.get_uint("gen.seed", c.get_uint("seed", g.seed));
    g.user_baseline_spread = c.get_double("gen.user_baseline_spread", g.user_baseline_spread);
    g.snapshot_dropout_rate = c.get_double("gen.snapshot_dropout_rate", g.snapshot_dropout_rate);
    g.malicious_session_fraction = c.get_double("gen.malicious_session_fraction", g.malicious_session_fraction);
    g.malicious_action_fraction = c.get_double("gen.malicious_action_fraction", g.malicious_action_fraction);
    g.missing_cell_rate = c.get_double("gen.missing_cell_rate", g.missing_cell_rate);
    g.events_min = c.get_uint("gen.events_min", g.events_min);
    g.events_max = c.get_uint("gen.events_max", g.events_max);
    g.malware_package = c.get_string("malware_package", g.malware_package);
    if (c.has("gen.versions")) {
        std::vector<VersionProfile> keep;
        const auto wanted = c.get_int_list("gen.versions", {});
        for (auto v : wanted) {
            auto it = std::find_if(g.profiles.begin(), g.profiles.end(),
                                   [&](const VersionProfile& p) { return p.version == v; });
            if (it == g.profiles.end())
                fail(ErrorCode::ExcludedVersion, "no generator profile for version " + std::to_string(v));
            keep.push_back(*it);
        }
        g.profiles = std::move(keep);
    }
    try {
        g.validate();
    } catch (const Error& err) {
        fail(ErrorCode::ConfigError, err.what());
    }
    return g;
}

LoadedData load_data(const ExperimentConfig& cfg) {
    return stage("ingest", [&] {
        LoadedData out;
        if (!cfg.dataset_csv.empty()) {
            out.dataset = project_feature_set(dataset_from_csv(cfg.dataset_csv), FeatureSet::Combined);
            out.join_stats = {{"source", "joined table"}, {"rows", out.dataset.size()}};
            return out;
        }
        auto events = parse_malware_file(cfg.data_dir + "/malware.csv");
        auto system = parse_system_file(cfg.data_dir + "/system.csv");
        auto apps = parse_apps_file(cfg.data_dir + "/apps.csv");
        sort_records(events);
        sort_records(system);
        sort_records(apps);
        auto joined = asof_join(events, system, apps, cfg.malware_package, {cfg.tolerance_ms});
        out.dataset = std::move(joined.dataset);
        out.join_stats = joined.stats.to_json();
        return out;
    });
}

PreparedSplit prepare_split(const ExperimentConfig& cfg, const Dataset& joined) {
    PreparedSplit out;
    auto& audit = out.audit;
    if (!cfg.target.all() && !is_admitted_version(cfg.target.version))
        fail(ErrorCode::ExcludedVersion, "malware version " + std::to_string(cfg.target.version) +
                                             " is not part of the study");
    const Dataset filtered = stage("version filter", [&] {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < joined.size(); ++r) {
            const int v = joined.meta()[r].malware_version;
            if (is_admitted_version(v) && (cfg.target.all() || v == cfg.target.version)) rows.push_back(r);
        }
        if (rows.empty())
            fail(ErrorCode::EmptyDataset, "no instances for target " + cfg.target.name());
        return project_feature_set(joined.select_rows(rows), cfg.feature_set);
    });
    audit["instances"] = {{"rows", filtered.size()},
                          {"benign", filtered.count(Label::Benign)},
                          {"malicious", filtered.count(Label::Malicious)}};

    const auto split = stage("split", [&] {
        return holdout_split(filtered, {cfg.test_fraction, cfg.mode, mix_seed(cfg.seed, "split")});
    });
    if (cfg.mode == SplitMode::UnknownDevice) audit["test_users"] = split.test_users;

    std::vector<std::string> warnings;
    auto rebalance = [&](const Dataset& d, const char* side) {
        auto r = undersample(d, {cfg.target_benign_fraction, mix_seed(cfg.seed, std::string("rebalance-") + side),
                                 cfg.per_version_rebalance});
        for (auto& w : r.warnings) warnings.push_back(std::string(side) + " " + w);
        return std::move(r.dataset);
    };
    Dataset train = stage("undersample", [&] { return rebalance(split.train, "train"); });
    Dataset test = stage("undersample", [&] { return rebalance(split.test, "test"); });
    audit["train"] = {{"rows_before_rebalance", split.train.size()},
                      {"rows", train.size()},
                      {"benign", train.count(Label::Benign)},
                      {"malicious", train.count(Label::Malicious)}};
    audit["test"] = {{"rows_before_rebalance", split.test.size()},
                     {"rows", test.size()},
                     {"benign", test.count(Label::Benign)},
                     {"malicious", test.count(Label::Malicious)}};

    auto imputed = stage("impute", [&] { return impute(train, {test}); });
    for (auto& w : imputed.warnings) warnings.push_back(w);
    out.imputer = imputed.imputer;
    out.train = std::move(imputed.train);
    out.test = std::move(imputed.others.front());

    if (cfg.classifier == ClassifierKind::Knn) {
        stage("scale", [&] {
            out.scaler = fit_scaler(out.train);
            out.train = apply_scaler(*out.scaler, out.train);
            out.test = apply_scaler(*out.scaler, out.test);
            return 0;
        });
    }
    audit["warnings"] = warnings;
    return out;
}

nlohmann::json ModelBundle::to_json() const {
    nlohmann::json j{{"format_version", std::string(kFormatVersion)},
                     {"catalog_version", catalog_version},
                     {"catalog_fingerprint", catalog_fingerprint},
                     {"feature_set", std::string(to_string(feature_set))},
                     {"target", target.name()},
                     {"input_features", input_features},
                     {"features", features},
                     {"imputer", imputer.to_json()},
                     {"hyperparameters", hp.to_json()},
                     {"classifier", classifier_to_json(model)},
                     {"malware_package", malware_package},
                     {"tolerance_ms", tolerance_ms}};
    j["scaler"] = scaler ? scaler->to_json() : nlohmann::json(nullptr);
    return j;
}

ModelBundle ModelBundle::from_json(const nlohmann::json& j) {
    const auto& catalog = FeatureCatalog::builtin();
    const auto version = j.value("format_version", std::string());
    if (version != kFormatVersion)
        fail(ErrorCode::ModelVersionMismatch, "model format '" + version + "' is not supported");
    if (j.value("catalog_version", std::string()) != FeatureCatalog::kVersion ||
        j.value("catalog_fingerprint", std::string()) != catalog.fingerprint())
        fail(ErrorCode::ModelVersionMismatch, "model was trained against a different feature catalog");
    ModelBundle b;
    b.catalog_version = j.at("catalog_version").get<std::string>();
    b.catalog_fingerprint = j.at("catalog_fingerprint").get<std::string>();
    b.feature_set = parse_feature_set(j.at("feature_set").get<std::string>());
    b.target = Target::parse(j.at("target").get<std::string>());
    b.input_features = j.at("input_features").get<std::vector<std::string>>();
    b.features = j.at("features").get<std::vector<std::string>>();
    b.imputer = MedianImputer::from_json(j.at("imputer"));
    if (!j.at("scaler").is_null()) b.scaler = MinMaxScaler::from_json(j.at("scaler"));
    b.hp = Hyperparameters::from_json(j.at("hyperparameters"));
    b.model = classifier_from_json(j.at("classifier"));
    b.malware_package = j.at("malware_package").get<std::string>();
    b.tolerance_ms = j.at("tolerance_ms").get<std::int64_t>();
    return b;
}

namespace {

Hyperparameters elimination_hp(const ExperimentConfig& cfg) {
    Hyperparameters hp = default_hyperparameters(cfg.classifier);
    hp.n_trees = cfg.elimination_trees;
    hp.n_estimators = cfg.elimination_estimators;
    hp.k = cfg.elimination_k;
    return hp;
}

std::vector<FoldData> subset_folds(std::span<const FoldData> folds, const std::vector<std::size_t>& cols) {
    std::vector<FoldData> out;
    for (const auto& f : folds)
        out.push_back({f.train_x.select_columns(cols), f.validate_x.select_columns(cols), f.train_y, f.validate_y});
    return out;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const LoadedData& data) {
    PreparedSplit prep = prepare_split(cfg, data.dataset);
    const auto names = prep.train.feature_names();
    const FeatureMatrix& x = prep.train.features();
    const auto& y = prep.train.labels();
    const FeatureMatrix& tx = prep.test.features();
    const auto& ty = prep.test.labels();
    nlohmann::json audit = std::move(prep.audit);
    audit["join"] = data.join_stats;
    audit["config"] = cfg.to_json();

    const auto ranking = stage("ranking", [&] {
        const auto forest = fit_random_forest(x, y, cfg.ranking_forest, mix_seed(cfg.seed, "ranking"));
        return importance_ranking(forest);
    });
    std::vector<std::size_t> order;
    nlohmann::json ranking_json = nlohmann::json::array();
    for (const auto& [i, imp] : ranking) {
        order.push_back(i);
        ranking_json.push_back({{"feature", names[i]}, {"importance", imp}});
    }
    audit["importance"] = ranking_json;

    const auto folds = stage("cross-validation folds", [&] {
        return materialize_folds(x, y, kfold(x.rows(), cfg.cv_folds, mix_seed(cfg.seed, "folds")),
                                 cfg.classifier == ClassifierKind::Knn);
    });
    const auto elim = stage("feature elimination", [&] {
        return rfecv(order, elimination_hp(cfg), folds, mix_seed(cfg.seed, "cv"), cfg.epsilon_f1);
    });
    audit["elimination"] = elim.to_json(names);

    const auto grid = stage("grid search", [&] {
        const auto sub = subset_folds(folds, elim.selected());
        return grid_search_cv(cfg.grid, cfg.classifier, sub, mix_seed(cfg.seed, "cv"));
    });
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& p : grid.trace) trace.push_back({{"hyperparameters", p.hp.to_json()}, {"cv_f1", p.cv_f1}});
    audit["grid_search"] = {{"best", grid.best.to_json()}, {"best_cv_f1", grid.best_cv_f1}, {"trace", trace}};

    // Candidate pool: the grid winner at every elimination size.
    const std::uint64_t fit_seed = mix_seed(cfg.seed, "final");
    std::vector<CandidateResult> pool = stage("candidate pool", [&] {
        std::vector<CandidateResult> out;
        std::vector<std::vector<Label>> knn_preds;
        if (cfg.classifier == ClassifierKind::Knn)
            knn_preds = knn_prefix_predictions(x, y, tx, order, grid.best.k);
        for (std::size_t s = 1; s <= order.size(); ++s) {
            const auto cols = elim.subset(s);
            CandidateResult c;
            c.hp = grid.best;
            c.features = names_at(names, cols);
            c.cv_f1 = elim.f1_by_size[s - 1];
            if (cfg.classifier == ClassifierKind::Knn) {
                c.predictions = std::move(knn_preds[s - 1]);
            } else {
                const auto model = fit_classifier(grid.best, x.select_columns(cols), y, fit_seed);
                c.predictions = predict_all(model, tx.select_columns(cols));
            }
            c.test = metrics(confusion(c.predictions, ty));
            c.test.n_features = cols.size();
            out.push_back(std::move(c));
        }
        return out;
    });
    const auto outcome = stage("selection", [&] { return select_least_features(pool, ty); });

    // The chosen candidate is refit under the clock; its predictions are the
    // reported ones.
    const auto& chosen = pool[outcome.chosen];
    std::vector<std::size_t> chosen_cols;
    for (const auto& f : chosen.features)
        chosen_cols.push_back(static_cast<std::size_t>(std::find(names.begin(), names.end(), f) - names.begin()));
    const FeatureMatrix train_cols = x.select_columns(chosen_cols);
    const FeatureMatrix test_cols = tx.select_columns(chosen_cols);
    auto [model, train_seconds] = timed([&] { return fit_classifier(chosen.hp, train_cols, y, fit_seed); });
    auto [final_preds, test_seconds] = timed([&] { return predict_all(model, test_cols); });

    ExperimentOutcome out;
    auto& r = out.report;
    r.target = cfg.target;
    r.mode = cfg.mode;
    r.classifier = cfg.classifier;
    r.feature_set = cfg.feature_set;
    r.seed = cfg.seed;
    r.hp = chosen.hp;
    r.features = chosen.features;
    r.cv_f1 = chosen.cv_f1;
    r.test = metrics(confusion(final_preds, ty));
    r.test.n_features = chosen.features.size();
    r.test.train_seconds = train_seconds;
    r.test.test_seconds = test_seconds;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        CandidateSummary s;
        s.hp = pool[i].hp;
        s.n_features = pool[i].features.size();
        s.cv_f1 = pool[i].cv_f1;
        s.test = pool[i].test;
        s.vs_best = outcome.vs_best[i];
        s.equivalent = std::find(outcome.equivalent.begin(), outcome.equivalent.end(), i) != outcome.equivalent.end();
        r.pool.push_back(std::move(s));
    }
    r.best_index = outcome.best;
    r.chosen_index = outcome.chosen;
    audit["notes"] = {"AdaBoost weak learners are depth-1 Gini stumps",
                      "random forest trees are grown on bootstrap samples",
                      "cross-validation folds are not stratified",
                      "elimination keeps the smallest size within epsilon_f1 of the best mean CV F1",
                      "candidate pool: grid winner at every elimination size"};
    r.audit = std::move(audit);

    auto& b = out.bundle;
    b.catalog_version = std::string(FeatureCatalog::kVersion);
    b.catalog_fingerprint = FeatureCatalog::builtin().fingerprint();
    b.feature_set = cfg.feature_set;
    b.target = cfg.target;
    b.input_features = names;
    b.features = chosen.features;
    b.imputer = prep.imputer;
    b.scaler = prep.scaler;
    b.hp = chosen.hp;
    b.model = std::move(model);
    b.malware_package = cfg.malware_package;
    b.tolerance_ms = cfg.tolerance_ms;
    return out;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, load_data(cfg)); }

MatrixSpec MatrixSpec::from_config(const Config& c) {
    MatrixSpec m;
    auto expand = [&](const std::string& key, auto all, auto parse, auto& dest) {
        for (const auto& item : c.get_list(key, {})) {
            if (to_lower(item) == "all") {
                dest = all;
                return;
            }
            dest.push_back(parse(item));
        }
    };
    expand("matrix.feature_sets", std::vector<FeatureSet>{FeatureSet::Global, FeatureSet::Apps, FeatureSet::Combined},
           [](const std::string& s) { return parse_feature_set(s); }, m.feature_sets);
    std::vector<Target> singles{Target{}};
    for (int v : {1, 2, 3, 4, 5, 6, 7, 8, 9, 11}) singles.push_back({v});
    expand("matrix.targets", singles, [](const std::string& s) { return Target::parse(s); }, m.targets);
    expand("matrix.modes", std::vector<SplitMode>{SplitMode::NormalHoldout, SplitMode::UnknownDevice},
           [](const std::string& s) { return parse_split_mode(s); }, m.modes);
    expand("matrix.classifiers",
           std::vector<ClassifierKind>{ClassifierKind::RandomForest, ClassifierKind::AdaBoost, ClassifierKind::Knn},
           [](const std::string& s) { return parse_classifier(s); }, m.classifiers);
    return m;
}

std::vector<ExperimentConfig> MatrixSpec::expand(const ExperimentConfig& base) const {
    const auto sets = feature_sets.empty() ? std::vector<FeatureSet>{base.feature_set} : feature_sets;
    const auto tgts = targets.empty() ? std::vector<Target>{base.target} : targets;
    const auto mds = modes.empty() ? std::vector<SplitMode>{base.mode} : modes;
    const auto cls = classifiers.empty() ? std::vector<ClassifierKind>{base.classifier} : classifiers;
    std::vector<ExperimentConfig> out;
    for (const auto& t : tgts)
        for (auto m : mds)
            for (auto k : cls)
                for (auto s : sets) {
                    ExperimentConfig c = base;
                    c.target = t;
                    c.mode = m;
                    c.classifier = k;
                    c.feature_set = s;
                    out.push_back(std::move(c));
                }
    return out;
}

MatrixResult run_matrix(const ExperimentConfig& base, const MatrixSpec& spec, std::size_t workers) {
    const auto cells = spec.expand(base);
    const LoadedData data = load_data(base);
    MatrixResult result;
    std::vector<std::optional<EvaluationReport>> slots(cells.size());
    std::vector<std::string> errors(cells.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                slots[i] = run_experiment(cells[i], data).report;
            } catch (const Error& e) {
                errors[i] = std::string(to_string(e.code())) + ": " + e.what();
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, cells.size()));
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(work);
    work();
    for (auto& t : threads) t.join();

    for (std::size_t i = 0; i < cells.size(); ++i) {
        EvaluationReport probe;
        probe.target = cells[i].target;
        probe.mode = cells[i].mode;
        probe.classifier = cells[i].classifier;
        probe.feature_set = cells[i].feature_set;
        result.expected.push_back(probe.cell_name());
        if (slots[i]) result.reports.push_back(std::move(*slots[i]));
        else result.failures.emplace_back(probe.cell_name(), errors[i]);
    }
    return result;
}

std::vector<Prediction> predict(const ModelBundle& bundle, const std::string& data_dir) {
    namespace fs = std::filesystem;
    const std::string paths[] = {data_dir + "/malware.csv", data_dir + "/system.csv", data_dir + "/apps.csv"};
    for (const auto& p : paths) {
        std::error_code ec;
        if (!fs::exists(p, ec)) fail(ErrorCode::IoError, "missing probe export " + p);
        if (fs::file_size(p, ec) == 0) return {};
    }
    auto events = parse_malware_file(paths[0]);
    auto system = parse_system_file(paths[1]);
    auto apps = parse_apps_file(paths[2]);
    sort_records(events);
    sort_records(system);
    sort_records(apps);
    const auto joined = asof_join(events, system, apps, bundle.malware_package, {bundle.tolerance_ms});
    if (joined.dataset.empty()) return {};

    const Dataset inputs = project_feature_set(joined.dataset, bundle.feature_set);
    if (inputs.feature_names() != bundle.input_features)
        fail(ErrorCode::ModelVersionMismatch, "probe columns differ from the model's inputs");
    FeatureMatrix x = bundle.imputer.transform(inputs.features());
    if (bundle.scaler) x = bundle.scaler->transform(x);
    std::vector<std::size_t> cols;
    for (const auto& f : bundle.features) {
        const auto it = std::find(bundle.input_features.begin(), bundle.input_features.end(), f);
        if (it == bundle.input_features.end()) fail(ErrorCode::ModelVersionMismatch, "model feature '" + f + "' unknown");
        cols.push_back(static_cast<std::size_t>(it - bundle.input_features.begin()));
    }
    const FeatureMatrix xs = x.select_columns(cols);
    std::vector<Prediction> out;
    out.reserve(xs.rows());
    for (std::size_t r = 0; r < xs.rows(); ++r) {
        const auto& m = inputs.meta()[r];
        out.push_back({m.user_id, m.timestamp_ms, m.malware_version, mdetect::predict(bundle.model, xs.row(r)),
                       score(bundle.model, xs.row(r)), inputs.labels()[r]});
    }
    return out;
}

std::string predictions_to_csv(const std::vector<Prediction>& predictions) {
    std::string out = "user_id,timestamp,malware_version,predicted,score,action_type\n";
    for (const auto& p : predictions) {
        out += p.user_id + "," + std::to_string(p.timestamp_ms) + "," + std::to_string(p.malware_version) + "," +
               std::string(to_string(p.label)) + "," + format_double(p.score) + "," + std::string(to_string(p.truth)) +
               "\n";
    }
    return out;
}

}  // namespace mdetect
