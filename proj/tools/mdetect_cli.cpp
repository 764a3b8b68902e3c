// mdetect command line: generate, ingest, train, evaluate, matrix, predict.
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "mdetect/error.hpp"
#include "mdetect/pipeline.hpp"
#include "mdetect/util.hpp"

using namespace mdetect;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kIncomplete = 4 };

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownFeatureSet:
        case ErrorCode::UnknownFeature:
        case ErrorCode::InvalidSpec:
        case ErrorCode::ConfigError:
        case ErrorCode::ExcludedVersion:
        case ErrorCode::EmptyGrid:
            return kConfig;
        case ErrorCode::IncompleteMatrix:
            return kIncomplete;
        default:
            return kData;
    }
}

struct Flags {
    std::string config_path;
    std::string out_dir;
    std::string data_dir;
    std::string dataset;
    std::string format = "md";
    std::string seed, feature_set, target, mode, classifier, workers;
    std::string model;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_path, "key = value settings file");
    cmd->add_option("--seed", f.seed, "experiment seed");
    cmd->add_option("--out-dir", f.out_dir, "output directory");
    cmd->add_option("--data-dir", f.data_dir, "directory with malware.csv, system.csv, apps.csv");
    cmd->add_option("--format", f.format, "report format")->check(CLI::IsMember({"json", "csv", "md"}));
}

void add_experiment(CLI::App* cmd, Flags& f) {
    cmd->add_option("--feature-set", f.feature_set, "Global, Apps or Combined");
    cmd->add_option("--target", f.target, "AllMalware or SingleMalware-<version>");
    cmd->add_option("--mode", f.mode, "NormalHoldout or UnknownDevice");
    cmd->add_option("--classifier", f.classifier, "RF, AdaBoost or KNN");
    cmd->add_option("--dataset", f.dataset, "joined table written by `ingest`");
}

// Flags override the config file, which overrides defaults.
Config build_config(const Flags& f) {
    Config c = f.config_path.empty() ? Config{} : Config::load(f.config_path);
    auto put = [&](const char* key, const std::string& v) {
        if (!v.empty()) c.set(key, v);
    };
    put("seed", f.seed);
    put("feature_set", f.feature_set);
    put("target", f.target);
    put("mode", f.mode);
    put("classifier", f.classifier);
    put("data_dir", f.data_dir);
    put("dataset", f.dataset);
    put("workers", f.workers);
    put("out_dir", f.out_dir);
    put("model", f.model);
    c.require_known(known_config_keys());
    return c;
}

std::string out_dir_of(const Config& c, const std::string& fallback) {
    const auto dir = c.get_string("out_dir", fallback);
    std::filesystem::create_directories(dir);
    return dir;
}

int cmd_generate(const Flags& f) {
    const Config c = build_config(f);
    const GenSpec spec = gen_spec_from_config(c);
    const auto dir = out_dir_of(c, c.get_string("data_dir", "data/synth"));
    const auto files = generate(spec, dir);
    std::cout << "wrote " << files.events << " events (" << files.malicious_events << " malicious) to " << dir
              << "\n";
    return kOk;
}

int cmd_ingest(const Flags& f) {
    const Config c = build_config(f);
    ExperimentConfig cfg = ExperimentConfig::from_config(c);
    const auto dir = out_dir_of(c, "out");
    const auto data = load_data(cfg);
    write_file(dir + "/joined.csv", dataset_to_csv(data.dataset));
    write_file(dir + "/join_stats.json", data.join_stats.dump(2) + "\n");
    std::cout << data.join_stats.dump(2) << "\n";
    return kOk;
}

int cmd_train(const Flags& f, bool write_model) {
    const Config c = build_config(f);
    const ExperimentConfig cfg = ExperimentConfig::from_config(c);
    const auto dir = out_dir_of(c, "out");
    const auto outcome = run_experiment(cfg);
    const auto format = parse_report_format(f.format);
    const std::vector<EvaluationReport> cells{outcome.report};
    const std::vector<std::string> expected{outcome.report.cell_name()};
    emit_report(cells, expected, dir, format);
    if (write_model) write_file(dir + "/model.json", outcome.bundle.to_json().dump() + "\n");
    std::cout << render_cell(outcome.report, ReportFormat::Markdown);
    return kOk;
}

int cmd_matrix(const Flags& f) {
    const Config c = build_config(f);
    const ExperimentConfig cfg = ExperimentConfig::from_config(c);
    const auto spec = MatrixSpec::from_config(c);
    const auto dir = out_dir_of(c, "out");
    std::size_t workers = c.get_uint("workers", std::max(1U, std::thread::hardware_concurrency()));
    if (workers == 0) fail(ErrorCode::ConfigError, "workers must be positive");
    const auto result = run_matrix(cfg, spec, workers);
    for (const auto& [cell, message] : result.failures) std::cerr << "cell " << cell << " failed: " << message << "\n";
    const auto written = emit_report(result.reports, result.expected, dir, parse_report_format(f.format));
    std::cout << result.reports.size() << " cell(s), " << written.size() << " file(s) in " << dir << "\n";
    return kOk;
}

int cmd_predict(const Flags& f) {
    const Config c = build_config(f);
    const auto model_path = c.get_string("model", "");
    if (model_path.empty()) fail(ErrorCode::ConfigError, "predict needs --model");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(model_path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ModelVersionMismatch, "unreadable model file: " + std::string(e.what()));
    }
    const auto bundle = ModelBundle::from_json(j);
    const auto preds = predict(bundle, c.get_string("data_dir", "data/synth"));
    const auto csv = predictions_to_csv(preds);
    if (c.has("out_dir")) {
        const auto dir = out_dir_of(c, "out");
        write_file(dir + "/predictions.csv", csv);
        std::cout << preds.size() << " prediction(s) in " << dir << "/predictions.csv\n";
    } else {
        std::cout << csv;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Malware action detection from device telemetry"};
    app.require_subcommand(1);
    Flags f;

    auto* gen = app.add_subcommand("generate", "write a synthetic telemetry corpus");
    add_common(gen, f);
    auto* ing = app.add_subcommand("ingest", "join probe exports into a labeled table");
    add_common(ing, f);
    auto* train = app.add_subcommand("train", "run one experiment and save the model");
    add_common(train, f);
    add_experiment(train, f);
    auto* eval = app.add_subcommand("evaluate", "run one experiment and write its report");
    add_common(eval, f);
    add_experiment(eval, f);
    auto* matrix = app.add_subcommand("matrix", "sweep the experiment matrix");
    add_common(matrix, f);
    add_experiment(matrix, f);
    matrix->add_option("--workers", f.workers, "concurrent cells");
    auto* pred = app.add_subcommand("predict", "label probe exports with a saved model");
    add_common(pred, f);
    pred->add_option("--model", f.model, "model.json from `train`")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*gen) return cmd_generate(f);
        if (*ing) return cmd_ingest(f);
        if (*train) return cmd_train(f, true);
        if (*eval) return cmd_train(f, false);
        if (*matrix) return cmd_matrix(f);
        if (*pred) return cmd_predict(f);
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
    return kConfig;
}
