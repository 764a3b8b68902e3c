#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdetect/data_model.hpp"
#include "mdetect/metrics.hpp"
#include "mdetect/model.hpp"
#include "mdetect/sampling.hpp"
#include "mdetect/selection.hpp"

namespace mdetect {

/// Classification target: every admitted malware version, or one of them.
struct Target {
    int version = 0;  // 0 means all versions

    bool all() const { return version == 0; }
    /// "AllMalware" or "SingleMalware-<v>".
    std::string name() const;
    /// Accepts "all", "AllMalware", "SingleMalware-3", "SingleMalware(3)",
    /// "single:3" and a bare version number. Throws ConfigError,
    /// ExcludedVersion (10, 12 or outside 1..11).
    static Target parse(std::string_view text);

    auto operator<=>(const Target&) const = default;
};

enum class ReportFormat { Json, Csv, Markdown };
std::string_view extension(ReportFormat format);
ReportFormat parse_report_format(std::string_view text);

struct CandidateSummary {
    Hyperparameters hp;
    std::size_t n_features = 0;
    double cv_f1 = 0.0;
    MetricsReport test;
    McNemarResult vs_best;
    bool equivalent = false;
};

/// Outcome of one cell of the experiment matrix.
struct EvaluationReport {
    Target target;
    SplitMode mode = SplitMode::NormalHoldout;
    ClassifierKind classifier = ClassifierKind::RandomForest;
    FeatureSet feature_set = FeatureSet::Apps;
    std::uint64_t seed = 0;

    Hyperparameters hp;
    std::vector<std::string> features;
    double cv_f1 = 0.0;
    MetricsReport test;  // includes train/test seconds

    std::vector<CandidateSummary> pool;
    std::size_t best_index = 0;
    std::size_t chosen_index = 0;

    /// Dataset sizes, grid and elimination traces, warnings and notes.
    nlohmann::json audit = nlohmann::json::object();

    /// "{target}_{mode}_{classifier}_{featureset}"
    std::string cell_name() const;
    std::set<Category> categories() const;

    /// Timing fields are left out unless asked for, so that repeated runs
    /// compare equal.
    nlohmann::json to_json(bool with_timing = false) const;
    static EvaluationReport from_json(const nlohmann::json& j);
};

std::string render_cell(const EvaluationReport& report, ReportFormat format);

/// A rendered table: one header row and string cells.
struct SummaryTable {
    std::string title;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_markdown() const;
    std::string to_csv() const;
    nlohmann::json to_json() const;
    std::string render(ReportFormat format) const;
    /// Cell lookup by row label (first column) and header text.
    const std::string& cell(std::string_view row_label, std::string_view column) const;
};

/// "F1 / FPR / FNR / Nr." with three decimals, e.g. "0.730 / 0.013 / 0.346 / 29".
std::string cell_summary(const MetricsReport& m);

/// Classifier x feature set overview of one target and test mode: feature
/// count, accuracy, F1, FPR, FNR, the combined cell, and one checkmark row
/// per feature category.
SummaryTable overview_table(std::span<const EvaluationReport> cells, const Target& target, SplitMode mode);

struct PerTypeStats {
    std::vector<int> versions;
    std::vector<ClassifierKind> classifiers;
    /// [classifier][version index] -> chosen report (best F1 across feature sets)
    std::vector<std::vector<const EvaluationReport*>> best;
    /// [classifier] -> (F1, FPR, FNR) summaries over versions
    std::vector<std::array<MeanStdev, 3>> summary;
};

/// Per-malware-type view. For each version and classifier the feature set
/// with the highest F1 is shown (ties: fewer features).
PerTypeStats per_type_stats(std::span<const EvaluationReport> cells, SplitMode mode);
SummaryTable per_type_table(std::span<const EvaluationReport> cells, SplitMode mode);
/// Best classifier and feature set per malware type, with categories used.
SummaryTable best_per_type_table(std::span<const EvaluationReport> cells, SplitMode mode);
/// Training and testing seconds per classifier x feature set.
SummaryTable timing_table(std::span<const EvaluationReport> cells, const Target& target, SplitMode mode);

/// Writes per-cell files, summary tables and a bundle index into `out_dir`.
/// Files holding timings are prefixed "timings_". `expected` lists the cell
/// names the matrix must contain; any missing one (or no cells at all)
/// throws IncompleteMatrix. Returns the written paths.
std::vector<std::string> emit_report(std::span<const EvaluationReport> cells, std::span<const std::string> expected,
                                     const std::string& out_dir, ReportFormat format);

}  // namespace mdetect
