#include "mdetect/report.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "mdetect/csv.hpp"
#include "mdetect/error.hpp"
#include "mdetect/ingest.hpp"
#include "mdetect/util.hpp"

namespace mdetect {

std::string Target::name() const { return all() ? "AllMalware" : "SingleMalware-" + std::to_string(version); }

Target Target::parse(std::string_view text) {
    const std::string t = to_lower(trim(text));
    if (t == "all" || t == "allmalware" || t == "all_malware") return {};
    std::string digits;
    for (const std::string_view prefix : {"singlemalware-", "singlemalware(", "single_malware:", "single:", "single-",
                                          "singlemalware:"}) {
        if (t.rfind(prefix, 0) == 0) {
            digits = t.substr(prefix.size());
            break;
        }
    }
    if (digits.empty()) digits = t;
    if (!digits.empty() && digits.back() == ')') digits.pop_back();
    int v = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc() || ptr != digits.data() + digits.size())
        fail(ErrorCode::ConfigError, "unknown target '" + std::string(text) + "'");
    if (!is_admitted_version(v))
        fail(ErrorCode::ExcludedVersion, "malware version " + std::to_string(v) + " is not part of the study");
    return {v};
}

std::string_view extension(ReportFormat format) {
    switch (format) {
        case ReportFormat::Json: return "json";
        case ReportFormat::Csv: return "csv";
        case ReportFormat::Markdown: return "md";
    }
    return "";
}

ReportFormat parse_report_format(std::string_view text) {
    const auto t = to_lower(trim(text));
    if (t == "json") return ReportFormat::Json;
    if (t == "csv") return ReportFormat::Csv;
    if (t == "md" || t == "markdown") return ReportFormat::Markdown;
    fail(ErrorCode::ConfigError, "unknown report format '" + std::string(text) + "'");
}

std::string EvaluationReport::cell_name() const {
    return target.name() + "_" + std::string(to_string(mode)) + "_" + std::string(to_string(classifier)) + "_" +
           std::string(to_string(feature_set));
}

std::set<Category> EvaluationReport::categories() const {
    return categories_of(FeatureCatalog::builtin(), features);
}

namespace {

nlohmann::json mcnemar_json(const McNemarResult& r) {
    nlohmann::json j{{"b", r.b}, {"c", r.c}, {"statistic", r.statistic}, {"significant", r.significant}};
    j["exact_p"] = r.exact_p ? nlohmann::json(*r.exact_p) : nlohmann::json(nullptr);
    return j;
}

std::string fixed3(double v) { return format_fixed(v, 3); }

std::string short_set(FeatureSet s) { return s == FeatureSet::Combined ? "Comb." : std::string(to_string(s)); }

constexpr std::array<ClassifierKind, 3> kColumnOrder{ClassifierKind::AdaBoost, ClassifierKind::RandomForest,
                                                     ClassifierKind::Knn};
constexpr std::array<FeatureSet, 3> kSetOrder{FeatureSet::Global, FeatureSet::Apps, FeatureSet::Combined};

bool better_f1(const EvaluationReport& a, const EvaluationReport& b) {
    const auto& fa = a.test.f1;
    const auto& fb = b.test.f1;
    if (fa.num * fb.den != fb.num * fa.den) return fa.num * fb.den > fb.num * fa.den;
    return a.features.size() < b.features.size();
}

const EvaluationReport* find_cell(std::span<const EvaluationReport> cells, const Target& t, SplitMode m,
                                  ClassifierKind k, FeatureSet s) {
    for (const auto& c : cells)
        if (c.target == t && c.mode == m && c.classifier == k && c.feature_set == s) return &c;
    return nullptr;
}

}  // namespace

nlohmann::json EvaluationReport::to_json(bool with_timing) const {
    nlohmann::json pool_json = nlohmann::json::array();
    for (const auto& p : pool) {
        pool_json.push_back({{"hyperparameters", p.hp.to_json()},
                             {"n_features", p.n_features},
                             {"cv_f1", p.cv_f1},
                             {"test", p.test.to_json(with_timing)},
                             {"mcnemar_vs_best", mcnemar_json(p.vs_best)},
                             {"equivalent_to_best", p.equivalent}});
    }
    std::vector<std::string> cats;
    for (auto c : categories()) cats.emplace_back(category_label(c));
    return {{"cell", cell_name()},
            {"target", target.name()},
            {"mode", std::string(to_string(mode))},
            {"classifier", std::string(to_string(classifier))},
            {"feature_set", std::string(to_string(feature_set))},
            {"seed", seed},
            {"hyperparameters", hp.to_json()},
            {"features", features},
            {"categories", cats},
            {"cv_f1", cv_f1},
            {"test", test.to_json(with_timing)},
            {"candidate_pool", pool_json},
            {"best_index", best_index},
            {"chosen_index", chosen_index},
            {"audit", audit}};
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& j) {
    EvaluationReport r;
    r.target = Target::parse(j.at("target").get<std::string>());
    r.mode = parse_split_mode(j.at("mode").get<std::string>());
    r.classifier = parse_classifier(j.at("classifier").get<std::string>());
    r.feature_set = parse_feature_set(j.at("feature_set").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.hp = Hyperparameters::from_json(j.at("hyperparameters"));
    r.features = j.at("features").get<std::vector<std::string>>();
    r.cv_f1 = j.at("cv_f1").get<double>();
    r.test = MetricsReport::from_json(j.at("test"));
    for (const auto& p : j.at("candidate_pool")) {
        CandidateSummary c;
        c.hp = Hyperparameters::from_json(p.at("hyperparameters"));
        c.n_features = p.at("n_features").get<std::size_t>();
        c.cv_f1 = p.at("cv_f1").get<double>();
        c.test = MetricsReport::from_json(p.at("test"));
        const auto& m = p.at("mcnemar_vs_best");
        c.vs_best = mcnemar_from_counts(m.at("b").get<std::uint64_t>(), m.at("c").get<std::uint64_t>());
        c.equivalent = p.at("equivalent_to_best").get<bool>();
        r.pool.push_back(std::move(c));
    }
    r.best_index = j.at("best_index").get<std::size_t>();
    r.chosen_index = j.at("chosen_index").get<std::size_t>();
    r.audit = j.at("audit");
    return r;
}

std::string cell_summary(const MetricsReport& m) {
    return fixed3(m.f1.value()) + " / " + fixed3(m.fpr.value()) + " / " + fixed3(m.fnr.value()) + " / " +
           std::to_string(m.n_features);
}

std::string render_cell(const EvaluationReport& r, ReportFormat format) {
    if (format == ReportFormat::Json) return r.to_json(false).dump(2) + "\n";
    SummaryTable t;
    t.title = r.cell_name();
    t.header = {"Field", "Value"};
    t.rows = {{"Target", r.target.name()},
              {"Test mode", std::string(to_string(r.mode))},
              {"Classifier", std::string(to_string(r.classifier))},
              {"Feature set", std::string(to_string(r.feature_set))},
              {"Hyperparameters", r.hp.describe()},
              {"Nr. features", std::to_string(r.features.size())},
              {"Accuracy", fixed3(r.test.accuracy.value())},
              {"Precision", fixed3(r.test.precision.value())},
              {"Recall", fixed3(r.test.recall.value())},
              {"F1 score", fixed3(r.test.f1.value())},
              {"FPR", fixed3(r.test.fpr.value())},
              {"FNR", fixed3(r.test.fnr.value())},
              {"F1 / FPR / FNR / Nr.", cell_summary(r.test)},
              {"CV F1", fixed3(r.cv_f1)},
              {"Features", join(r.features, " ")}};
    if (!r.test.degenerate.empty()) t.rows.push_back({"Degenerate metrics", join(r.test.degenerate, " ")});
    if (format == ReportFormat::Csv) return t.to_csv();

    SummaryTable pool;
    pool.title = "Candidate pool";
    pool.header = {"#", "Hyperparameters", "Nr. features", "CV F1", "Test F1", "McNemar vs best", "Equivalent"};
    for (std::size_t i = 0; i < r.pool.size(); ++i) {
        const auto& p = r.pool[i];
        std::string mark = i == r.chosen_index ? "chosen" : (p.equivalent ? "yes" : "no");
        if (i == r.best_index) mark += ", best F1";
        pool.rows.push_back({std::to_string(i), p.hp.describe(), std::to_string(p.n_features), fixed3(p.cv_f1),
                             fixed3(p.test.f1.value()), fixed3(p.vs_best.statistic), mark});
    }
    return t.to_markdown() + "\n" + pool.to_markdown();
}

std::string SummaryTable::to_markdown() const {
    std::string out;
    if (!title.empty()) out += "### " + title + "\n\n";
    auto line = [&](const std::vector<std::string>& cells) {
        out += "|";
        for (const auto& c : cells) out += " " + c + " |";
        out += "\n";
    };
    line(header);
    out += "|";
    for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
    out += "\n";
    for (const auto& r : rows) line(r);
    return out;
}

std::string SummaryTable::to_csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv::escape(cells[i]);
        out += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

nlohmann::json SummaryTable::to_json() const { return {{"title", title}, {"header", header}, {"rows", rows}}; }

std::string SummaryTable::render(ReportFormat format) const {
    switch (format) {
        case ReportFormat::Json: return to_json().dump(2) + "\n";
        case ReportFormat::Csv: return to_csv();
        case ReportFormat::Markdown: return to_markdown();
    }
    return {};
}

const std::string& SummaryTable::cell(std::string_view row_label, std::string_view column) const {
    const auto col = std::find(header.begin(), header.end(), column);
    if (col == header.end()) fail(ErrorCode::InvalidSpec, "no column '" + std::string(column) + "'");
    const auto ci = static_cast<std::size_t>(col - header.begin());
    for (const auto& r : rows)
        if (!r.empty() && r[0] == row_label) return r.at(ci);
    fail(ErrorCode::InvalidSpec, "no row '" + std::string(row_label) + "'");
}

SummaryTable overview_table(std::span<const EvaluationReport> cells, const Target& target, SplitMode mode) {
    std::vector<const EvaluationReport*> cols;
    SummaryTable t;
    t.title = "Comparison per classifier: " + target.name() + ", " + std::string(to_string(mode));
    t.header = {"Classifier / Feature set"};
    for (auto k : kColumnOrder)
        for (auto s : kSetOrder)
            if (const auto* c = find_cell(cells, target, mode, k, s)) {
                cols.push_back(c);
                t.header.push_back(std::string(to_string(k)) + " " + short_set(s));
            }
    auto add = [&](std::string label, auto value) {
        std::vector<std::string> row{std::move(label)};
        for (const auto* c : cols) row.push_back(value(*c));
        t.rows.push_back(std::move(row));
    };
    add("Nr. features", [](const EvaluationReport& c) { return std::to_string(c.features.size()); });
    add("Accuracy", [](const EvaluationReport& c) { return fixed3(c.test.accuracy.value()); });
    add("F1 score", [](const EvaluationReport& c) { return fixed3(c.test.f1.value()); });
    add("FPR", [](const EvaluationReport& c) { return fixed3(c.test.fpr.value()); });
    add("FNR", [](const EvaluationReport& c) { return fixed3(c.test.fnr.value()); });
    add("F1 / FPR / FNR / Nr.", [](const EvaluationReport& c) {
        MetricsReport m = c.test;
        m.n_features = c.features.size();
        return cell_summary(m);
    });
    for (auto cat : all_categories()) {
        add(std::string(category_label(cat)),
            [cat](const EvaluationReport& c) { return c.categories().count(cat) ? std::string("✓") : std::string(); });
    }
    return t;
}

PerTypeStats per_type_stats(std::span<const EvaluationReport> cells, SplitMode mode) {
    PerTypeStats st;
    std::set<int> versions;
    std::set<ClassifierKind> kinds;
    for (const auto& c : cells)
        if (!c.target.all() && c.mode == mode) {
            versions.insert(c.target.version);
            kinds.insert(c.classifier);
        }
    st.versions.assign(versions.begin(), versions.end());
    for (auto k : kColumnOrder)
        if (kinds.count(k)) st.classifiers.push_back(k);
    for (auto k : st.classifiers) {
        std::vector<const EvaluationReport*> row;
        std::array<std::vector<double>, 3> values;
        for (int v : st.versions) {
            const EvaluationReport* best = nullptr;
            for (auto s : kSetOrder) {
                const auto* c = find_cell(cells, Target{v}, mode, k, s);
                if (c && (!best || better_f1(*c, *best))) best = c;
            }
            row.push_back(best);
            if (best) {
                values[0].push_back(best->test.f1.value());
                values[1].push_back(best->test.fpr.value());
                values[2].push_back(best->test.fnr.value());
            }
        }
        st.best.push_back(std::move(row));
        st.summary.push_back({mean_stdev(values[0]), mean_stdev(values[1]), mean_stdev(values[2])});
    }
    return st;
}

SummaryTable per_type_table(std::span<const EvaluationReport> cells, SplitMode mode) {
    const auto st = per_type_stats(cells, mode);
    SummaryTable t;
    t.title = "Comparison per malware type: " + std::string(to_string(mode));
    t.header = {"Malware"};
    for (auto k : st.classifiers)
        for (const char* m : {"F1", "FPR", "FNR"}) t.header.push_back(std::string(to_string(k)) + " " + m);
    for (std::size_t vi = 0; vi < st.versions.size(); ++vi) {
        std::vector<std::string> row{std::to_string(st.versions[vi])};
        for (std::size_t ki = 0; ki < st.classifiers.size(); ++ki) {
            const auto* c = st.best[ki][vi];
            if (!c) {
                row.insert(row.end(), {"-", "-", "-"});
                continue;
            }
            row.push_back(fixed3(c->test.f1.value()));
            row.push_back(fixed3(c->test.fpr.value()));
            row.push_back(fixed3(c->test.fnr.value()));
        }
        t.rows.push_back(std::move(row));
    }
    std::vector<std::string> avg{"avg."}, sd{"stdev"};
    for (const auto& s : st.summary)
        for (const auto& m : s) {
            avg.push_back(fixed3(m.mean));
            sd.push_back(fixed3(m.stdev));
        }
    t.rows.push_back(std::move(avg));
    t.rows.push_back(std::move(sd));
    return t;
}

SummaryTable best_per_type_table(std::span<const EvaluationReport> cells, SplitMode mode) {
    SummaryTable t;
    t.title = "Best classifier per malware type: " + std::string(to_string(mode));
    t.header = {"Malware"};
    std::vector<const EvaluationReport*> best;
    std::set<int> versions;
    for (const auto& c : cells)
        if (!c.target.all() && c.mode == mode) versions.insert(c.target.version);
    for (int v : versions) {
        const EvaluationReport* b = nullptr;
        for (auto k : kColumnOrder)
            for (auto s : kSetOrder) {
                const auto* c = find_cell(cells, Target{v}, mode, k, s);
                if (c && (!b || better_f1(*c, *b))) b = c;
            }
        t.header.push_back(std::to_string(v));
        best.push_back(b);
    }
    auto add = [&](std::string label, auto value) {
        std::vector<std::string> row{std::move(label)};
        for (const auto* c : best) row.push_back(value(*c));
        t.rows.push_back(std::move(row));
    };
    add("Classifier", [](const EvaluationReport& c) { return std::string(to_string(c.classifier)); });
    add("Feature set", [](const EvaluationReport& c) { return short_set(c.feature_set); });
    add("Nr. features", [](const EvaluationReport& c) { return std::to_string(c.features.size()); });
    add("F1 score", [](const EvaluationReport& c) { return fixed3(c.test.f1.value()); });
    for (auto cat : all_categories()) {
        add(std::string(category_label(cat)),
            [cat](const EvaluationReport& c) { return c.categories().count(cat) ? std::string("✓") : std::string(); });
    }
    return t;
}

SummaryTable timing_table(std::span<const EvaluationReport> cells, const Target& target, SplitMode mode) {
    SummaryTable t;
    t.title = "Training and testing times: " + target.name() + ", " + std::string(to_string(mode));
    t.header = {"Classifier / Feature set"};
    std::vector<std::string> train{"Train (s)"}, test{"Test (s)"};
    for (auto k : kColumnOrder)
        for (auto s : kSetOrder)
            if (const auto* c = find_cell(cells, target, mode, k, s)) {
                t.header.push_back(std::string(to_string(k)) + " " + short_set(s));
                train.push_back(fixed3(c->test.train_seconds));
                test.push_back(fixed3(c->test.test_seconds));
            }
    t.rows = {train, test};
    return t;
}

std::vector<std::string> emit_report(std::span<const EvaluationReport> cells, std::span<const std::string> expected,
                                     const std::string& out_dir, ReportFormat format) {
    std::set<std::string> present;
    for (const auto& c : cells) present.insert(c.cell_name());
    std::vector<std::string> missing;
    for (const auto& e : expected)
        if (!present.count(e)) missing.push_back(e);
    if (cells.empty() || !missing.empty())
        fail(ErrorCode::IncompleteMatrix,
             cells.empty() ? "no results to report" : "missing cells: " + join(missing, ", "));

    const std::string ext(extension(format));
    std::vector<std::string> written;
    auto put = [&](const std::string& name, const std::string& content) {
        const std::string path = out_dir + "/" + name;
        write_file(path, content);
        written.push_back(path);
    };

    std::vector<const EvaluationReport*> ordered;
    for (const auto& c : cells) ordered.push_back(&c);
    std::sort(ordered.begin(), ordered.end(),
              [](const auto* a, const auto* b) { return a->cell_name() < b->cell_name(); });

    nlohmann::json index = nlohmann::json::array();
    for (const auto* c : ordered) {
        put("cells/" + c->cell_name() + "." + ext, render_cell(*c, format));
        index.push_back({{"cell", c->cell_name()}, {"f1", c->test.f1.value()}, {"n_features", c->features.size()}});
    }

    std::set<std::pair<Target, SplitMode>> groups;
    std::set<SplitMode> single_modes;
    for (const auto& c : cells) {
        groups.insert({c.target, c.mode});
        if (!c.target.all()) single_modes.insert(c.mode);
    }
    for (const auto& [target, mode] : groups) {
        const std::string suffix = target.name() + "_" + std::string(to_string(mode)) + "." + ext;
        if (target.all()) put("overview_" + suffix, overview_table(cells, target, mode).render(format));
        put("timings_" + suffix, timing_table(cells, target, mode).render(format));
    }
    for (auto mode : single_modes) {
        const std::string suffix = std::string(to_string(mode)) + "." + ext;
        put("per_type_" + suffix, per_type_table(cells, mode).render(format));
        put("best_per_type_" + suffix, best_per_type_table(cells, mode).render(format));
    }
    put("bundle.json", nlohmann::json{{"cells", index}}.dump(2) + "\n");
    return written;
}

}  // namespace mdetect
