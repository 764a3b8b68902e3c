#include "mdetect/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <tuple>

#include "mdetect/csv.hpp"
#include "mdetect/error.hpp"
#include "mdetect/util.hpp"

namespace mdetect {

std::string_view to_string(ProbeSchema schema) {
    switch (schema) {
        case ProbeSchema::Malware: return "Malware";
        case ProbeSchema::System: return "System";
        case ProbeSchema::Apps: return "Apps";
    }
    return "?";
}

std::vector<std::string> schema_columns(ProbeSchema schema) {
    switch (schema) {
        case ProbeSchema::Malware:
            return {"UserId", "UUID", "Details", "Action", "ActionType", "SessionType", "Version", "SessionID",
                    "Behavior"};
        case ProbeSchema::System: {
            std::vector<std::string> cols = {"userid", "uuid"};
            auto names = FeatureCatalog::builtin().names(FeatureSet::Global);
            cols.insert(cols.end(), names.begin(), names.end());
            return cols;
        }
        case ProbeSchema::Apps: {
            std::vector<std::string> cols = {"userid", "uuid", "applicationname", "packagename"};
            auto names = FeatureCatalog::builtin().names(FeatureSet::Apps);
            cols.insert(cols.end(), names.begin(), names.end());
            return cols;
        }
    }
    return {};
}

bool is_admitted_version(int version) { return version >= 1 && version <= 11 && version != 10; }

namespace {

/// Maps each schema column to its position in the file header.
std::vector<std::size_t> resolve_header(const std::vector<std::string>& header, ProbeSchema schema,
                                        const std::string& path) {
    const auto wanted = schema_columns(schema);
    std::map<std::string, std::size_t> positions;
    for (std::size_t i = 0; i < header.size(); ++i) positions.emplace(to_lower(trim(header[i])), i);
    std::vector<std::size_t> out;
    std::vector<std::string> missing;
    for (const auto& name : wanted) {
        auto it = positions.find(to_lower(name));
        if (it == positions.end()) {
            missing.push_back(name);
        } else {
            out.push_back(it->second);
        }
    }
    if (!missing.empty())
        fail(ErrorCode::SchemaMismatch, path + ": " + std::string(to_string(schema)) +
                                            " probe header lacks column(s): " + join(missing, ", "));
    return out;
}

std::int64_t parse_int(const std::string& cell, std::string_view column, const std::string& path, std::size_t row) {
    const auto text = trim(cell);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc{} && ptr == text.data() + text.size() && !text.empty()) return value;
    // Some exports write integral columns as decimals ("3.0").
    if (auto d = csv::parse_number(text); d && *d == static_cast<double>(static_cast<std::int64_t>(*d)))
        return static_cast<std::int64_t>(*d);
    fail(ErrorCode::InvalidRecord,
         path + ":" + std::to_string(row) + ": column " + std::string(column) + " is not an integer: '" + cell + "'");
}

const std::string& cell_at(const std::vector<std::string>& fields, std::size_t pos) {
    static const std::string empty;
    return pos < fields.size() ? fields[pos] : empty;
}

void read_values(const std::vector<std::string>& fields, const std::vector<std::size_t>& positions,
                 std::size_t first, std::vector<double>& out) {
    out.resize(positions.size() - first);
    for (std::size_t i = first; i < positions.size(); ++i) {
        auto v = csv::parse_number(cell_at(fields, positions[i]));
        out[i - first] = v ? *v : kMissing;
    }
}

template <typename Record>
void check_sorted(const std::vector<Record>& records, std::string_view stream) {
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& a = records[i - 1];
        const auto& b = records[i];
        if (std::tie(a.user_id, a.timestamp_ms) > std::tie(b.user_id, b.timestamp_ms))
            fail(ErrorCode::UnsortedInput, std::string(stream) + " stream is not sorted by (user_id, timestamp) at position " +
                                               std::to_string(i));
    }
}

template <typename Record>
void sort_by_key(std::vector<Record>& records) {
    std::sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
        return std::tie(a.user_id, a.timestamp_ms, a.source_row) < std::tie(b.user_id, b.timestamp_ms, b.source_row);
    });
}

struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;
};

template <typename Record>
std::map<std::string, Range, std::less<>> user_ranges(const std::vector<const Record*>& records) {
    std::map<std::string, Range, std::less<>> out;
    std::size_t i = 0;
    while (i < records.size()) {
        std::size_t j = i;
        while (j < records.size() && records[j]->user_id == records[i]->user_id) ++j;
        out.emplace(records[i]->user_id, Range{i, j});
        i = j;
    }
    return out;
}

/// Earliest record in [t, t + tol] within one user's sorted range. `cursor`
/// only moves forward because events are visited in timestamp order.
template <typename Record>
const Record* match_forward(const std::vector<const Record*>& records, const Range& range, std::size_t& cursor,
                            std::int64_t t, std::int64_t tolerance) {
    while (cursor < range.end && records[cursor]->timestamp_ms < t) ++cursor;
    if (cursor < range.end && records[cursor]->timestamp_ms <= t + tolerance) return records[cursor];
    return nullptr;
}

}  // namespace

std::vector<MalwareEvent> parse_malware_file(const std::string& path) {
    std::vector<MalwareEvent> out;
    std::vector<std::size_t> pos;
    csv::for_each_row(
        path, [&](const std::vector<std::string>& header) { pos = resolve_header(header, ProbeSchema::Malware, path); },
        [&](const std::vector<std::string>& f, std::size_t row) {
            MalwareEvent e;
            e.user_id = std::string(trim(cell_at(f, pos[0])));
            e.timestamp_ms = parse_int(cell_at(f, pos[1]), "UUID", path, row);
            e.details = cell_at(f, pos[2]);
            e.action = cell_at(f, pos[3]);
            try {
                e.action_type = parse_label(cell_at(f, pos[4]));
                e.session_type = parse_label(cell_at(f, pos[5]));
            } catch (const Error& err) {
                fail(ErrorCode::InvalidRecord, path + ":" + std::to_string(row) + ": " + err.what());
            }
            e.version = static_cast<int>(parse_int(cell_at(f, pos[6]), "Version", path, row));
            e.session_id = parse_int(cell_at(f, pos[7]), "SessionID", path, row);
            e.behavior = cell_at(f, pos[8]);
            e.source_row = row;
            if (e.version < 1 || e.version > 12)
                fail(ErrorCode::InvalidRecord,
                     path + ":" + std::to_string(row) + ": malware version " + std::to_string(e.version) + " out of 1..12");
            if (e.session_type == Label::Benign && e.action_type == Label::Malicious)
                fail(ErrorCode::InvalidRecord,
                     path + ":" + std::to_string(row) + ": malicious action inside a benign session");
            out.push_back(std::move(e));
        });
    return out;
}

std::vector<SystemSnapshot> parse_system_file(const std::string& path) {
    std::vector<SystemSnapshot> out;
    std::vector<std::size_t> pos;
    csv::for_each_row(
        path, [&](const std::vector<std::string>& header) { pos = resolve_header(header, ProbeSchema::System, path); },
        [&](const std::vector<std::string>& f, std::size_t row) {
            SystemSnapshot s;
            s.user_id = std::string(trim(cell_at(f, pos[0])));
            s.timestamp_ms = parse_int(cell_at(f, pos[1]), "uuid", path, row);
            read_values(f, pos, 2, s.values);
            s.source_row = row;
            out.push_back(std::move(s));
        });
    return out;
}

std::vector<AppSnapshot> parse_apps_file(const std::string& path) {
    std::vector<AppSnapshot> out;
    std::vector<std::size_t> pos;
    csv::for_each_row(
        path, [&](const std::vector<std::string>& header) { pos = resolve_header(header, ProbeSchema::Apps, path); },
        [&](const std::vector<std::string>& f, std::size_t row) {
            AppSnapshot s;
            s.user_id = std::string(trim(cell_at(f, pos[0])));
            s.timestamp_ms = parse_int(cell_at(f, pos[1]), "uuid", path, row);
            s.application_name = cell_at(f, pos[2]);
            s.package_name = std::string(trim(cell_at(f, pos[3])));
            read_values(f, pos, 4, s.values);
            s.source_row = row;
            out.push_back(std::move(s));
        });
    return out;
}

ProbeRecords parse_probe_file(const std::string& path, ProbeSchema schema) {
    switch (schema) {
        case ProbeSchema::Malware: return parse_malware_file(path);
        case ProbeSchema::System: return parse_system_file(path);
        case ProbeSchema::Apps: return parse_apps_file(path);
    }
    fail(ErrorCode::SchemaMismatch, "unknown probe schema");
}

void sort_records(std::vector<MalwareEvent>& events) { sort_by_key(events); }
void sort_records(std::vector<SystemSnapshot>& snapshots) { sort_by_key(snapshots); }
void sort_records(std::vector<AppSnapshot>& snapshots) { sort_by_key(snapshots); }

nlohmann::json JoinStats::to_json() const {
    nlohmann::json users = nlohmann::json::object();
    for (const auto& [user, s] : per_user) users[user] = {{"events", s.events}, {"matched", s.matched}};
    return {
        {"malware_events_read", malware_events_read},
        {"excluded_version_events", excluded_version_events},
        {"malware_events_total", malware_events_total},
        {"matched", matched},
        {"match_rate", match_rate},
        {"matched_either", matched_either},
        {"match_rate_either", match_rate_either},
        {"per_probe", {{"system", matched_system}, {"apps", matched_apps}, {"system_only", system_only},
                       {"apps_only", apps_only}}},
        {"clock_skew_events", clock_skew_events},
        {"per_user", users},
        {"warnings", warnings},
    };
}

JoinResult asof_join(const std::vector<MalwareEvent>& events, const std::vector<SystemSnapshot>& system,
                     const std::vector<AppSnapshot>& apps, const std::string& malware_package,
                     const JoinConfig& cfg) {
    if (cfg.tolerance_ms < 0) fail(ErrorCode::InvalidSpec, "join tolerance must be non-negative");
    check_sorted(events, "Malware");
    check_sorted(system, "System");

    const auto& catalog = FeatureCatalog::builtin();
    const std::size_t n_global = catalog.names(FeatureSet::Global).size();
    const std::size_t n_apps = catalog.names(FeatureSet::Apps).size();

    std::vector<const SystemSnapshot*> sys;
    sys.reserve(system.size());
    for (const auto& s : system) {
        if (s.values.size() != n_global)
            fail(ErrorCode::SchemaMismatch, "System snapshot row " + std::to_string(s.source_row) + " has " +
                                                std::to_string(s.values.size()) + " values");
        sys.push_back(&s);
    }
    std::vector<const AppSnapshot*> app;
    for (const auto& a : apps) {
        if (a.package_name != malware_package) continue;
        if (a.values.size() != n_apps)
            fail(ErrorCode::SchemaMismatch, "Apps snapshot row " + std::to_string(a.source_row) + " has " +
                                                std::to_string(a.values.size()) + " values");
        app.push_back(&a);
    }
    for (std::size_t i = 1; i < app.size(); ++i) {
        if (std::tie(app[i - 1]->user_id, app[i - 1]->timestamp_ms) > std::tie(app[i]->user_id, app[i]->timestamp_ms))
            fail(ErrorCode::UnsortedInput, "Apps stream is not sorted by (user_id, timestamp) at position " +
                                               std::to_string(i));
    }

    const auto sys_ranges = user_ranges(sys);
    const auto app_ranges = user_ranges(app);

    JoinStats stats;
    stats.malware_events_read = events.size();
    std::vector<double> data;
    std::vector<Label> labels;
    std::vector<InstanceMeta> meta;

    std::size_t i = 0;
    while (i < events.size()) {
        const std::string& user = events[i].user_id;
        std::size_t j = i;
        while (j < events.size() && events[j].user_id == user) ++j;

        const Range no_range{};
        auto sit = sys_ranges.find(user);
        auto ait = app_ranges.find(user);
        const Range sr = sit == sys_ranges.end() ? no_range : sit->second;
        const Range ar = ait == app_ranges.end() ? no_range : ait->second;
        std::size_t sys_cursor = sr.begin;
        std::size_t app_cursor = ar.begin;
        std::int64_t last_snapshot = INT64_MIN;
        if (sr.end > sr.begin) last_snapshot = std::max(last_snapshot, sys[sr.end - 1]->timestamp_ms);
        if (ar.end > ar.begin) last_snapshot = std::max(last_snapshot, app[ar.end - 1]->timestamp_ms);

        auto& user_stats = stats.per_user[user];
        for (std::size_t e = i; e < j; ++e) {
            const MalwareEvent& ev = events[e];
            if (!is_admitted_version(ev.version)) {
                ++stats.excluded_version_events;
                continue;
            }
            ++stats.malware_events_total;
            ++user_stats.events;
            if (ev.timestamp_ms > last_snapshot) ++stats.clock_skew_events;

            const SystemSnapshot* s = match_forward(sys, sr, sys_cursor, ev.timestamp_ms, cfg.tolerance_ms);
            const AppSnapshot* a = match_forward(app, ar, app_cursor, ev.timestamp_ms, cfg.tolerance_ms);
            stats.matched_system += (s != nullptr);
            stats.matched_apps += (a != nullptr);
            if (s || a) ++stats.matched_either;
            if (s && !a) ++stats.system_only;
            if (a && !s) ++stats.apps_only;
            if (!s || !a) continue;

            ++stats.matched;
            ++user_stats.matched;
            data.insert(data.end(), s->values.begin(), s->values.end());
            data.insert(data.end(), a->values.begin(), a->values.end());
            labels.push_back(ev.action_type);
            meta.push_back({ev.user_id, ev.timestamp_ms, ev.version});
        }
        i = j;
    }

    if (stats.malware_events_total > 0) {
        stats.match_rate = static_cast<double>(stats.matched) / static_cast<double>(stats.malware_events_total);
        stats.match_rate_either =
            static_cast<double>(stats.matched_either) / static_cast<double>(stats.malware_events_total);
    }
    if (stats.clock_skew_events > 0)
        stats.warnings.push_back("ClockSkew: " + std::to_string(stats.clock_skew_events) +
                                 " event(s) are later than every snapshot of their user");
    if (stats.excluded_version_events > 0)
        stats.warnings.push_back("dropped " + std::to_string(stats.excluded_version_events) +
                                 " event(s) from excluded malware versions 10/12");

    const std::size_t rows = labels.size();
    Dataset dataset(catalog, FeatureMatrix(rows, catalog.size(), std::move(data)), std::move(labels), std::move(meta),
                    Provenance::RealImport);
    return {std::move(dataset), std::move(stats)};
}

std::string dataset_to_csv(const Dataset& dataset) {
    std::string out = "user_id,timestamp,malware_version,label";
    for (const auto& e : dataset.catalog().entries()) {
        out += ',';
        out += csv::escape(e.name);
    }
    out += '\n';
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        const auto& m = dataset.meta()[r];
        out += csv::escape(m.user_id);
        out += ',';
        out += std::to_string(m.timestamp_ms);
        out += ',';
        out += std::to_string(m.malware_version);
        out += ',';
        out += to_string(dataset.labels()[r]);
        for (double v : dataset.features().row(r)) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

Dataset dataset_from_csv(const std::string& path) {
    std::vector<std::string> names;
    std::vector<double> data;
    std::vector<Label> labels;
    std::vector<InstanceMeta> meta;
    csv::for_each_row(
        path,
        [&](const std::vector<std::string>& header) {
            if (header.size() < 4 || header[0] != "user_id" || header[1] != "timestamp" ||
                header[2] != "malware_version" || header[3] != "label")
                fail(ErrorCode::SchemaMismatch, path + ": expected user_id,timestamp,malware_version,label,...");
            names.assign(header.begin() + 4, header.end());
        },
        [&](const std::vector<std::string>& f, std::size_t row) {
            if (f.size() != names.size() + 4)
                fail(ErrorCode::InvalidRecord, path + ":" + std::to_string(row) + ": wrong field count");
            meta.push_back({f[0], parse_int(f[1], "timestamp", path, row),
                            static_cast<int>(parse_int(f[2], "malware_version", path, row))});
            labels.push_back(parse_label(f[3]));
            for (std::size_t c = 0; c < names.size(); ++c) {
                auto v = csv::parse_number(f[c + 4]);
                data.push_back(v ? *v : kMissing);
            }
        });
    FeatureCatalog catalog = FeatureCatalog::builtin().subset(names);
    if (catalog.names() != names)
        fail(ErrorCode::SchemaMismatch, path + ": feature columns are not in canonical catalog order");
    const std::size_t rows = labels.size();
    return Dataset(std::move(catalog), FeatureMatrix(rows, names.size(), std::move(data)), std::move(labels),
                   std::move(meta), Provenance::RealImport);
}

}  // namespace mdetect
