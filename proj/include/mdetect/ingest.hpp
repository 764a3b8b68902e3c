#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mdetect/data_model.hpp"

namespace mdetect {

enum class ProbeSchema { Malware, System, Apps };

std::string_view to_string(ProbeSchema schema);

/// One row of the Malware probe.
struct MalwareEvent {
    std::string user_id;
    std::int64_t timestamp_ms = 0;  // UUID column
    std::string details;
    std::string action;
    Label action_type = Label::Benign;
    Label session_type = Label::Benign;
    int version = 0;
    std::int64_t session_id = 0;
    std::string behavior;
    std::size_t source_row = 0;
};

/// One row of the System probe; `values` follows the catalog's Global order.
struct SystemSnapshot {
    std::string user_id;
    std::int64_t timestamp_ms = 0;
    std::vector<double> values;
    std::size_t source_row = 0;
};

/// One row of the Apps probe; `values` follows the catalog's Apps order.
struct AppSnapshot {
    std::string user_id;
    std::int64_t timestamp_ms = 0;
    std::string application_name;
    std::string package_name;
    std::vector<double> values;
    std::size_t source_row = 0;
};

using ProbeRecords = std::variant<std::vector<MalwareEvent>, std::vector<SystemSnapshot>, std::vector<AppSnapshot>>;

/// Column names, in file order, of each probe export.
std::vector<std::string> schema_columns(ProbeSchema schema);

/// Versions admitted into training and testing (10 and 12 carry no malicious data).
bool is_admitted_version(int version);

/// Header names are matched case-insensitively; extra columns are ignored.
/// Numeric cells that do not parse become kMissing. Throws SchemaMismatch,
/// IoError, InvalidRecord.
ProbeRecords parse_probe_file(const std::string& path, ProbeSchema schema);
std::vector<MalwareEvent> parse_malware_file(const std::string& path);
std::vector<SystemSnapshot> parse_system_file(const std::string& path);
std::vector<AppSnapshot> parse_apps_file(const std::string& path);

/// Sorts by (user_id, timestamp, source_row): a total order, so any
/// permutation of the same records sorts to the same sequence.
void sort_records(std::vector<MalwareEvent>& events);
void sort_records(std::vector<SystemSnapshot>& snapshots);
void sort_records(std::vector<AppSnapshot>& snapshots);

enum class JoinPolicy { NearestAfter };

struct JoinConfig {
    std::int64_t tolerance_ms = 5000;
    JoinPolicy policy = JoinPolicy::NearestAfter;
};

struct UserJoinStats {
    std::size_t events = 0;
    std::size_t matched = 0;
};

struct JoinStats {
    std::size_t malware_events_read = 0;
    std::size_t excluded_version_events = 0;
    std::size_t malware_events_total = 0;  // admitted events
    std::size_t matched = 0;               // both probes matched
    std::size_t matched_system = 0;
    std::size_t matched_apps = 0;
    std::size_t matched_either = 0;
    std::size_t system_only = 0;
    std::size_t apps_only = 0;
    std::size_t clock_skew_events = 0;
    double match_rate = 0.0;         // matched / total
    double match_rate_either = 0.0;  // matched_either / total
    std::map<std::string, UserJoinStats> per_user;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

struct JoinResult {
    Dataset dataset;  // Combined catalog projection
    JoinStats stats;
};

/// Forward-looking as-of join. Each admitted event is paired with the
/// earliest System and Apps snapshot of the same user whose timestamp lies
/// in [t, t + tolerance]; only events with both matches become instances.
/// Apps rows are first restricted to `malware_package`. Every stream must be
/// sorted by (user_id, timestamp), otherwise UnsortedInput is thrown.
JoinResult asof_join(const std::vector<MalwareEvent>& events, const std::vector<SystemSnapshot>& system,
                     const std::vector<AppSnapshot>& apps, const std::string& malware_package,
                     const JoinConfig& cfg = {});

/// features + label + metadata columns; missing values are empty cells.
std::string dataset_to_csv(const Dataset& dataset);
Dataset dataset_from_csv(const std::string& path);

}  // namespace mdetect
