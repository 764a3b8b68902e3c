#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdetect/data_model.hpp"

namespace mdetect {

/// A feature whose distribution moves while a malicious action is under
/// way. Means and spread are in the feature's own units.
struct InformativeFeature {
    std::string name;
    double benign_mean = 0.0;
    double malicious_mean = 0.0;
    double stddev = 1.0;
    double device_sensitivity = 1.0;  // multiplier on the per-user baseline offset
};

struct VersionProfile {
    int version = 1;
    std::string description;
    std::size_t sessions_per_user = 4;
    bool low_sample = false;
    std::vector<InformativeFeature> informative;
};

/// Every admitted version with its planted signature. The signatures are
/// invented; a few are weak on purpose so that per-type scores spread out.
std::vector<VersionProfile> default_profiles();

/// Scale of one catalog feature in the generated streams.
struct FeatureScale {
    double center = 0.0;
    double stddev = 1.0;
    bool device_constant = false;  // fixed per user (hardware, process ids)
    bool clock = false;            // carries the snapshot timestamp
};
FeatureScale feature_scale(const std::string& name);

struct GenSpec {
    std::size_t n_users = 20;
    std::size_t days = 300;
    std::int64_t start_ms = 1451606400000;  // 2016-01-01
    std::int64_t system_period_ms = 5000;
    std::int64_t apps_period_ms = 5000;
    std::vector<VersionProfile> profiles = default_profiles();
    std::size_t events_min = 40;
    std::size_t events_max = 80;
    std::int64_t event_gap_min_ms = 6000;
    std::int64_t event_gap_max_ms = 12000;
    double malicious_session_fraction = 0.93;
    double malicious_action_fraction = 0.97;
    double snapshot_dropout_rate = 0.07;
    double missing_cell_rate = 0.002;
    double user_baseline_spread = 3.5;  // per-user offset, in units of each feature's stddev
    std::string malware_package = "org.mdetect.moriarty";
    std::string other_package = "com.android.chrome";
    std::uint64_t seed = 42;

    /// Throws InvalidSpec.
    void validate() const;
    nlohmann::json to_json() const;
};

struct GeneratedFiles {
    std::string malware_csv;
    std::string system_csv;
    std::string apps_csv;
    std::string manifest_json;
    std::size_t events = 0;
    std::size_t malicious_events = 0;
};

/// Writes malware.csv, system.csv, apps.csv and manifest.json into `dir`.
GeneratedFiles generate(const GenSpec& spec, const std::string& dir);

/// A plain classification table with `n_informative` features that carry
/// the label and `n_noise` that do not, at shuffled column positions.
struct PlantedTable {
    FeatureMatrix x;
    std::vector<Label> y;
    std::vector<std::size_t> informative;  // ascending column indices
};
PlantedTable planted_classification(std::size_t n_rows, std::size_t n_informative, std::size_t n_noise,
                                    std::uint64_t seed, double shift = 1.0);

}  // namespace mdetect
