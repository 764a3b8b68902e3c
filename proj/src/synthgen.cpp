#include "mdetect/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "mdetect/csv.hpp"
#include "mdetect/error.hpp"
#include "mdetect/ingest.hpp"
#include "mdetect/util.hpp"

namespace mdetect {

namespace {

const std::set<std::string, std::less<>>& device_constant_names() {
    static const std::set<std::string, std::less<>> names = {
        "battery_health",        "battery_icon_small",     "battery_present", "battery_scale",
        "battery_technology",    "battery_charge_type",    "cpuhertz",        "totalmemory_max_size",
        "totalmemory_total_size", "rsslim",                "priority",        "pid",
        "ppid",                  "pgid",                   "sid",             "start_time",
    };
    return names;
}

// Device-dependent signature: moves with the user's baseline offset.
InformativeFeature planted(const std::string& name, double shift_in_sd) {
    const auto s = feature_scale(name);
    return {name, s.center, s.center + shift_in_sd * s.stddev, s.stddev, 1.0};
}

// Signature that barely depends on the device, so it carries over to unseen users.
InformativeFeature robust(const std::string& name) {
    const auto s = feature_scale(name);
    return {name, s.center, s.center + 5.5 * s.stddev, s.stddev, 0.1};
}

}  // namespace

FeatureScale feature_scale(const std::string& name) {
    FeatureScale s;
    if (name == "traffic_timestamp" || name == "battery_timestamp") {
        s.clock = true;
        return s;
    }
    const std::uint64_t h = fnv1a64(name);
    s.stddev = std::pow(10.0, static_cast<double>(h % 4));  // 1 .. 1000
    s.center = s.stddev * static_cast<double>(20 + (h >> 8) % 80);
    s.device_constant = device_constant_names().count(name) > 0;
    return s;
}

std::vector<VersionProfile> default_profiles() {
    std::vector<VersionProfile> p;
    auto add = [&](int v, std::string desc, std::size_t sessions, bool low, std::vector<InformativeFeature> inf) {
        p.push_back({v, std::move(desc), sessions, low, std::move(inf)});
    };
    add(1, "steals contacts, encrypts and transmits them", 4, false,
        {planted("uidtxbytes", 12.0), planted("cpu_usage", 10.0), planted("traffic_totaltxbytes", 10.0),
         planted("total_cpu", 8.0), robust("stime")});
    add(2, "spyware sending collected data", 4, false,
        {planted("uidtxbytes", 18.0), planted("uidtxpackets", 16.0), planted("traffic_totaltxbytes", 8.0),
         robust("othershareddirty")});
    add(3, "abuses app resources in the background", 4, false, {robust("utime"), planted("rss", 12.0)});
    add(4, "spyware reading SMS", 1, true,
        {planted("uidtxpackets", 8.0), planted("battery_current_avg", 8.0), robust("uidrxpackets")});
    add(5, "phishing overlay", 4, false, {robust("dalvikpss"), planted("num_threads", 12.0)});
    add(6, "adware fetching ads", 4, false,
        {planted("uidrxbytes", 10.0), planted("traffic_totalrxbytes", 8.0), robust("nativeprivatedirty")});
    add(7, "photo theft", 4, false, {robust("nativepss"), planted("cutime", 12.0)});
    add(8, "ransomware locking the screen and encrypting files", 4, false,
        {planted("cpu_usage", 16.0), robust("otherpss"), planted("total_cpu", 12.0),
         planted("totalmemory_used_size", 10.0)});
    add(9, "privilege escalation and hostile downloads", 4, false,
        {planted("uidrxbytes", 14.0), planted("num_threads", 10.0), planted("traffic_totalrxbytes", 10.0),
         planted("cpu_1", 8.0), robust("cstime")});
    add(11, "denial of service flood", 4, false,
        {planted("traffic_totaltxpackets", 18.0), planted("uidtxpackets", 12.0), robust("otherprivatedirty")});
    return p;
}

void GenSpec::validate() const {
    auto bad = [](const std::string& why) { fail(ErrorCode::InvalidSpec, why); };
    if (n_users == 0) bad("n_users must be positive");
    if (days == 0) bad("days must be positive");
    if (system_period_ms <= 0 || apps_period_ms <= 0) bad("probe periods must be positive");
    if (!(snapshot_dropout_rate >= 0.0 && snapshot_dropout_rate < 1.0)) bad("snapshot_dropout_rate must lie in [0, 1)");
    if (!(missing_cell_rate >= 0.0 && missing_cell_rate < 1.0)) bad("missing_cell_rate must lie in [0, 1)");
    if (!(malicious_session_fraction >= 0.0 && malicious_session_fraction <= 1.0))
        bad("malicious_session_fraction must lie in [0, 1]");
    if (!(malicious_action_fraction >= 0.0 && malicious_action_fraction <= 1.0))
        bad("malicious_action_fraction must lie in [0, 1]");
    if (user_baseline_spread < 0.0) bad("user_baseline_spread must be non-negative");
    if (events_min == 0 || events_max < events_min) bad("event counts must satisfy 0 < min <= max");
    if (event_gap_min_ms <= 0 || event_gap_max_ms < event_gap_min_ms) bad("event gaps must satisfy 0 < min <= max");
    if (profiles.empty()) bad("no malware versions to generate");
    if (malware_package == other_package) bad("the second package must differ from the malware package");
    std::set<int> seen;
    for (const auto& p : profiles) {
        if (!is_admitted_version(p.version)) bad("version " + std::to_string(p.version) + " cannot be generated");
        if (!seen.insert(p.version).second) bad("duplicate profile for version " + std::to_string(p.version));
        for (const auto& f : p.informative) {
            if (!FeatureCatalog::builtin().contains(f.name)) bad("informative feature '" + f.name + "' not in catalog");
            if (!(f.stddev > 0.0)) bad("informative feature '" + f.name + "' needs a positive stddev");
            if (f.device_sensitivity < 0.0)
                bad("informative feature '" + f.name + "' needs a non-negative device sensitivity");
        }
    }
}

nlohmann::json GenSpec::to_json() const {
    nlohmann::json profs = nlohmann::json::array();
    for (const auto& p : profiles) {
        nlohmann::json inf = nlohmann::json::array();
        for (const auto& f : p.informative) {
            const auto& e = FeatureCatalog::builtin().at(f.name);
            inf.push_back({{"feature", f.name},
                           {"probe", e.set == FeatureSet::Global ? "System" : "Apps"},
                           {"benign_mean", f.benign_mean},
                           {"malicious_mean", f.malicious_mean},
                           {"stddev", f.stddev},
                           {"device_sensitivity", f.device_sensitivity}});
        }
        profs.push_back({{"version", p.version},
                         {"description", p.description},
                         {"sessions_per_user", p.sessions_per_user},
                         {"low_sample", p.low_sample},
                         {"informative", inf}});
    }
    return {{"n_users", n_users},
            {"days", days},
            {"start_ms", start_ms},
            {"system_period_ms", system_period_ms},
            {"apps_period_ms", apps_period_ms},
            {"events_per_session", {events_min, events_max}},
            {"event_gap_ms", {event_gap_min_ms, event_gap_max_ms}},
            {"malicious_session_fraction", malicious_session_fraction},
            {"malicious_action_fraction", malicious_action_fraction},
            {"snapshot_dropout_rate", snapshot_dropout_rate},
            {"missing_cell_rate", missing_cell_rate},
            {"user_baseline_spread", user_baseline_spread},
            {"malware_package", malware_package},
            {"other_package", other_package},
            {"seed", seed},
            {"profiles", profs}};
}

namespace {

struct Event {
    std::int64_t t;
    Label action;
    Label session;
    int version;
    std::int64_t session_id;
    std::size_t step;
};

struct Span {
    std::int64_t begin, end;
};

constexpr std::array<const char*, 4> kBenignActions{"SyncWeather", "RefreshFeed", "UpdateWidget", "CheckUpdates"};

std::string malicious_action(int version) {
    switch (version) {
        case 1: return "UploadContacts";
        case 2: return "UploadCapture";
        case 3: return "BackgroundWork";
        case 4: return "ReadSms";
        case 5: return "ShowOverlay";
        case 6: return "FetchAd";
        case 7: return "UploadPhotos";
        case 8: return "LockScreen";
        case 9: return "InstallPayload";
        case 11: return "FloodTarget";
        default: return "Malicious";
    }
}

/// Per-probe value model for one user.
class ProbeModel {
public:
    ProbeModel(FeatureSet set, Rng& baseline, double spread) : names_(FeatureCatalog::builtin().names(set)) {
        for (const auto& n : names_) {
            const auto s = feature_scale(n);
            scales_.push_back(s);
            offsets_.push_back(spread * baseline.normal());
            sens_.push_back(1.0);
            // Device constants: a per-user value drawn once.
            constants_.push_back(std::round(s.center + 10.0 * s.stddev * baseline.normal()));
        }
        shift_.assign(names_.size(), {});
        mean_.assign(names_.size(), 0.0);
        sd_.assign(names_.size(), 0.0);
        for (std::size_t i = 0; i < names_.size(); ++i) {
            mean_[i] = scales_[i].center;
            sd_[i] = scales_[i].stddev;
        }
    }

    void plant(const std::vector<VersionProfile>& profiles) {
        for (const auto& p : profiles)
            for (const auto& f : p.informative)
                for (std::size_t i = 0; i < names_.size(); ++i)
                    if (names_[i] == f.name) {
                        shift_[i].push_back({p.version, f.malicious_mean - f.benign_mean});
                        mean_[i] = f.benign_mean;
                        sd_[i] = f.stddev;
                        sens_[i] = f.device_sensitivity;
                    }
    }

    std::size_t size() const { return names_.size(); }

    void row(std::int64_t t, int version, bool malicious, double missing_rate, Rng& rng, std::string& out) const {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            out += ',';
            const auto& s = scales_[i];
            if (s.clock) {
                out += std::to_string(t);
                continue;
            }
            double v;
            if (s.device_constant) {
                v = constants_[i];
            } else {
                v = mean_[i] + sd_[i] * (sens_[i] * offsets_[i] + rng.normal());
                if (malicious)
                    for (const auto& [ver, shift] : shift_[i])
                        if (ver == version) v += shift;
                v = std::round(v * 100.0) / 100.0;
            }
            if (missing_rate > 0.0 && rng.bernoulli(missing_rate)) continue;
            out += format_double(v);
        }
    }

private:
    std::vector<std::string> names_;
    std::vector<FeatureScale> scales_;
    std::vector<double> offsets_;
    std::vector<double> sens_;
    std::vector<double> constants_;
    std::vector<std::vector<std::pair<int, double>>> shift_;
    std::vector<double> mean_;
    std::vector<double> sd_;
};

std::string header_line(ProbeSchema schema) {
    const auto cols = schema_columns(schema);
    return join(cols, ",") + "\n";
}

}  // namespace

GeneratedFiles generate(const GenSpec& spec, const std::string& dir) {
    spec.validate();
    GeneratedFiles files;
    files.malware_csv = dir + "/malware.csv";
    files.system_csv = dir + "/system.csv";
    files.apps_csv = dir + "/apps.csv";
    files.manifest_json = dir + "/manifest.json";

    std::string malware = header_line(ProbeSchema::Malware);
    std::string system = header_line(ProbeSchema::System);
    std::string apps = header_line(ProbeSchema::Apps);
    nlohmann::json event_labels = nlohmann::json::array();

    const std::int64_t day_ms = 86'400'000;
    const std::int64_t block_ms = static_cast<std::int64_t>(spec.days) * day_ms /
                                  static_cast<std::int64_t>(spec.profiles.size());
    std::int64_t session_counter = 0;
    std::map<int, std::string> behavior;
    for (const auto& p : spec.profiles) behavior[p.version] = csv::escape(p.description);

    for (std::size_t u = 0; u < spec.n_users; ++u) {
        char uid[16];
        std::snprintf(uid, sizeof uid, "u%02zu", u + 1);
        const std::string user(uid);
        Rng baseline(mix_seed(mix_seed(spec.seed, "baseline"), u));
        Rng rng(mix_seed(mix_seed(spec.seed, "stream"), u));
        ProbeModel sys_model(FeatureSet::Global, baseline, spec.user_baseline_spread);
        ProbeModel app_model(FeatureSet::Apps, baseline, spec.user_baseline_spread);
        ProbeModel other_model(FeatureSet::Apps, baseline, spec.user_baseline_spread);
        sys_model.plant(spec.profiles);
        app_model.plant(spec.profiles);
        const std::int64_t sys_phase = static_cast<std::int64_t>(rng.uniform_index(
            static_cast<std::size_t>(spec.system_period_ms)));
        const std::int64_t app_phase = static_cast<std::int64_t>(rng.uniform_index(
            static_cast<std::size_t>(spec.apps_period_ms)));

        std::vector<Event> events;
        std::vector<Span> spans;
        for (std::size_t b = 0; b < spec.profiles.size(); ++b) {
            const auto& prof = spec.profiles[b];
            std::int64_t t = spec.start_ms + static_cast<std::int64_t>(b) * block_ms +
                             static_cast<std::int64_t>(rng.uniform_index(static_cast<std::size_t>(day_ms)));
            for (std::size_t s = 0; s < prof.sessions_per_user; ++s) {
                const std::int64_t sid = ++session_counter;
                const Label session = rng.bernoulli(spec.malicious_session_fraction) ? Label::Malicious : Label::Benign;
                const std::size_t n_events =
                    spec.events_min + rng.uniform_index(spec.events_max - spec.events_min + 1);
                const std::int64_t begin = t;
                for (std::size_t k = 0; k < n_events; ++k) {
                    const Label action = session == Label::Malicious && rng.bernoulli(spec.malicious_action_fraction)
                                             ? Label::Malicious
                                             : Label::Benign;
                    events.push_back({t, action, session, prof.version, sid, k});
                    t += spec.event_gap_min_ms + static_cast<std::int64_t>(rng.uniform_index(
                                                     static_cast<std::size_t>(spec.event_gap_max_ms -
                                                                              spec.event_gap_min_ms + 1)));
                }
                spans.push_back({begin - 20'000, t + 20'000});
                t += 3'600'000 + static_cast<std::int64_t>(rng.uniform_index(5 * 3'600'000));
            }
        }

        for (const auto& e : events) {
            const bool mal = e.action == Label::Malicious;
            const std::string action = mal ? malicious_action(e.version) : kBenignActions[e.step % kBenignActions.size()];
            malware += user + "," + std::to_string(e.t) + ",session " + std::to_string(e.session_id) + " step " +
                       std::to_string(e.step) + "," + action + "," + std::string(to_string(e.action)) + "," +
                       std::string(to_string(e.session)) + "," + std::to_string(e.version) + "," +
                       std::to_string(e.session_id) + "," + behavior.at(e.version) + "\n";
            event_labels.push_back({user, e.t, e.version, e.session_id, std::string(to_string(e.action))});
            ++files.events;
            if (mal) ++files.malicious_events;
        }

        // Snapshot state: the latest event at most 5 s before the snapshot.
        auto emit_grid = [&](std::int64_t period, std::int64_t phase, auto&& emit_row) {
            std::size_t cursor = 0;
            for (const auto& span : spans) {
                std::int64_t g = span.begin - ((span.begin - phase) % period + period) % period;
                if (g < span.begin) g += period;
                for (; g <= span.end; g += period) {
                    while (cursor + 1 < events.size() && events[cursor + 1].t <= g) ++cursor;
                    const Event* recent = nullptr;
                    if (!events.empty() && events[cursor].t <= g && g - events[cursor].t <= 5000) recent = &events[cursor];
                    const bool mal = recent && recent->action == Label::Malicious;
                    const int version = recent ? recent->version : 0;
                    emit_row(g, version, mal);
                }
            }
        };
        emit_grid(spec.system_period_ms, sys_phase, [&](std::int64_t g, int version, bool mal) {
            if (rng.bernoulli(spec.snapshot_dropout_rate)) return;
            system += user + "," + std::to_string(g);
            sys_model.row(g, version, mal, spec.missing_cell_rate, rng, system);
            system += '\n';
        });
        emit_grid(spec.apps_period_ms, app_phase, [&](std::int64_t g, int version, bool mal) {
            if (rng.bernoulli(0.25)) {
                apps += user + "," + std::to_string(g) + ",Chrome," + spec.other_package;
                other_model.row(g, 0, false, spec.missing_cell_rate, rng, apps);
                apps += '\n';
            }
            if (rng.bernoulli(spec.snapshot_dropout_rate)) return;
            apps += user + "," + std::to_string(g) + ",Moriarty," + spec.malware_package;
            app_model.row(g, version, mal, spec.missing_cell_rate, rng, apps);
            apps += '\n';
        });
    }

    write_file(files.malware_csv, malware);
    write_file(files.system_csv, system);
    write_file(files.apps_csv, apps);
    nlohmann::json manifest{{"spec", spec.to_json()},
                            {"events", files.events},
                            {"malicious_events", files.malicious_events},
                            {"event_labels", event_labels}};
    write_file(files.manifest_json, manifest.dump(1) + "\n");
    return files;
}

PlantedTable planted_classification(std::size_t n_rows, std::size_t n_informative, std::size_t n_noise,
                                    std::uint64_t seed, double shift) {
    Rng rng(seed);
    const std::size_t d = n_informative + n_noise;
    auto order = iota_indices(d);
    rng.shuffle(order);
    PlantedTable t;
    t.informative.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_informative));
    std::sort(t.informative.begin(), t.informative.end());
    std::vector<bool> is_inf(d, false);
    for (auto i : t.informative) is_inf[i] = true;
    t.x = FeatureMatrix(n_rows, d);
    t.y.resize(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        t.y[r] = rng.bernoulli(0.5) ? Label::Malicious : Label::Benign;
        const double sign = t.y[r] == Label::Malicious ? 1.0 : 0.0;
        for (std::size_t c = 0; c < d; ++c) t.x.at(r, c) = rng.normal() + (is_inf[c] ? shift * sign : 0.0);
    }
    return t;
}

}  // namespace mdetect
