#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mdetect/pipeline.hpp"
#include "mdetect/synthgen.hpp"
#include "mdetect/util.hpp"
#include "support.hpp"

using namespace mdetect;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GenSpec small_spec(std::uint64_t seed) {
    GenSpec g;
    g.n_users = 4;
    g.days = 60;
    g.seed = seed;
    return g;
}

LoadedData load(const std::string& dir) {
    ExperimentConfig cfg;
    cfg.data_dir = dir;
    cfg.malware_package = GenSpec{}.malware_package;
    return load_data(cfg);
}

}  // namespace

TEST(Synthgen, SameSeedSameBytes) {
    const auto a = testing_support::scratch_dir("a");
    const auto b = testing_support::scratch_dir("b");
    const auto c = testing_support::scratch_dir("c");
    generate(small_spec(7), a);
    generate(small_spec(7), b);
    generate(small_spec(8), c);
    for (const char* f : {"malware.csv", "system.csv", "apps.csv", "manifest.json"})
        EXPECT_EQ(slurp(a + "/" + f), slurp(b + "/" + f)) << f;
    EXPECT_NE(slurp(a + "/system.csv"), slurp(c + "/system.csv"));
}

TEST(Synthgen, ManifestAgreesWithMalwareLog) {
    const auto dir = testing_support::scratch_dir("m");
    const auto files = generate(small_spec(3), dir);
    const auto manifest = nlohmann::json::parse(slurp(files.manifest_json));
    const auto events = parse_malware_file(files.malware_csv);
    ASSERT_EQ(events.size(), manifest.at("events").get<std::size_t>());
    ASSERT_EQ(events.size(), manifest.at("event_labels").size());
    std::size_t malicious = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& lab = manifest.at("event_labels")[i];
        EXPECT_EQ(lab[0].get<std::string>(), events[i].user_id);
        EXPECT_EQ(lab[1].get<std::int64_t>(), events[i].timestamp_ms);
        EXPECT_EQ(lab[2].get<int>(), events[i].version);
        EXPECT_EQ(lab[4].get<std::string>(), std::string(to_string(events[i].action_type)));
        malicious += events[i].action_type == Label::Malicious;
    }
    EXPECT_EQ(malicious, manifest.at("malicious_events").get<std::size_t>());
    EXPECT_EQ(malicious, files.malicious_events);
}

TEST(Synthgen, PlantedShiftsSurviveTheJoin) {
    const auto dir = testing_support::scratch_dir("s");
    GenSpec spec = small_spec(11);
    spec.n_users = 6;
    generate(spec, dir);
    const auto data = load(dir);
    const auto& ds = data.dataset;
    ASSERT_GT(ds.size(), 1000u);
    for (const auto& prof : spec.profiles) {
        for (const auto& f : prof.informative) {
            const auto col = ds.catalog().index_of(f.name);
            ASSERT_TRUE(col.has_value()) << f.name;
            double sm = 0, sb = 0;
            std::size_t nm = 0, nb = 0;
            for (std::size_t r = 0; r < ds.size(); ++r) {
                const double v = ds.features().at(r, *col);
                if (is_missing(v)) continue;
                if (ds.labels()[r] == Label::Malicious && ds.meta()[r].malware_version == prof.version) {
                    sm += v;
                    ++nm;
                } else if (ds.labels()[r] == Label::Benign) {
                    sb += v;
                    ++nb;
                }
            }
            ASSERT_GT(nm, 0u) << prof.version;
            const double measured = (sm / nm - sb / nb) / f.stddev;
            const double planted = (f.malicious_mean - f.benign_mean) / f.stddev;
            EXPECT_GE(measured / planted, 0.8) << "v" << prof.version << " " << f.name;
        }
    }
}

TEST(Synthgen, ProfileShape) {
    const auto profiles = default_profiles();
    std::vector<int> versions;
    for (const auto& p : profiles) versions.push_back(p.version);
    EXPECT_EQ(versions, (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 11}));
    const auto& cat = FeatureCatalog::builtin();
    for (const auto& p : profiles) {
        EXPECT_FALSE(p.informative.empty());
        for (const auto& f : p.informative) {
            EXPECT_TRUE(cat.contains(f.name)) << f.name;
            EXPECT_FALSE(feature_scale(f.name).device_constant) << f.name;
        }
        if (p.version == 11) {
            const bool global_network = std::any_of(p.informative.begin(), p.informative.end(), [&](const auto& f) {
                const auto& e = cat.at(f.name);
                return e.set == FeatureSet::Global && e.category == Category::Network;
            });
            EXPECT_TRUE(global_network);
        }
        if (p.version == 4) {
            EXPECT_TRUE(p.low_sample);
            for (const auto& q : profiles)
                if (q.version != 4) EXPECT_LT(p.sessions_per_user, q.sessions_per_user);
        }
    }
}

TEST(Synthgen, InvalidSpecsRejected) {
    const auto dir = testing_support::scratch_dir("bad");
    auto g = small_spec(1);
    g.n_users = 0;
    EXPECT_MDETECT_ERROR(generate(g, dir), InvalidSpec);
    g = small_spec(1);
    g.snapshot_dropout_rate = 1.0;
    EXPECT_MDETECT_ERROR(generate(g, dir), InvalidSpec);
    g = small_spec(1);
    g.profiles[0].version = 10;
    EXPECT_MDETECT_ERROR(generate(g, dir), InvalidSpec);
    g = small_spec(1);
    g.events_max = 1;
    EXPECT_MDETECT_ERROR(generate(g, dir), InvalidSpec);
}

TEST(Synthgen, PlantedClassificationLayout) {
    const auto p = planted_classification(200, 10, 90, 5);
    EXPECT_EQ(p.x.rows(), 200u);
    EXPECT_EQ(p.x.cols(), 100u);
    EXPECT_EQ(p.informative.size(), 10u);
    EXPECT_TRUE(std::is_sorted(p.informative.begin(), p.informative.end()));
    const auto q = planted_classification(200, 10, 90, 5);
    EXPECT_EQ(p.x, q.x);
    EXPECT_EQ(p.y, q.y);
    EXPECT_GT(std::count(p.y.begin(), p.y.end(), Label::Malicious), 0);
    EXPECT_GT(std::count(p.y.begin(), p.y.end(), Label::Benign), 0);
}
