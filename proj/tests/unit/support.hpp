#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "mdetect/data_model.hpp"
#include "mdetect/error.hpp"

namespace testing_support {

inline std::string source_path(const std::string& rel) { return std::string(MDETECT_SOURCE_DIR) + "/" + rel; }

/// Fresh per-test scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    auto dir = std::filesystem::temp_directory_path() / "mdetect_tests" /
               (std::string(info->test_suite_name()) + "." + info->name() + "." + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

/// A dataset over an ad hoc catalog with columns f0..f{d-1}.
inline mdetect::Dataset small_dataset(const std::vector<std::vector<double>>& rows,
                                      const std::vector<mdetect::Label>& labels,
                                      const std::vector<std::string>& users = {},
                                      const std::vector<int>& versions = {}) {
    using namespace mdetect;
    const std::size_t d = rows.empty() ? 0 : rows.front().size();
    std::vector<FeatureEntry> entries;
    for (std::size_t c = 0; c < d; ++c) entries.push_back({"f" + std::to_string(c), FeatureSet::Apps, Category::AppCPU});
    std::vector<LabeledInstance> inst;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        LabeledInstance li;
        li.features = rows[r];
        li.label = labels[r];
        li.user_id = users.empty() ? "u" + std::to_string(r % 4) : users[r];
        li.timestamp_ms = static_cast<std::int64_t>(r) * 1000;
        li.malware_version = versions.empty() ? 1 : versions[r];
        inst.push_back(std::move(li));
    }
    return Dataset(FeatureCatalog(std::move(entries)), std::move(inst), Provenance::Synthetic);
}

}  // namespace testing_support

#define EXPECT_MDETECT_ERROR(stmt, ec)                                            \
    do {                                                                           \
        try {                                                                      \
            stmt;                                                                  \
            ADD_FAILURE() << "expected " #ec;                                      \
        } catch (const mdetect::Error& e) {                                        \
            EXPECT_EQ(e.code(), mdetect::ErrorCode::ec) << e.what();               \
        }                                                                          \
    } while (0)
