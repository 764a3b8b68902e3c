#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mdetect {

/// Explicit missing-value marker for numeric probe cells.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double value) { return std::isnan(value); }

/// Positive class is Malicious throughout the library.
enum class Label : std::uint8_t { Benign = 0, Malicious = 1 };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

enum class FeatureSet { Global, Apps, Combined };

std::string_view to_string(FeatureSet set);
/// Accepts Global/Apps/Combined in any case ("comb" too). Throws UnknownFeatureSet.
FeatureSet parse_feature_set(std::string_view text);

enum class Category {
    Battery,
    CPU,
    IOInterrupts,
    Memory,
    Metadata,
    Network,
    Storage,
    Wifi,
    AppCPU,
    AppInfo,
    AppMemory,
    AppNetwork,
    AppProcess,
};

inline constexpr std::size_t kCategoryCount = 13;

/// All categories in report row order.
std::span<const Category> all_categories();
/// Token used in the catalog CSV, e.g. "App_Memory".
std::string_view category_token(Category category);
/// Human label used in report tables, e.g. "App Memory".
std::string_view category_label(Category category);
Category parse_category(std::string_view token);

struct FeatureEntry {
    std::string name;
    FeatureSet set = FeatureSet::Global;  // Global or Apps, never Combined
    Category category = Category::Metadata;

    bool operator==(const FeatureEntry&) const = default;
};

/// Ordered feature registry. The order of entries is the canonical column
/// order for every vector built against this catalog.
class FeatureCatalog {
public:
    static constexpr std::string_view kVersion = "1";

    FeatureCatalog() = default;
    explicit FeatureCatalog(std::vector<FeatureEntry> entries);

    /// The 41 System-probe and 35 Apps-probe model inputs.
    static const FeatureCatalog& builtin();

    static FeatureCatalog from_csv(std::string_view text);
    std::string to_csv() const;
    /// Hash of the CSV form; models record it to detect catalog drift.
    std::string fingerprint() const;

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const FeatureEntry& operator[](std::size_t i) const { return entries_[i]; }
    const std::vector<FeatureEntry>& entries() const { return entries_; }

    std::optional<std::size_t> index_of(std::string_view name) const;
    bool contains(std::string_view name) const { return index_of(name).has_value(); }
    /// Throws UnknownFeature.
    const FeatureEntry& at(std::string_view name) const;

    std::vector<std::string> names() const;
    std::vector<std::string> names(FeatureSet set) const;

    /// Entries of one set (Combined keeps everything), order preserved.
    FeatureCatalog project(FeatureSet set) const;
    /// Entries named in `names`, in this catalog's order. Throws UnknownFeature.
    FeatureCatalog subset(std::span<const std::string> names) const;

    bool operator==(const FeatureCatalog& other) const { return entries_ == other.entries_; }

private:
    std::vector<FeatureEntry> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// Distinct categories covering `names`. Throws UnknownFeature.
std::set<Category> categories_of(const FeatureCatalog& catalog, std::span<const std::string> names);

/// Dense row-major matrix of feature values.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const;

    FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
    FeatureMatrix select_columns(std::span<const std::size_t> cols) const;

    const std::vector<double>& data() const { return data_; }

    bool operator==(const FeatureMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class Provenance { RealImport, Synthetic };
std::string_view to_string(Provenance provenance);

struct InstanceMeta {
    std::string user_id;
    std::int64_t timestamp_ms = 0;
    int malware_version = 0;

    bool operator==(const InstanceMeta&) const = default;
};

struct LabeledInstance {
    std::vector<double> features;
    Label label = Label::Benign;
    std::string user_id;
    std::int64_t timestamp_ms = 0;
    int malware_version = 0;
};

/// Immutable labeled table: one feature row, label and metadata per
/// instance, all aligned to a single catalog projection.
class Dataset {
public:
    Dataset() : catalog_(std::make_shared<FeatureCatalog>()) {}
    Dataset(FeatureCatalog catalog, std::vector<LabeledInstance> instances, Provenance provenance);
    Dataset(FeatureCatalog catalog, FeatureMatrix features, std::vector<Label> labels,
            std::vector<InstanceMeta> meta, Provenance provenance);

    const FeatureCatalog& catalog() const { return *catalog_; }
    const FeatureMatrix& features() const { return features_; }
    const std::vector<Label>& labels() const { return labels_; }
    const std::vector<InstanceMeta>& meta() const { return meta_; }
    Provenance provenance() const { return provenance_; }

    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }
    std::size_t n_features() const { return catalog_->size(); }
    std::size_t count(Label label) const;
    std::vector<std::string> feature_names() const { return catalog_->names(); }

    LabeledInstance instance(std::size_t i) const;

    Dataset select_rows(std::span<const std::size_t> rows) const;
    /// Columns named in `names`, reordered to catalog order.
    Dataset select_columns(std::span<const std::string> names) const;
    /// Same rows and metadata with a replacement feature matrix of equal shape.
    Dataset with_features(FeatureMatrix features) const;

    bool operator==(const Dataset& other) const;

private:
    std::shared_ptr<const FeatureCatalog> catalog_;
    FeatureMatrix features_;
    std::vector<Label> labels_;
    std::vector<InstanceMeta> meta_;
    Provenance provenance_ = Provenance::Synthetic;
};

/// Throws MissingColumns when the dataset lacks any name of the requested set.
Dataset project_feature_set(const Dataset& dataset, FeatureSet set);

/// Concatenates datasets that share one catalog.
Dataset concat(std::span<const Dataset> parts);

}  // namespace mdetect
