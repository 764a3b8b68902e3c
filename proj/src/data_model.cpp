#include "mdetect/data_model.hpp"

#include <array>
#include <sstream>

#include "mdetect/csv.hpp"
#include "mdetect/error.hpp"
#include "mdetect/util.hpp"

namespace mdetect {

std::string_view to_string(Label label) { return label == Label::Malicious ? "malicious" : "benign"; }

Label parse_label(std::string_view text) {
    const std::string lower = to_lower(trim(text));
    if (lower == "malicious" || lower == "1" || lower == "m") return Label::Malicious;
    if (lower == "benign" || lower == "0" || lower == "b") return Label::Benign;
    fail(ErrorCode::InvalidRecord, "unknown label '" + std::string(text) + "'");
}

std::string_view to_string(FeatureSet set) {
    switch (set) {
        case FeatureSet::Global: return "Global";
        case FeatureSet::Apps: return "Apps";
        case FeatureSet::Combined: return "Combined";
    }
    return "?";
}

FeatureSet parse_feature_set(std::string_view text) {
    const std::string lower = to_lower(trim(text));
    if (lower == "global") return FeatureSet::Global;
    if (lower == "apps") return FeatureSet::Apps;
    if (lower == "combined" || lower == "comb") return FeatureSet::Combined;
    fail(ErrorCode::UnknownFeatureSet, "'" + std::string(text) + "' is not Global, Apps or Combined");
}

namespace {

constexpr std::array<Category, kCategoryCount> kCategories = {
    Category::Battery,  Category::CPU,     Category::IOInterrupts, Category::Memory,    Category::Metadata,
    Category::Network,  Category::Storage, Category::Wifi,         Category::AppCPU,    Category::AppInfo,
    Category::AppMemory, Category::AppNetwork, Category::AppProcess,
};

struct CategoryNames {
    Category category;
    std::string_view token;
    std::string_view label;
};

constexpr std::array<CategoryNames, kCategoryCount> kCategoryNames = {{
    {Category::Battery, "Battery", "Battery"},
    {Category::CPU, "CPU", "CPU"},
    {Category::IOInterrupts, "IO_Interrupts", "IO Interrupts"},
    {Category::Memory, "Memory", "Memory"},
    {Category::Metadata, "Metadata", "Metadata"},
    {Category::Network, "Network", "Network"},
    {Category::Storage, "Storage", "Storage"},
    {Category::Wifi, "Wifi", "Wifi"},
    {Category::AppCPU, "App_CPU", "App CPU"},
    {Category::AppInfo, "App_Info", "App Info"},
    {Category::AppMemory, "App_Memory", "App Memory"},
    {Category::AppNetwork, "App_Network", "App Network traffic"},
    {Category::AppProcess, "App_Process", "App Process"},
}};

// System probe: Table-12 order, then three /proc/stat CPU aggregates that
// bring the set to the 41 model inputs the probe is described with.
constexpr std::array<std::pair<std::string_view, Category>, 41> kGlobalFeatures = {{
    {"traffic_mobilerxbytes", Category::Network},
    {"traffic_mobilerxpackets", Category::Network},
    {"traffic_mobiletxbytes", Category::Network},
    {"traffic_mobiletxpackets", Category::Network},
    {"traffic_totalrxbytes", Category::Network},
    {"traffic_totalrxpackets", Category::Network},
    {"traffic_totaltxbytes", Category::Network},
    {"traffic_totaltxpackets", Category::Network},
    {"traffic_totalwifirxbytes", Category::Network},
    {"traffic_totalwifirxpackets", Category::Network},
    {"traffic_totalwifitxbytes", Category::Network},
    {"traffic_totalwifitxpackets", Category::Network},
    {"traffic_timestamp", Category::Network},
    {"battery_charge_type", Category::Battery},
    {"battery_current_avg", Category::Battery},
    {"battery_health", Category::Battery},
    {"battery_icon_small", Category::Battery},
    {"battery_invalid_charger", Category::Battery},
    {"battery_level", Category::Battery},
    {"battery_online", Category::Battery},
    {"battery_plugged", Category::Battery},
    {"battery_present", Category::Battery},
    {"battery_scale", Category::Battery},
    {"battery_status", Category::Battery},
    {"battery_technology", Category::Battery},
    {"battery_temperature", Category::Battery},
    {"battery_timestamp", Category::Battery},
    {"battery_voltage", Category::Battery},
    {"cpuhertz", Category::CPU},
    {"cpu_0", Category::CPU},
    {"cpu_1", Category::CPU},
    {"cpu_2", Category::CPU},
    {"cpu_3", Category::CPU},
    {"total_cpu", Category::CPU},
    {"totalmemory_freesize", Category::Memory},
    {"totalmemory_max_size", Category::Memory},
    {"totalmemory_total_size", Category::Memory},
    {"totalmemory_used_size", Category::Memory},
    {"tot_user", Category::CPU},
    {"tot_system", Category::CPU},
    {"tot_idle", Category::CPU},
}};

// Apps probe: numeric per-process columns in Table-12 order. vsize closes
// the list; identifiers and text columns are metadata.
constexpr std::array<std::pair<std::string_view, Category>, 35> kAppsFeatures = {{
    {"cpu_usage", Category::AppCPU},
    {"uidrxbytes", Category::AppNetwork},
    {"uidrxpackets", Category::AppNetwork},
    {"uidtxbytes", Category::AppNetwork},
    {"uidtxpackets", Category::AppNetwork},
    {"cguest_time", Category::AppCPU},
    {"cmaj_flt", Category::AppMemory},
    {"cstime", Category::AppCPU},
    {"cutime", Category::AppCPU},
    {"dalvikprivatedirty", Category::AppMemory},
    {"dalvikpss", Category::AppMemory},
    {"dalvikshareddirty", Category::AppMemory},
    {"guest_time", Category::AppCPU},
    {"importance", Category::AppProcess},
    {"importancereasoncode", Category::AppProcess},
    {"importancereasonpid", Category::AppProcess},
    {"lru", Category::AppMemory},
    {"nativeprivatedirty", Category::AppMemory},
    {"nativepss", Category::AppMemory},
    {"nativeshareddirty", Category::AppMemory},
    {"num_threads", Category::AppCPU},
    {"otherprivatedirty", Category::AppMemory},
    {"otherpss", Category::AppMemory},
    {"othershareddirty", Category::AppMemory},
    {"pgid", Category::AppProcess},
    {"pid", Category::AppProcess},
    {"ppid", Category::AppProcess},
    {"priority", Category::AppCPU},
    {"rss", Category::AppMemory},
    {"rsslim", Category::AppMemory},
    {"sid", Category::AppProcess},
    {"start_time", Category::AppProcess},
    {"stime", Category::AppCPU},
    {"utime", Category::AppCPU},
    {"vsize", Category::AppMemory},
}};

}  // namespace

std::span<const Category> all_categories() { return kCategories; }

std::string_view category_token(Category category) {
    for (const auto& n : kCategoryNames)
        if (n.category == category) return n.token;
    return "?";
}

std::string_view category_label(Category category) {
    for (const auto& n : kCategoryNames)
        if (n.category == category) return n.label;
    return "?";
}

Category parse_category(std::string_view token) {
    const std::string lower = to_lower(trim(token));
    for (const auto& n : kCategoryNames) {
        if (to_lower(n.token) == lower || to_lower(n.label) == lower) return n.category;
    }
    fail(ErrorCode::InvalidRecord, "unknown feature category '" + std::string(token) + "'");
}

FeatureCatalog::FeatureCatalog(std::vector<FeatureEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].set == FeatureSet::Combined)
            fail(ErrorCode::InvalidRecord, "feature " + entries_[i].name + " must belong to Global or Apps");
        auto [it, inserted] = index_.emplace(entries_[i].name, i);
        if (!inserted) fail(ErrorCode::InvalidRecord, "duplicate feature name " + entries_[i].name);
    }
}

const FeatureCatalog& FeatureCatalog::builtin() {
    static const FeatureCatalog catalog = [] {
        std::vector<FeatureEntry> entries;
        entries.reserve(kGlobalFeatures.size() + kAppsFeatures.size());
        for (const auto& [name, category] : kGlobalFeatures)
            entries.push_back({std::string(name), FeatureSet::Global, category});
        for (const auto& [name, category] : kAppsFeatures)
            entries.push_back({std::string(name), FeatureSet::Apps, category});
        return FeatureCatalog(std::move(entries));
    }();
    return catalog;
}

FeatureCatalog FeatureCatalog::from_csv(std::string_view text) {
    std::vector<FeatureEntry> entries;
    bool header = true;
    for (const auto& raw : split(text, '\n')) {
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto fields = csv::parse_line(line);
        if (header) {
            if (fields.size() != 3 || fields[0] != "feature_name" || fields[1] != "feature_set" ||
                fields[2] != "category")
                fail(ErrorCode::SchemaMismatch, "catalog header must be feature_name,feature_set,category");
            header = false;
            continue;
        }
        if (fields.size() != 3) fail(ErrorCode::SchemaMismatch, "catalog row needs 3 fields: " + std::string(line));
        const FeatureSet set = parse_feature_set(fields[1]);
        entries.push_back({fields[0], set, parse_category(fields[2])});
    }
    if (header) fail(ErrorCode::SchemaMismatch, "catalog has no header");
    return FeatureCatalog(std::move(entries));
}

std::string FeatureCatalog::to_csv() const {
    std::string out = "feature_name,feature_set,category\n";
    for (const auto& e : entries_) {
        out += csv::escape(e.name);
        out += ',';
        out += to_string(e.set);
        out += ',';
        out += category_token(e.category);
        out += '\n';
    }
    return out;
}

std::string FeatureCatalog::fingerprint() const { return hex64(fnv1a64(to_csv())); }

std::optional<std::size_t> FeatureCatalog::index_of(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const FeatureEntry& FeatureCatalog::at(std::string_view name) const {
    auto idx = index_of(name);
    if (!idx) fail(ErrorCode::UnknownFeature, std::string(name));
    return entries_[*idx];
}

std::vector<std::string> FeatureCatalog::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
}

std::vector<std::string> FeatureCatalog::names(FeatureSet set) const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
        if (set == FeatureSet::Combined || e.set == set) out.push_back(e.name);
    return out;
}

FeatureCatalog FeatureCatalog::project(FeatureSet set) const {
    std::vector<FeatureEntry> out;
    for (const auto& e : entries_)
        if (set == FeatureSet::Combined || e.set == set) out.push_back(e);
    return FeatureCatalog(std::move(out));
}

FeatureCatalog FeatureCatalog::subset(std::span<const std::string> names) const {
    std::vector<bool> keep(entries_.size(), false);
    for (const auto& n : names) {
        auto idx = index_of(n);
        if (!idx) fail(ErrorCode::UnknownFeature, n);
        keep[*idx] = true;
    }
    std::vector<FeatureEntry> out;
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (keep[i]) out.push_back(entries_[i]);
    return FeatureCatalog(std::move(out));
}

std::set<Category> categories_of(const FeatureCatalog& catalog, std::span<const std::string> names) {
    std::set<Category> out;
    for (const auto& n : names) out.insert(catalog.at(n).category);
    return out;
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        fail(ErrorCode::LengthMismatch, "matrix data has " + std::to_string(data_.size()) + " values, expected " +
                                            std::to_string(rows_ * cols_));
}

std::vector<double> FeatureMatrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, c);
    return out;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
    FeatureMatrix out(rows.size(), cols_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::size_t> cols) const {
    FeatureMatrix out(rows_, cols.size());
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t j = 0; j < cols.size(); ++j) out.at(r, j) = at(r, cols[j]);
    return out;
}

std::string_view to_string(Provenance provenance) {
    return provenance == Provenance::RealImport ? "RealImport" : "Synthetic";
}

Dataset::Dataset(FeatureCatalog catalog, std::vector<LabeledInstance> instances, Provenance provenance)
    : catalog_(std::make_shared<FeatureCatalog>(std::move(catalog))), provenance_(provenance) {
    const std::size_t d = catalog_->size();
    features_ = FeatureMatrix(instances.size(), d);
    labels_.reserve(instances.size());
    meta_.reserve(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        auto& inst = instances[i];
        if (inst.features.size() != d)
            fail(ErrorCode::LengthMismatch, "instance " + std::to_string(i) + " has " +
                                                std::to_string(inst.features.size()) + " features, catalog has " +
                                                std::to_string(d));
        std::copy(inst.features.begin(), inst.features.end(), features_.row(i).begin());
        labels_.push_back(inst.label);
        meta_.push_back({std::move(inst.user_id), inst.timestamp_ms, inst.malware_version});
    }
}

Dataset::Dataset(FeatureCatalog catalog, FeatureMatrix features, std::vector<Label> labels,
                 std::vector<InstanceMeta> meta, Provenance provenance)
    : catalog_(std::make_shared<FeatureCatalog>(std::move(catalog))),
      features_(std::move(features)),
      labels_(std::move(labels)),
      meta_(std::move(meta)),
      provenance_(provenance) {
    if (features_.cols() != catalog_->size() && !(features_.rows() == 0 && features_.cols() == 0))
        fail(ErrorCode::LengthMismatch, "feature matrix has " + std::to_string(features_.cols()) +
                                            " columns, catalog has " + std::to_string(catalog_->size()));
    if (features_.rows() != labels_.size() || labels_.size() != meta_.size())
        fail(ErrorCode::LengthMismatch, "features, labels and metadata disagree on row count");
    if (features_.cols() != catalog_->size()) features_ = FeatureMatrix(0, catalog_->size());
}

std::size_t Dataset::count(Label label) const {
    std::size_t n = 0;
    for (Label l : labels_) n += (l == label);
    return n;
}

LabeledInstance Dataset::instance(std::size_t i) const {
    auto r = features_.row(i);
    return {std::vector<double>(r.begin(), r.end()), labels_[i], meta_[i].user_id, meta_[i].timestamp_ms,
            meta_[i].malware_version};
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
    Dataset out;
    out.catalog_ = catalog_;
    out.features_ = features_.select_rows(rows);
    out.labels_.reserve(rows.size());
    out.meta_.reserve(rows.size());
    for (std::size_t r : rows) {
        out.labels_.push_back(labels_[r]);
        out.meta_.push_back(meta_[r]);
    }
    out.provenance_ = provenance_;
    return out;
}

Dataset Dataset::select_columns(std::span<const std::string> names) const {
    FeatureCatalog sub = catalog_->subset(names);
    std::vector<std::size_t> cols;
    cols.reserve(sub.size());
    for (const auto& e : sub.entries()) cols.push_back(*catalog_->index_of(e.name));
    return Dataset(std::move(sub), features_.select_columns(cols), labels_, meta_, provenance_);
}

Dataset Dataset::with_features(FeatureMatrix features) const {
    if (features.rows() != features_.rows() || features.cols() != features_.cols())
        fail(ErrorCode::LengthMismatch, "replacement feature matrix has a different shape");
    Dataset out = *this;
    out.features_ = std::move(features);
    return out;
}

bool Dataset::operator==(const Dataset& other) const {
    if (!(*catalog_ == *other.catalog_) || labels_ != other.labels_ || meta_ != other.meta_ ||
        provenance_ != other.provenance_ || features_.rows() != other.features_.rows())
        return false;
    const auto& a = features_.data();
    const auto& b = other.features_.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (is_missing(a[i]) != is_missing(b[i])) return false;
        if (!is_missing(a[i]) && a[i] != b[i]) return false;
    }
    return true;
}

Dataset project_feature_set(const Dataset& dataset, FeatureSet set) {
    const auto wanted = FeatureCatalog::builtin().names(set);
    std::vector<std::string> missing;
    for (const auto& n : wanted)
        if (!dataset.catalog().contains(n)) missing.push_back(n);
    if (!missing.empty())
        fail(ErrorCode::MissingColumns, "dataset lacks " + std::to_string(missing.size()) + " " +
                                            std::string(to_string(set)) + " column(s): " + join(missing, ", "));
    return dataset.select_columns(wanted);
}

Dataset concat(std::span<const Dataset> parts) {
    if (parts.empty()) return Dataset();
    const FeatureCatalog& catalog = parts.front().catalog();
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (!(p.catalog() == catalog)) fail(ErrorCode::SchemaMismatch, "cannot concatenate different catalogs");
        rows += p.size();
    }
    std::vector<double> data;
    data.reserve(rows * catalog.size());
    std::vector<Label> labels;
    std::vector<InstanceMeta> meta;
    for (const auto& p : parts) {
        data.insert(data.end(), p.features().data().begin(), p.features().data().end());
        labels.insert(labels.end(), p.labels().begin(), p.labels().end());
        meta.insert(meta.end(), p.meta().begin(), p.meta().end());
    }
    return Dataset(catalog, FeatureMatrix(rows, catalog.size(), std::move(data)), std::move(labels),
                   std::move(meta), parts.front().provenance());
}

}  // namespace mdetect
