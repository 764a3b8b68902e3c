#include "mdetect/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mdetect/error.hpp"
#include "mdetect/util.hpp"

namespace mdetect {

std::size_t malicious_quota(std::size_t benign, double f) {
    // floor(benign * (1 - f) / f) computed so that exact ratios such as
    // 900 * 0.1 / 0.9 do not round down to 99.
    const double raw = static_cast<double>(benign) * (1.0 - f) / f;
    const double nearest = std::round(raw);
    if (std::abs(raw - nearest) < 1e-9 * std::max(1.0, raw)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::floor(raw));
}

RebalanceResult undersample(const Dataset& dataset, const RebalanceSpec& spec) {
    const double f = spec.target_benign_fraction;
    if (!(f > 0.0 && f < 1.0)) fail(ErrorCode::InvalidSpec, "target_benign_fraction must lie in (0, 1)");
    if (dataset.count(Label::Benign) == 0) fail(ErrorCode::NoBenignRows, "cannot rebalance without benign rows");

    // Groups: the whole table, or one group per malware version.
    std::map<int, std::vector<std::size_t>> benign_by_group, malicious_by_group;
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        const int group = spec.per_version ? dataset.meta()[r].malware_version : 0;
        (dataset.labels()[r] == Label::Benign ? benign_by_group : malicious_by_group)[group].push_back(r);
    }
    std::set<int> groups;
    for (const auto& [g, _] : benign_by_group) groups.insert(g);
    for (const auto& [g, _] : malicious_by_group) groups.insert(g);

    RebalanceResult result;
    std::vector<std::size_t> kept;
    Rng rng(spec.seed);
    for (int g : groups) {
        const auto& benign = benign_by_group[g];
        auto malicious = malicious_by_group[g];
        kept.insert(kept.end(), benign.begin(), benign.end());
        const std::size_t quota = malicious_quota(benign.size(), f);
        if (malicious.size() <= quota) {
            if (malicious.size() < quota) {
                result.warnings.push_back("group " + std::to_string(g) + ": only " + std::to_string(malicious.size()) +
                                          " malicious row(s) available, target " + std::to_string(quota));
            }
            kept.insert(kept.end(), malicious.begin(), malicious.end());
            continue;
        }
        // Partial Fisher-Yates: the first `quota` slots form a uniform sample.
        for (std::size_t i = 0; i < quota; ++i) {
            const std::size_t j = i + rng.uniform_index(malicious.size() - i);
            std::swap(malicious[i], malicious[j]);
        }
        kept.insert(kept.end(), malicious.begin(), malicious.begin() + static_cast<std::ptrdiff_t>(quota));
    }
    std::sort(kept.begin(), kept.end());
    result.dataset = dataset.select_rows(kept);
    result.kept_rows = std::move(kept);
    return result;
}

std::string_view to_string(SplitMode mode) {
    return mode == SplitMode::UnknownDevice ? "UnknownDevice" : "NormalHoldout";
}

SplitMode parse_split_mode(std::string_view text) {
    const std::string lower = to_lower(trim(text));
    if (lower == "normalholdout" || lower == "normal" || lower == "normal_holdout" || lower == "holdout")
        return SplitMode::NormalHoldout;
    if (lower == "unknowndevice" || lower == "unknown" || lower == "unknown_device") return SplitMode::UnknownDevice;
    fail(ErrorCode::ConfigError, "unknown test mode '" + std::string(text) + "'");
}

SplitResult holdout_split(const Dataset& dataset, const SplitSpec& spec) {
    if (dataset.empty()) fail(ErrorCode::EmptyDataset, "cannot split an empty dataset");
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
        fail(ErrorCode::InvalidSpec, "test_fraction must lie in (0, 1)");
    Rng rng(spec.seed);
    SplitResult out;
    const std::size_t n = dataset.size();

    if (spec.mode == SplitMode::NormalHoldout) {
        auto order = iota_indices(n);
        rng.shuffle(order);
        const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.test_fraction));
        out.test_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
        out.train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    } else {
        std::map<std::string, std::size_t> rows_per_user;
        for (const auto& m : dataset.meta()) ++rows_per_user[m.user_id];
        if (rows_per_user.size() < 2)
            fail(ErrorCode::TooFewUsers, "unknown-device split needs at least 2 users, found " +
                                             std::to_string(rows_per_user.size()));
        std::vector<std::string> users;
        for (const auto& [u, _] : rows_per_user) users.push_back(u);
        rng.shuffle(users);
        const double needed = spec.test_fraction * static_cast<double>(n);
        std::set<std::string> test_users;
        std::size_t test_count = 0;
        for (std::size_t i = 0; i + 1 < users.size() && static_cast<double>(test_count) < needed; ++i) {
            test_users.insert(users[i]);
            test_count += rows_per_user[users[i]];
        }
        for (std::size_t r = 0; r < n; ++r)
            (test_users.count(dataset.meta()[r].user_id) ? out.test_rows : out.train_rows).push_back(r);
        out.test_users.assign(test_users.begin(), test_users.end());
    }
    std::sort(out.train_rows.begin(), out.train_rows.end());
    std::sort(out.test_rows.begin(), out.test_rows.end());
    out.train = dataset.select_rows(out.train_rows);
    out.test = dataset.select_rows(out.test_rows);
    return out;
}

std::vector<FoldIndices> kfold(std::size_t n_rows, std::size_t k, std::uint64_t seed) {
    if (k < 2) fail(ErrorCode::InvalidSpec, "k-fold needs k >= 2");
    if (n_rows < k)
        fail(ErrorCode::TooFewRows, std::to_string(n_rows) + " row(s) cannot fill " + std::to_string(k) + " folds");
    auto order = iota_indices(n_rows);
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::size_t> fold_of(n_rows);
    const std::size_t base = n_rows / k;
    const std::size_t extra = n_rows % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        for (std::size_t i = 0; i < size; ++i) fold_of[order[pos++]] = f;
    }
    std::vector<FoldIndices> folds(k);
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t f = 0; f < k; ++f) (fold_of[r] == f ? folds[f].validate : folds[f].train).push_back(r);
    }
    return folds;
}

std::vector<FoldIndices> kfold(const Dataset& train, std::size_t k, std::uint64_t seed) {
    return kfold(train.size(), k, seed);
}

MinMaxScaler MinMaxScaler::fit(const FeatureMatrix& train) {
    if (train.rows() == 0) fail(ErrorCode::EmptyTrainingSet, "cannot fit a scaler on zero rows");
    std::vector<double> lo(train.cols(), kMissing), hi(train.cols(), kMissing);
    for (std::size_t r = 0; r < train.rows(); ++r) {
        for (std::size_t c = 0; c < train.cols(); ++c) {
            const double v = train.at(r, c);
            if (is_missing(v)) continue;
            if (is_missing(lo[c]) || v < lo[c]) lo[c] = v;
            if (is_missing(hi[c]) || v > hi[c]) hi[c] = v;
        }
    }
    for (std::size_t c = 0; c < train.cols(); ++c) {
        if (is_missing(lo[c])) lo[c] = hi[c] = 0.0;
    }
    return MinMaxScaler(std::move(lo), std::move(hi));
}

double MinMaxScaler::transform(std::size_t column, double value) const {
    if (is_missing(value)) return value;
    const double range = max_[column] - min_[column];
    if (!(range > 0.0)) return 0.0;
    return std::clamp((value - min_[column]) / range, 0.0, 1.0);
}

FeatureMatrix MinMaxScaler::transform(const FeatureMatrix& data) const {
    if (data.cols() != size()) fail(ErrorCode::LengthMismatch, "scaler width differs from data width");
    FeatureMatrix out(data.rows(), data.cols());
    for (std::size_t r = 0; r < data.rows(); ++r)
        for (std::size_t c = 0; c < data.cols(); ++c) out.at(r, c) = transform(c, data.at(r, c));
    return out;
}

std::vector<double> MinMaxScaler::transform_row(std::span<const double> row) const {
    if (row.size() != size()) fail(ErrorCode::LengthMismatch, "scaler width differs from row width");
    std::vector<double> out(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out[c] = transform(c, row[c]);
    return out;
}

nlohmann::json MinMaxScaler::to_json() const { return {{"min", min_}, {"max", max_}}; }

MinMaxScaler MinMaxScaler::from_json(const nlohmann::json& j) {
    return MinMaxScaler(j.at("min").get<std::vector<double>>(), j.at("max").get<std::vector<double>>());
}

MinMaxScaler fit_scaler(const Dataset& train) { return MinMaxScaler::fit(train.features()); }

Dataset apply_scaler(const MinMaxScaler& scaler, const Dataset& data) {
    return data.with_features(scaler.transform(data.features()));
}

MedianImputer MedianImputer::fit(const FeatureMatrix& train, std::span<const std::string> names,
                                 std::vector<std::string>* warnings) {
    if (train.rows() == 0) fail(ErrorCode::EmptyTrainingSet, "cannot fit an imputer on zero rows");
    std::vector<double> fill(train.cols(), 0.0);
    std::vector<double> values;
    for (std::size_t c = 0; c < train.cols(); ++c) {
        values.clear();
        for (std::size_t r = 0; r < train.rows(); ++r)
            if (!is_missing(train.at(r, c))) values.push_back(train.at(r, c));
        if (values.empty()) {
            if (warnings) {
                const std::string name = c < names.size() ? names[c] : "column " + std::to_string(c);
                warnings->push_back(name + " is missing in every training row; imputed with 0");
            }
            continue;
        }
        std::sort(values.begin(), values.end());
        const std::size_t m = values.size();
        fill[c] = (m % 2 == 1) ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
    }
    return MedianImputer(std::move(fill));
}

void MedianImputer::transform_row(std::span<double> row) const {
    if (row.size() != fill_.size()) fail(ErrorCode::LengthMismatch, "imputer width differs from row width");
    for (std::size_t c = 0; c < row.size(); ++c)
        if (is_missing(row[c])) row[c] = fill_[c];
}

FeatureMatrix MedianImputer::transform(const FeatureMatrix& data) const {
    FeatureMatrix out = data;
    for (std::size_t r = 0; r < out.rows(); ++r) transform_row(out.row(r));
    return out;
}

nlohmann::json MedianImputer::to_json() const { return {{"fill", fill_}}; }

MedianImputer MedianImputer::from_json(const nlohmann::json& j) {
    return MedianImputer(j.at("fill").get<std::vector<double>>());
}

ImputeResult impute(const Dataset& train, const std::vector<Dataset>& others) {
    ImputeResult out;
    const auto names = train.feature_names();
    out.imputer = MedianImputer::fit(train.features(), names, &out.warnings);
    out.train = train.with_features(out.imputer.transform(train.features()));
    out.others.reserve(others.size());
    for (const auto& d : others) out.others.push_back(d.with_features(out.imputer.transform(d.features())));
    return out;
}

}  // namespace mdetect
