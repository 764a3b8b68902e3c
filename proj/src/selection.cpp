#include "mdetect/selection.hpp"

#include <algorithm>
#include <cmath>

#include "mdetect/error.hpp"
#include "mdetect/util.hpp"

namespace mdetect {

namespace {

template <typename T>
void check_range(const std::vector<T>& values, T lo, T hi, const char* what) {
    for (T v : values)
        if (v < lo || v > hi)
            fail(ErrorCode::InvalidSpec, std::string(what) + " candidate " + std::to_string(v) + " lies outside [" +
                                             std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

std::vector<Label> labels_at(std::span<const Label> y, std::span<const std::size_t> rows) {
    std::vector<Label> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(y[r]);
    return out;
}

bool f1_greater(const Fraction& a, const Fraction& b) { return a.num * b.den > b.num * a.den; }

std::vector<std::size_t> sorted_prefix(std::span<const std::size_t> ranking, std::size_t size) {
    std::vector<std::size_t> out(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(size));
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t smallest_within(const std::vector<double>& curve, double epsilon) {
    const double best = *std::max_element(curve.begin(), curve.end());
    for (std::size_t s = 0; s < curve.size(); ++s)
        if (curve[s] >= best - epsilon) return s + 1;
    return curve.size();
}

}  // namespace

HyperGrid HyperGrid::full() {
    HyperGrid g;
    g.ab_estimators = {5, 10, 20, 40, 80, 160, 320, 400};
    g.rf_trees = {5, 10, 20, 40, 80, 160, 320};
    g.rf_max_depth = {3, 10, 32, 100, 320};
    g.rf_max_features = {3, 6, 12, 25, 50, 102};
    g.knn_k = {1, 3, 5, 9, 15, 31, 61};
    return g;
}

HyperGrid HyperGrid::desk() {
    HyperGrid g;
    g.ab_estimators = {50, 200};
    g.rf_trees = {10, 40};
    g.rf_max_depth = {8, 32};
    g.rf_max_features = {5, 15};
    g.knn_k = {1, 5, 15};
    return g;
}

void HyperGrid::validate() const {
    check_range<std::size_t>(ab_estimators, 5, 400, "n_estimators");
    check_range<std::size_t>(rf_trees, 5, 320, "n_trees");
    check_range<int>(rf_max_depth, 3, 320, "max_depth");
    check_range<std::size_t>(rf_max_features, 3, 102, "max_features");
    check_range<std::size_t>(knn_k, 1, 61, "k");
}

std::vector<Hyperparameters> HyperGrid::candidates(ClassifierKind kind) const {
    std::vector<Hyperparameters> out;
    Hyperparameters base = default_hyperparameters(kind);
    switch (kind) {
        case ClassifierKind::RandomForest:
            for (auto t : rf_trees)
                for (auto d : rf_max_depth)
                    for (auto f : rf_max_features) {
                        base.n_trees = t;
                        base.max_depth = d;
                        base.max_features = f;
                        out.push_back(base);
                    }
            break;
        case ClassifierKind::AdaBoost:
            for (auto e : ab_estimators) {
                base.n_estimators = e;
                out.push_back(base);
            }
            break;
        case ClassifierKind::Knn:
            for (auto k : knn_k) {
                base.k = k;
                out.push_back(base);
            }
            break;
    }
    if (out.empty()) fail(ErrorCode::EmptyGrid, "no " + std::string(to_string(kind)) + " candidates in the grid");
    return out;
}

nlohmann::json HyperGrid::to_json() const {
    return {{"adaboost_n_estimators", ab_estimators},
            {"rf_n_trees", rf_trees},
            {"rf_max_depth", rf_max_depth},
            {"rf_max_features", rf_max_features},
            {"knn_k", knn_k}};
}

std::vector<FoldData> materialize_folds(const FeatureMatrix& x, std::span<const Label> y,
                                        std::span<const FoldIndices> folds, bool scale) {
    std::vector<FoldData> out;
    out.reserve(folds.size());
    for (const auto& f : folds) {
        FoldData d;
        d.train_x = x.select_rows(f.train);
        d.validate_x = x.select_rows(f.validate);
        d.train_y = labels_at(y, f.train);
        d.validate_y = labels_at(y, f.validate);
        if (scale) {
            const auto scaler = MinMaxScaler::fit(d.train_x);
            d.train_x = scaler.transform(d.train_x);
            d.validate_x = scaler.transform(d.validate_x);
        }
        out.push_back(std::move(d));
    }
    return out;
}

double f1_score(std::span<const Label> predicted, std::span<const Label> truth) {
    const auto c = confusion(predicted, truth);
    const Fraction f1{2 * c.tp, 2 * c.tp + c.fp + c.fn};
    return f1.value();
}

double cv_f1(const Hyperparameters& hp, std::span<const FoldData> folds, std::uint64_t seed) {
    if (folds.empty()) fail(ErrorCode::InvalidSpec, "cross-validation needs folds");
    double sum = 0.0;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        const auto& f = folds[i];
        const auto model = fit_classifier(hp, f.train_x, f.train_y, mix_seed(seed, i));
        sum += f1_score(predict_all(model, f.validate_x), f.validate_y);
    }
    return sum / static_cast<double>(folds.size());
}

namespace {

// All k candidates share one neighbor search per fold.
std::vector<double> knn_cv_curve(std::span<const std::size_t> ks, std::span<const FoldData> folds) {
    std::vector<double> sums(ks.size(), 0.0);
    const std::size_t k_max = *std::max_element(ks.begin(), ks.end());
    std::vector<Label> predicted;
    for (const auto& f : folds) {
        if (k_max > f.train_x.rows())
            fail(ErrorCode::KTooLarge, "k = " + std::to_string(k_max) + " exceeds the fold's " +
                                           std::to_string(f.train_x.rows()) + " training rows");
        const Knn probe(f.train_x, f.train_y, {k_max});
        std::vector<std::vector<std::uint32_t>> nbs(f.validate_x.rows());
        for (std::size_t q = 0; q < nbs.size(); ++q) nbs[q] = probe.neighbors(f.validate_x.row(q), k_max);
        for (std::size_t i = 0; i < ks.size(); ++i) {
            predicted.clear();
            for (const auto& nb : nbs) predicted.push_back(knn_vote(nb, f.train_y, ks[i]));
            sums[i] += f1_score(predicted, f.validate_y);
        }
    }
    for (auto& s : sums) s /= static_cast<double>(folds.size());
    return sums;
}

}  // namespace

GridSearchResult grid_search_cv(const HyperGrid& grid, ClassifierKind kind, std::span<const FoldData> folds,
                                std::uint64_t seed) {
    grid.validate();
    const auto candidates = grid.candidates(kind);
    GridSearchResult out;
    if (kind == ClassifierKind::Knn) {
        std::vector<std::size_t> ks;
        for (const auto& c : candidates) ks.push_back(c.k);
        const auto curve = knn_cv_curve(ks, folds);
        for (std::size_t i = 0; i < candidates.size(); ++i) out.trace.push_back({candidates[i], curve[i]});
    } else {
        for (const auto& c : candidates) out.trace.push_back({c, cv_f1(c, folds, seed)});
    }
    const GridPoint* best = nullptr;
    for (const auto& p : out.trace) {
        if (!best || p.cv_f1 > best->cv_f1 || (p.cv_f1 == best->cv_f1 && p.hp.capacity() < best->hp.capacity()))
            best = &p;
    }
    out.best = best->hp;
    out.best_cv_f1 = best->cv_f1;
    return out;
}

GridSearchResult grid_search_cv(const FeatureMatrix& x, std::span<const Label> y, const HyperGrid& grid,
                                ClassifierKind kind, std::size_t k, std::uint64_t seed) {
    const auto folds = kfold(x.rows(), k, seed);
    const auto data = materialize_folds(x, y, folds, kind == ClassifierKind::Knn);
    return grid_search_cv(grid, kind, data, seed);
}

std::vector<std::vector<Label>> knn_prefix_predictions(const FeatureMatrix& train_x, std::span<const Label> train_y,
                                                       const FeatureMatrix& query_x,
                                                       std::span<const std::size_t> ranking, std::size_t k) {
    const std::size_t nt = train_x.rows(), nq = query_x.rows();
    if (k == 0 || k > nt)
        fail(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " needs between 1 and " + std::to_string(nt) + " rows");
    if (train_y.size() != nt) fail(ErrorCode::LengthMismatch, "features and labels disagree on row count");
    std::vector<std::vector<Label>> out(ranking.size());
    std::vector<double> dist(nq * nt, 0.0);
    std::vector<double> column(nt);
    for (std::size_t s = 0; s < ranking.size(); ++s) {
        const std::size_t c = ranking[s];
        for (std::size_t t = 0; t < nt; ++t) column[t] = train_x.at(t, c);
        for (std::size_t q = 0; q < nq; ++q) {
            const double v = query_x.at(q, c);
            double* row = dist.data() + q * nt;
            for (std::size_t t = 0; t < nt; ++t) {
                const double d = column[t] - v;
                row[t] += d * d;
            }
        }
        auto& preds = out[s];
        preds.reserve(nq);
        for (std::size_t q = 0; q < nq; ++q) {
            const auto nb = nearest_k(std::span<const double>(dist.data() + q * nt, nt), k);
            preds.push_back(knn_vote(nb, train_y, k));
        }
    }
    return out;
}

std::vector<std::size_t> RfecvResult::subset(std::size_t size) const {
    return sorted_prefix(ranking, std::min(size, ranking.size()));
}

nlohmann::json RfecvResult::to_json(std::span<const std::string> names) const {
    nlohmann::json curve = nlohmann::json::array();
    for (std::size_t s = 0; s < f1_by_size.size(); ++s) curve.push_back({{"size", s + 1}, {"cv_f1", f1_by_size[s]}});
    std::vector<std::string> ranked;
    for (auto i : ranking) ranked.push_back(i < names.size() ? names[i] : std::to_string(i));
    return {{"ranking", ranked}, {"curve", curve}, {"selected_size", selected_size}, {"epsilon_f1", epsilon_f1}};
}

namespace {

std::vector<double> knn_rfecv_curve(std::span<const std::size_t> ranking, std::size_t k,
                                    std::span<const FoldData> folds) {
    std::vector<double> sums(ranking.size(), 0.0);
    for (const auto& f : folds) {
        const auto preds = knn_prefix_predictions(f.train_x, f.train_y, f.validate_x, ranking, k);
        for (std::size_t s = 0; s < ranking.size(); ++s) sums[s] += f1_score(preds[s], f.validate_y);
    }
    for (auto& s : sums) s /= static_cast<double>(folds.size());
    return sums;
}

}  // namespace

RfecvResult rfecv(std::span<const std::size_t> ranking, const Hyperparameters& hp, std::span<const FoldData> folds,
                  std::uint64_t seed, double epsilon_f1) {
    if (ranking.empty()) fail(ErrorCode::InvalidSpec, "feature elimination needs a non-empty ranking");
    if (folds.empty()) fail(ErrorCode::InvalidSpec, "feature elimination needs folds");
    RfecvResult out;
    out.ranking.assign(ranking.begin(), ranking.end());
    out.epsilon_f1 = epsilon_f1;
    if (hp.kind == ClassifierKind::Knn) {
        out.f1_by_size = knn_rfecv_curve(ranking, hp.k, folds);
    } else {
        out.f1_by_size.resize(ranking.size());
        std::vector<FoldData> sub(folds.size());
        for (std::size_t s = ranking.size(); s >= 1; --s) {
            const auto cols = sorted_prefix(ranking, s);
            for (std::size_t i = 0; i < folds.size(); ++i) {
                sub[i].train_x = folds[i].train_x.select_columns(cols);
                sub[i].validate_x = folds[i].validate_x.select_columns(cols);
                sub[i].train_y = folds[i].train_y;
                sub[i].validate_y = folds[i].validate_y;
            }
            out.f1_by_size[s - 1] = cv_f1(hp, sub, seed);
        }
    }
    out.selected_size = smallest_within(out.f1_by_size, epsilon_f1);
    return out;
}

McNemarResult mcnemar_from_counts(std::uint64_t b, std::uint64_t c) {
    McNemarResult r;
    r.b = b;
    r.c = c;
    const std::uint64_t n = b + c;
    if (n == 0) return r;
    const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
    r.statistic = diff * diff / static_cast<double>(n);
    r.significant = r.statistic > 3.841;
    if (n < 25) {
        // Two-sided exact binomial test with p = 1/2.
        const std::uint64_t m = std::min(b, c);
        double tail = 0.0, coef = 1.0;
        for (std::uint64_t i = 0; i <= m; ++i) {
            tail += coef;
            coef = coef * static_cast<double>(n - i) / static_cast<double>(i + 1);
        }
        r.exact_p = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
        r.significant = *r.exact_p < 0.05;
    }
    return r;
}

McNemarResult mcnemar(std::span<const Label> a, std::span<const Label> b, std::span<const Label> truth) {
    if (a.size() != truth.size() || b.size() != truth.size())
        fail(ErrorCode::LengthMismatch, "McNemar inputs must have equal lengths");
    std::uint64_t only_a = 0, only_b = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool ra = a[i] == truth[i], rb = b[i] == truth[i];
        if (ra && !rb) ++only_a;
        if (!ra && rb) ++only_b;
    }
    return mcnemar_from_counts(only_a, only_b);
}

SelectionOutcome select_least_features(std::span<const CandidateResult> candidates, std::span<const Label> truth) {
    if (candidates.empty()) fail(ErrorCode::EmptyCandidates, "no candidates to select from");
    for (const auto& c : candidates)
        if (c.predictions.size() != truth.size())
            fail(ErrorCode::LengthMismatch, "candidate predictions do not cover the test rows");

    SelectionOutcome out;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const auto& a = candidates[i];
        const auto& b = candidates[out.best];
        if (f1_greater(a.test.f1, b.test.f1) ||
            (a.test.f1.same_value(b.test.f1) &&
             (a.features.size() < b.features.size() ||
              (a.features.size() == b.features.size() && a.hp.capacity() < b.hp.capacity()))))
            out.best = i;
    }
    const auto& best = candidates[out.best];
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out.vs_best.push_back(mcnemar(candidates[i].predictions, best.predictions, truth));
        if (i == out.best || !out.vs_best.back().significant) out.equivalent.push_back(i);
    }
    out.chosen = out.equivalent.front();
    for (auto i : out.equivalent) {
        const auto& a = candidates[i];
        const auto& b = candidates[out.chosen];
        if (a.features.size() < b.features.size() ||
            (a.features.size() == b.features.size() &&
             (f1_greater(a.test.f1, b.test.f1) ||
              (a.test.f1.same_value(b.test.f1) && a.hp.capacity() < b.hp.capacity()))))
            out.chosen = i;
    }
    return out;
}

}  // namespace mdetect
