#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "storyline/container.hpp"
#include "storyline/corpus.hpp"
#include "storyline/error.hpp"
#include "storyline/features.hpp"
#include "storyline/util.hpp"

namespace storyline {

// ---------------------------------------------------------------------------
// Distance vectors

inline constexpr std::size_t kDistanceDims = 12;

inline constexpr std::array<std::string_view, kDistanceDims> kDistanceNames = {
    "d_luminance", "d_color_hist", "d_color_moment", "d_correlogram", "d_entropy",     "d_edges",
    "d_phash",     "d_concepts",   "d_cnn_dense",    "d_environment", "d_scene_category", "d_scene_attributes",
};

/// First semantic dimension; dimensions from here on are NaN when either
/// side of the pair has no semantic features.
inline constexpr std::size_t kFirstSemanticDim = 7;

struct DistanceVector {
    std::array<double, kDistanceDims> values{};

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    static bool missing(double v) { return std::isnan(v); }
    bool operator==(const DistanceVector& o) const {
        for (std::size_t i = 0; i < kDistanceDims; ++i) {
            const bool a = missing(values[i]), b = missing(o.values[i]);
            if (a != b || (!a && values[i] != o.values[i])) return false;
        }
        return true;
    }
};

namespace detail {

inline double sum_abs_diff(const std::vector<double>& a, const std::vector<double>& b, std::string_view what) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::LayoutMismatch, std::string(what) + " sizes differ (" + std::to_string(a.size()) +
                                                   " vs " + std::to_string(b.size()) + ")");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

template <typename Vec>
double euclidean(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
    std::size_t n = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) ++ia;
        else if (*ib < *ia) ++ib;
        else {
            ++n;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(n);
}

}  // namespace detail

/// Per-feature distances between two images, in the fixed dimension order of
/// kDistanceNames. Every entry is symmetric in (a, b).
inline DistanceVector transition_distances(const FeatureBundle& a, const FeatureBundle& b) {
    const auto& va = a.visual;
    const auto& vb = b.visual;
    DistanceVector d;
    d[0] = std::abs(va.luminance - vb.luminance);
    d[1] = detail::sum_abs_diff(va.color_hist, vb.color_hist, "color histogram");
    d[2] = detail::euclidean(va.color_moment, vb.color_moment);
    d[3] = detail::sum_abs_diff(va.correlogram, vb.correlogram, "correlogram");
    d[4] = std::abs(va.entropy - vb.entropy);
    d[5] = static_cast<double>(std::llabs(va.edges.horizontal - vb.edges.horizontal) +
                               std::llabs(va.edges.vertical - vb.edges.vertical) +
                               std::llabs(va.edges.diagonal - vb.edges.diagonal));
    d[6] = static_cast<double>(hamming_distance(va.phash, vb.phash));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (!a.semantic || !b.semantic) {
        for (std::size_t i = kFirstSemanticDim; i < kDistanceDims; ++i) d[i] = nan;
        return d;
    }
    const auto& sa = *a.semantic;
    const auto& sb = *b.semantic;
    d[7] = detail::overlap(sa.concepts, sb.concepts);
    if (sa.dense_embedding.empty() || sb.dense_embedding.empty()) {
        d[8] = nan;
    } else if (sa.dense_embedding.size() != sb.dense_embedding.size()) {
        throw Error(ErrorCode::DimensionMismatch, "embedding dimensions differ between '" + a.image_id + "' (" +
                                                      std::to_string(sa.dense_embedding.size()) + ") and '" +
                                                      b.image_id + "' (" +
                                                      std::to_string(sb.dense_embedding.size()) + ")");
    } else {
        d[8] = detail::euclidean(sa.dense_embedding, sb.dense_embedding);
    }
    d[9] = (sa.environment != Environment::Unknown && sa.environment == sb.environment) ? 1.0 : 0.0;
    d[10] = detail::overlap(sa.scene_categories, sb.scene_categories);
    d[11] = detail::overlap(sa.scene_attributes, sb.scene_attributes);
    return d;
}

// ---------------------------------------------------------------------------
// Standardizer

/// Per-dimension z-scores with population standard deviation. Missing (NaN)
/// entries are ignored when fitting and map to 0, the standardized mean.
struct Standardizer {
    static constexpr double kEpsilon = 1e-12;

    std::array<double, kDistanceDims> mean{};
    std::array<double, kDistanceDims> stddev{};

    std::array<double, kDistanceDims> transform(const DistanceVector& v) const {
        std::array<double, kDistanceDims> out{};
        for (std::size_t i = 0; i < kDistanceDims; ++i) {
            out[i] = DistanceVector::missing(v[i]) ? 0.0 : (v[i] - mean[i]) / stddev[i];
        }
        return out;
    }
};

inline Standardizer fit_standardizer(const std::vector<DistanceVector>& rows) {
    if (rows.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "standardizer needs at least 2 rows, got " + std::to_string(rows.size()));
    }
    Standardizer s;
    for (std::size_t d = 0; d < kDistanceDims; ++d) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : rows) {
            if (!DistanceVector::missing(r[d])) {
                sum += r[d];
                ++n;
            }
        }
        if (n == 0) {
            s.mean[d] = 0.0;
            s.stddev[d] = 1.0;
            continue;
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& r : rows) {
            if (!DistanceVector::missing(r[d])) ss += (r[d] - mean) * (r[d] - mean);
        }
        s.mean[d] = mean;
        s.stddev[d] = std::max(std::sqrt(ss / static_cast<double>(n)), Standardizer::kEpsilon);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Regression trees

/// Flattened binary tree. feature < 0 marks a leaf; samples with
/// x[feature] <= threshold go left.
struct RegressionTree {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<double> value;

    double predict(const std::array<double, kDistanceDims>& x) const {
        int node = 0;
        while (feature[static_cast<std::size_t>(node)] >= 0) {
            const auto n = static_cast<std::size_t>(node);
            node = x[static_cast<std::size_t>(feature[n])] <= threshold[n] ? left[n] : right[n];
        }
        return value[static_cast<std::size_t>(node)];
    }

    std::size_t size() const { return feature.size(); }
};

namespace detail {

using Row = std::array<double, kDistanceDims>;

struct TreeBuilder {
    const std::vector<Row>& xs;
    const std::vector<double>& target;
    int max_depth;
    int min_samples_leaf;
    RegressionTree tree;

    int add_leaf(double v) {
        tree.feature.push_back(-1);
        tree.threshold.push_back(0.0);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        tree.value.push_back(v);
        return static_cast<int>(tree.feature.size() - 1);
    }

    int build(std::vector<std::size_t> idx, int depth) {
        double sum = 0.0;
        for (auto i : idx) sum += target[i];
        const double n = static_cast<double>(idx.size());
        const int node = add_leaf(sum / n);
        if (depth >= max_depth || idx.size() < static_cast<std::size_t>(2 * min_samples_leaf)) {
            return node;
        }
        const double parent_score = sum * sum / n;
        double best_gain = 1e-14;
        int best_dim = -1;
        double best_thr = 0.0;
        std::vector<std::size_t> order = idx;
        for (std::size_t d = 0; d < kDistanceDims; ++d) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return xs[a][d] < xs[b][d]; });
            double left_sum = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                left_sum += target[order[k]];
                const double lo = xs[order[k]][d];
                const double hi = xs[order[k + 1]][d];
                if (!(lo < hi)) continue;
                const auto nl = static_cast<double>(k + 1);
                const double nr = n - nl;
                if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent_score;
                // Strict improvement only: ties keep the lower dimension and threshold.
                if (gain > best_gain) {
                    best_gain = gain;
                    best_dim = static_cast<int>(d);
                    double mid = lo + (hi - lo) / 2.0;
                    best_thr = mid < hi ? mid : lo;
                }
            }
        }
        if (best_dim < 0) {
            return node;
        }
        std::vector<std::size_t> li, ri;
        for (auto i : idx) {
            (xs[i][static_cast<std::size_t>(best_dim)] <= best_thr ? li : ri).push_back(i);
        }
        const int l = build(std::move(li), depth + 1);
        const int r = build(std::move(ri), depth + 1);
        const auto nn = static_cast<std::size_t>(node);
        tree.feature[nn] = best_dim;
        tree.threshold[nn] = best_thr;
        tree.left[nn] = l;
        tree.right[nn] = r;
        return node;
    }
};

}  // namespace detail

inline RegressionTree fit_regression_tree(const std::vector<detail::Row>& xs, const std::vector<double>& target,
                                          int max_depth, int min_samples_leaf = 1) {
    detail::TreeBuilder b{xs, target, max_depth, min_samples_leaf, {}};
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    b.build(std::move(idx), 0);
    return std::move(b.tree);
}

// ---------------------------------------------------------------------------
// Transition model

struct GbrtConfig {
    int trees = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 1;
    double train_fraction = 0.7;  // 1.0 disables the held-out split
    std::uint64_t seed = 0;
};

struct TransitionModel {
    ExtractionSettings extraction;
    Standardizer standardizer;
    double base_score = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;
    GbrtConfig config;

    std::string layout_hash() const { return extraction.layout_hash(); }

    /// Raw boosted output before clamping.
    double raw_predict_standardized(const std::array<double, kDistanceDims>& z) const {
        double acc = 0.0;
        for (const auto& t : trees) acc += t.predict(z);
        return base_score + learning_rate * acc;
    }

    double predict(const DistanceVector& d) const {
        return std::clamp(raw_predict_standardized(standardizer.transform(d)), 0.0, 1.0);
    }
};

struct HeldOutMetrics {
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double mse = 0.0;
    double r2 = 0.0;
    double spearman = 0.0;
};

struct TransitionTrainReport {
    TransitionModel model;
    std::vector<double> train_mse_per_stage;  // index 0 = base score only
    std::optional<HeldOutMetrics> held_out;
};

inline double mean_squared_error(const std::vector<double>& pred, const std::vector<double>& truth) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return pred.empty() ? 0.0 : s / static_cast<double>(pred.size());
}

inline double r_squared(const std::vector<double>& pred, const std::vector<double>& truth) {
    const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    return ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
}

/// Ranks with ties assigned their average rank (1-based).
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return (saa > 0 && sbb > 0) ? sab / std::sqrt(saa * sbb) : 0.0;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    return pearson(average_ranks(a), average_ranks(b));
}

struct TrainingExample {
    DistanceVector distances;
    double rating = 0.0;
};

/// Least-squares gradient boosting: base score = mean rating, each stage fits
/// a depth-limited tree to the residuals. The standardizer is fit on the
/// training portion only.
inline TransitionTrainReport train_transition_model(const std::vector<TrainingExample>& data,
                                                    const GbrtConfig& cfg = {},
                                                    const ExtractionSettings& extraction = {}) {
    if (data.size() < 10) {
        throw Error(ErrorCode::InvalidArgument,
                    "transition model needs at least 10 training pairs, got " + std::to_string(data.size()));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!(data[i].rating >= 0.0 && data[i].rating <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "rating out of [0,1] at row " + std::to_string(i));
        }
    }
    if (cfg.trees < 0 || cfg.max_depth < 0 || !(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0) ||
        !(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "invalid boosting configuration");
    }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t n_train = data.size();
    if (cfg.train_fraction < 1.0) {
        std::mt19937_64 rng(cfg.seed);
        portable_shuffle(order, rng);
        n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(data.size())));
        n_train = std::clamp<std::size_t>(n_train, 2, data.size() - 1);
    }

    std::vector<DistanceVector> train_rows;
    std::vector<double> y;
    for (std::size_t k = 0; k < n_train; ++k) {
        train_rows.push_back(data[order[k]].distances);
        y.push_back(data[order[k]].rating);
    }

    TransitionTrainReport report;
    auto& model = report.model;
    model.extraction = extraction;
    model.config = cfg;
    model.learning_rate = cfg.learning_rate;
    model.standardizer = fit_standardizer(train_rows);
    model.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

    std::vector<detail::Row> xs;
    xs.reserve(train_rows.size());
    for (const auto& r : train_rows) xs.push_back(model.standardizer.transform(r));

    std::vector<double> f(y.size(), model.base_score);
    std::vector<double> residual(y.size());
    report.train_mse_per_stage.push_back(mean_squared_error(f, y));
    for (int t = 0; t < cfg.trees; ++t) {
        for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - f[i];
        auto tree = fit_regression_tree(xs, residual, cfg.max_depth, cfg.min_samples_leaf);
        for (std::size_t i = 0; i < y.size(); ++i) f[i] += cfg.learning_rate * tree.predict(xs[i]);
        model.trees.push_back(std::move(tree));
        report.train_mse_per_stage.push_back(mean_squared_error(f, y));
    }

    if (n_train < data.size()) {
        HeldOutMetrics m;
        m.n_train = n_train;
        m.n_test = data.size() - n_train;
        std::vector<double> pred, truth;
        for (std::size_t k = n_train; k < data.size(); ++k) {
            pred.push_back(model.predict(data[order[k]].distances));
            truth.push_back(data[order[k]].rating);
        }
        m.mse = mean_squared_error(pred, truth);
        m.r2 = r_squared(pred, truth);
        m.spearman = spearman(pred, truth);
        report.held_out = m;
    }
    return report;
}

namespace detail {

inline void check_bundle_layout(const TransitionModel& model, const FeatureBundle& b) {
    const auto hb = static_cast<std::size_t>(model.extraction.hist_bins_per_channel);
    const auto corr = static_cast<std::size_t>(model.extraction.correlogram_colors()) *
                      model.extraction.correlogram_distances.size();
    if (b.visual.color_hist.size() != hb * hb * hb || b.visual.correlogram.size() != corr) {
        throw Error(ErrorCode::LayoutMismatch, "features of image '" + b.image_id +
                                                   "' do not match the model's feature layout " +
                                                   model.layout_hash());
    }
}

}  // namespace detail

/// Learned transition quality in [0,1].
inline double trans_quality(const TransitionModel& model, const FeatureBundle& a, const FeatureBundle& b) {
    detail::check_bundle_layout(model, a);
    detail::check_bundle_layout(model, b);
    return model.predict(transition_distances(a, b));
}

/// Transition cost: 1 - trans_quality.
inline double trans_q(const TransitionModel& model, const FeatureBundle& a, const FeatureBundle& b) {
    return 1.0 - trans_quality(model, a, b);
}

/// Joins rated pairs with their feature bundles.
inline std::vector<TrainingExample> training_examples(const std::vector<RatedPair>& pairs, const FeatureStore& store) {
    std::vector<TrainingExample> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        out.push_back({transition_distances(store.at(p.image_a), store.at(p.image_b)), p.rating});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json model_to_json(const TransitionModel& m) {
    auto j = make_container("transition", m.layout_hash());
    j["extraction"] = m.extraction;
    j["distance_dims"] = kDistanceNames;
    j["standardizer"] = {{"mean", m.standardizer.mean},
                         {"stddev", m.standardizer.stddev},
                         {"epsilon", Standardizer::kEpsilon},
                         {"deviation", "population"},
                         {"fit_on", "train"},
                         {"missing", "standardized-mean"}};
    j["base_score"] = m.base_score;
    j["learning_rate"] = m.learning_rate;
    j["config"] = {{"trees", m.config.trees},
                   {"max_depth", m.config.max_depth},
                   {"learning_rate", m.config.learning_rate},
                   {"min_samples_leaf", m.config.min_samples_leaf},
                   {"train_fraction", m.config.train_fraction},
                   {"seed", m.config.seed},
                   {"loss", "least_squares"}};
    auto trees = nlohmann::json::array();
    for (const auto& t : m.trees) {
        trees.push_back({{"feature", t.feature},
                         {"threshold", t.threshold},
                         {"left", t.left},
                         {"right", t.right},
                         {"value", t.value}});
    }
    j["trees"] = std::move(trees);
    return j;
}

inline TransitionModel model_from_json(const nlohmann::json& j, const std::string& origin) {
    TransitionModel m;
    try {
        m.extraction = j.at("extraction").get<ExtractionSettings>();
        if (m.extraction.layout_hash() != j.at("layout_hash").get<std::string>()) {
            throw Error(ErrorCode::LayoutMismatch, origin + ": layout hash does not match stored extraction settings");
        }
        j.at("standardizer").at("mean").get_to(m.standardizer.mean);
        j.at("standardizer").at("stddev").get_to(m.standardizer.stddev);
        j.at("base_score").get_to(m.base_score);
        j.at("learning_rate").get_to(m.learning_rate);
        const auto& c = j.at("config");
        c.at("trees").get_to(m.config.trees);
        c.at("max_depth").get_to(m.config.max_depth);
        c.at("learning_rate").get_to(m.config.learning_rate);
        c.at("min_samples_leaf").get_to(m.config.min_samples_leaf);
        c.at("train_fraction").get_to(m.config.train_fraction);
        c.at("seed").get_to(m.config.seed);
        for (const auto& tj : j.at("trees")) {
            RegressionTree t;
            tj.at("feature").get_to(t.feature);
            tj.at("threshold").get_to(t.threshold);
            tj.at("left").get_to(t.left);
            tj.at("right").get_to(t.right);
            tj.at("value").get_to(t.value);
            const auto n = t.feature.size();
            if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n || t.value.size() != n) {
                throw Error(ErrorCode::Parse, origin + ": malformed tree");
            }
            for (std::size_t k = 0; k < n; ++k) {
                if (t.feature[k] >= static_cast<int>(kDistanceDims) ||
                    (t.feature[k] >= 0 && (t.left[k] <= static_cast<int>(k) || t.right[k] <= static_cast<int>(k) ||
                                           t.left[k] >= static_cast<int>(n) || t.right[k] >= static_cast<int>(n)))) {
                    throw Error(ErrorCode::Parse, origin + ": malformed tree node");
                }
            }
            m.trees.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, origin + ": malformed transition model: " + e.what());
    }
    return m;
}

inline void save_model(const TransitionModel& m, const std::filesystem::path& path) {
    write_file(path, model_to_json(m).dump());
}

/// Loads a transition model; when expected_layout is non-empty the model must
/// have been trained on features with that layout hash.
inline TransitionModel load_model(const std::filesystem::path& path, const std::string& expected_layout = {}) {
    const auto j = read_container(path, "transition");
    if (!expected_layout.empty()) {
        check_layout(j, expected_layout, path.string());
    }
    return model_from_json(j, path.string());
}

/// Stable identity of a model's numeric content.
inline std::string model_fingerprint(const TransitionModel& m) { return to_hex(fnv1a64(model_to_json(m).dump())); }

}  // namespace storyline
