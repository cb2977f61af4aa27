#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "storyline/container.hpp"
#include "storyline/error.hpp"
#include "storyline/features.hpp"
#include "storyline/image.hpp"
#include "storyline/text.hpp"
#include "storyline/util.hpp"

namespace storyline {

struct Document {
    std::string id;
    std::string text;
    std::int64_t hashtag_count = 0;
    std::int64_t mention_count = 0;
    std::int64_t url_count = 0;
    bool is_retweet = false;
    std::int64_t timestamp = 0;
    std::string image_path;    // empty when absent
    std::string sidecar_path;  // empty when absent
};

inline nlohmann::json document_to_json(const Document& d) {
    nlohmann::json j = {{"id", d.id},
                        {"text", d.text},
                        {"hashtag_count", d.hashtag_count},
                        {"mention_count", d.mention_count},
                        {"url_count", d.url_count},
                        {"is_retweet", d.is_retweet},
                        {"timestamp", d.timestamp}};
    if (!d.image_path.empty()) j["image_path"] = d.image_path;
    if (!d.sidecar_path.empty()) j["sidecar_path"] = d.sidecar_path;
    return j;
}

namespace detail {

inline std::int64_t read_count(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) return 0;
    const auto v = j.at(key).get<std::int64_t>();
    if (v < 0) {
        throw Error(ErrorCode::Parse, std::string(key) + " is negative");
    }
    return v;
}

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) {
        path = base / path;
    }
    return path.lexically_normal().string();
}

}  // namespace detail

/// Parses one corpus record. Relative image and sidecar paths are resolved
/// against base_dir.
inline Document document_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    if (!j.is_object()) {
        throw Error(ErrorCode::Parse, "record is not an object");
    }
    Document d;
    d.id = j.at("id").get<std::string>();
    if (d.id.empty()) {
        throw Error(ErrorCode::Parse, "empty id");
    }
    d.text = j.at("text").get<std::string>();
    d.hashtag_count = detail::read_count(j, "hashtag_count");
    d.mention_count = detail::read_count(j, "mention_count");
    d.url_count = detail::read_count(j, "url_count");
    d.is_retweet = j.value("is_retweet", false);
    d.timestamp = j.value("timestamp", std::int64_t{0});
    d.image_path = detail::resolve_path(j.value("image_path", ""), base_dir);
    d.sidecar_path = detail::resolve_path(j.value("sidecar_path", ""), base_dir);
    return d;
}

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink stderr_warnings() {
    return [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
}

/// One JSON record per line. Malformed lines are skipped and reported with
/// their line number; duplicated ids abort the load.
inline std::vector<Document> load_corpus(const std::filesystem::path& path, const WarningSink& warn = stderr_warnings()) {
    const auto lines = split_lines(read_file(path));
    const auto base = path.parent_path();
    std::vector<Document> docs;
    std::map<std::string, int> seen;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_blank(lines[i])) continue;
        try {
            docs.push_back(document_from_json(nlohmann::json::parse(lines[i]), base));
            ++seen[docs.back().id];
        } catch (const std::exception& e) {
            if (warn) {
                warn(path.string() + ":" + std::to_string(i + 1) + ": skipping malformed record: " + e.what());
            }
        }
    }
    std::vector<std::string> dups;
    for (const auto& [id, count] : seen) {
        if (count > 1) dups.push_back(id);
    }
    if (!dups.empty()) {
        std::string msg = path.string() + ": duplicate document id(s):";
        for (const auto& id : dups) msg += " " + id;
        throw Error(ErrorCode::DuplicateId, msg);
    }
    return docs;
}

inline void save_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
    std::string out;
    for (const auto& d : docs) {
        out += document_to_json(d).dump() + "\n";
    }
    write_file(path, out);
}

// ---------------------------------------------------------------------------
// Filtering

enum class RejectReason { Retweet, SpamHashtags, SpamMentions, SpamUrls, NonEnglish, NotPhotograph, NoImage };

inline std::string_view to_string(RejectReason r) {
    switch (r) {
    case RejectReason::Retweet: return "RETWEET";
    case RejectReason::SpamHashtags: return "SPAM_HASHTAGS";
    case RejectReason::SpamMentions: return "SPAM_MENTIONS";
    case RejectReason::SpamUrls: return "SPAM_URLS";
    case RejectReason::NonEnglish: return "NON_ENGLISH";
    case RejectReason::NotPhotograph: return "NOT_PHOTOGRAPH";
    case RejectReason::NoImage: return "NO_IMAGE";
    }
    return "UNKNOWN";
}

struct Rejection {
    std::string id;
    RejectReason reason;
};

struct FilterReport {
    std::vector<std::string> kept;
    std::vector<Rejection> rejected;

    std::map<RejectReason, std::size_t> counts() const {
        std::map<RejectReason, std::size_t> c;
        for (const auto& r : rejected) ++c[r.reason];
        return c;
    }
};

/// Counts strictly above a limit are spam.
struct SpamLimits {
    std::int64_t max_hashtags = 3;
    std::int64_t max_mentions = 3;
    std::int64_t max_urls = 2;
};

struct LogisticModel;
inline double classify_photograph(const LogisticModel& model, const Image& image);

/// Returns true when the image contains text and should be rejected.
using OcrHook = std::function<bool(const std::filesystem::path&)>;

struct FilterOptions {
    SpamLimits limits;
    double english_min_ratio = 0.25;
    bool require_image = true;
    const LogisticModel* photo_model = nullptr;  // visual spam check when set
    double photo_threshold = 0.5;
    OcrHook ocr;  // disabled when empty
};

inline std::optional<RejectReason> text_rejection(const Document& d, const FilterOptions& opt) {
    if (d.is_retweet) return RejectReason::Retweet;
    if (d.hashtag_count > opt.limits.max_hashtags) return RejectReason::SpamHashtags;
    if (d.mention_count > opt.limits.max_mentions) return RejectReason::SpamMentions;
    if (d.url_count > opt.limits.max_urls) return RejectReason::SpamUrls;
    if (!looks_english(d.text, opt.english_min_ratio)) return RejectReason::NonEnglish;
    if (opt.require_image && d.image_path.empty()) return RejectReason::NoImage;
    return std::nullopt;
}

inline std::optional<RejectReason> visual_rejection(const Document& d, const FilterOptions& opt) {
    if (opt.photo_model == nullptr && !opt.ocr) return std::nullopt;
    if (d.image_path.empty()) return RejectReason::NoImage;
    if (opt.photo_model != nullptr) {
        Image img;
        try {
            img = load_image(d.image_path);
        } catch (const Error&) {
            return RejectReason::NoImage;
        }
        if (classify_photograph(*opt.photo_model, img) < opt.photo_threshold) {
            return RejectReason::NotPhotograph;
        }
    }
    if (opt.ocr && opt.ocr(d.image_path)) return RejectReason::NotPhotograph;
    return std::nullopt;
}

/// Partitions docs into kept and rejected (first failing rule wins). Pure in
/// the documents, so filtering the kept set again is a no-op.
inline FilterReport filter_documents(const std::vector<Document>& docs, const FilterOptions& opt = {}) {
    FilterReport report;
    for (const auto& d : docs) {
        auto reason = text_rejection(d, opt);
        if (!reason) reason = visual_rejection(d, opt);
        if (reason) {
            report.rejected.push_back({d.id, *reason});
        } else {
            report.kept.push_back(d.id);
        }
    }
    return report;
}

inline std::vector<Document> kept_documents(const std::vector<Document>& docs, const FilterReport& report) {
    const std::set<std::string> kept(report.kept.begin(), report.kept.end());
    std::vector<Document> out;
    for (const auto& d : docs) {
        if (kept.contains(d.id)) out.push_back(d);
    }
    return out;
}

/// Runs `command <image path>`; any non-whitespace output means text was found.
inline OcrHook external_ocr_hook(std::string command) {
    return [command = std::move(command)](const std::filesystem::path& image) {
        std::string quoted = "'";
        for (char c : image.string()) {
            if (c == '\'') quoted += "'\\''";
            else quoted += c;
        }
        quoted += "'";
        const std::string cmd = command + " " + quoted + " 2>/dev/null";
        std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
        if (!pipe) {
            throw Error(ErrorCode::Io, "cannot run OCR command: " + command);
        }
        char buf[256];
        while (std::fgets(buf, sizeof buf, pipe.get()) != nullptr) {
            if (!is_blank(buf)) return true;
        }
        return false;
    };
}

// ---------------------------------------------------------------------------
// Visual spam classifier

inline constexpr int kLumaBins = 32;
inline constexpr int kOrientationBins = 4;
inline constexpr int kPhotoFeatureDim = kLumaBins + kOrientationBins;
inline constexpr std::string_view kPhotoFeatureLayout = "luma32+edge4(v,h,45,135);sobel=0.25;max_side=512;zscore";

/// 32-bin luminance histogram followed by the vertical/horizontal/45/135
/// edge-orientation histogram; both L1-normalized (an edgeless image has an
/// all-zero edge part).
inline std::vector<double> photo_features(const Image& input) {
    const Image img = limit_long_side(input, 512);
    const Plane gray = luma_plane(img);
    std::vector<double> f(kPhotoFeatureDim, 0.0);
    for (double v : gray.values) {
        const int bin = std::clamp(static_cast<int>(v / 256.0 * kLumaBins), 0, kLumaBins - 1);
        f[static_cast<std::size_t>(bin)] += 1.0;
    }
    for (int i = 0; i < kLumaBins; ++i) f[static_cast<std::size_t>(i)] /= static_cast<double>(gray.values.size());
    const auto o = sobel_orientations(gray, 0.25);
    const double total = static_cast<double>(o.vertical + o.horizontal + o.deg45 + o.deg135);
    if (total > 0) {
        f[kLumaBins + 0] = o.vertical / total;
        f[kLumaBins + 1] = o.horizontal / total;
        f[kLumaBins + 2] = o.deg45 / total;
        f[kLumaBins + 3] = o.deg135 / total;
    }
    return f;
}

/// Weights act on z-scored features; empty mean/scale means raw features.
struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    double l1_lambda = 1.0;
    std::vector<double> mean;
    std::vector<double> scale;

    double probability(const std::vector<double>& x) const {
        if (x.size() != weights.size()) {
            throw Error(ErrorCode::LayoutMismatch, "photo classifier expects " + std::to_string(weights.size()) +
                                                       " features, got " + std::to_string(x.size()));
        }
        const bool standardize = !mean.empty();
        double z = bias;
        for (std::size_t i = 0; i < x.size(); ++i) {
            z += weights[i] * (standardize ? (x[i] - mean[i]) / scale[i] : x[i]);
        }
        return 1.0 / (1.0 + std::exp(-z));
    }
};

/// Probability that the image is a photograph.
inline double classify_photograph(const LogisticModel& model, const Image& image) {
    return model.probability(photo_features(image));
}

struct LogisticTrainConfig {
    double l1_lambda = 1.0;
    double tolerance = 1e-6;
    int max_iterations = 10000;
    int folds = 5;
};

struct LogisticTrainReport {
    LogisticModel model;
    double cv_accuracy = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

struct LogisticFit {
    LogisticModel model;
    int iterations = 0;
    bool converged = false;
};

// Proximal gradient (ISTA) on  sum_i logloss_i + lambda * ||w||_1 over
// z-scored features, bias unpenalized. Step 1/L with L = ||[X 1]||_F^2 / 4
// >= Lipschitz constant.
inline LogisticFit fit_logistic(const std::vector<std::vector<double>>& raw, const std::vector<int>& ys,
                                const LogisticTrainConfig& cfg) {
    const std::size_t dim = raw.front().size();
    std::vector<double> mean(dim, 0.0), scale(dim, 0.0);
    for (const auto& x : raw) {
        for (std::size_t k = 0; k < dim; ++k) mean[k] += x[k];
    }
    for (auto& m : mean) m /= static_cast<double>(raw.size());
    for (const auto& x : raw) {
        for (std::size_t k = 0; k < dim; ++k) scale[k] += (x[k] - mean[k]) * (x[k] - mean[k]);
    }
    for (auto& s : scale) {
        s = std::sqrt(s / static_cast<double>(raw.size()));
        if (s < 1e-12) s = 1.0;  // constant feature
    }
    std::vector<std::vector<double>> xs = raw;
    for (auto& x : xs) {
        for (std::size_t k = 0; k < dim; ++k) x[k] = (x[k] - mean[k]) / scale[k];
    }
    double frob = 0.0;
    for (const auto& x : xs) {
        frob += 1.0;
        for (double v : x) frob += v * v;
    }
    const double step = 4.0 / frob;
    LogisticFit fit;
    fit.model.weights.assign(dim, 0.0);
    fit.model.l1_lambda = cfg.l1_lambda;
    std::vector<double> grad(dim);
    for (int it = 0; it < cfg.max_iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double r = fit.model.probability(xs[i]) - ys[i];
            grad_b += r;
            for (std::size_t k = 0; k < dim; ++k) grad[k] += r * xs[i][k];
        }
        double max_change = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double u = fit.model.weights[k] - step * grad[k];
            const double shrunk = std::copysign(std::max(0.0, std::abs(u) - step * cfg.l1_lambda), u);
            max_change = std::max(max_change, std::abs(shrunk - fit.model.weights[k]));
            fit.model.weights[k] = shrunk;
        }
        const double nb = fit.model.bias - step * grad_b;
        max_change = std::max(max_change, std::abs(nb - fit.model.bias));
        fit.model.bias = nb;
        fit.iterations = it + 1;
        if (max_change < cfg.tolerance) {
            fit.converged = true;
            break;
        }
    }
    fit.model.mean = std::move(mean);
    fit.model.scale = std::move(scale);
    return fit;
}

}  // namespace detail

/// Trains on (feature vector, is_photo) examples; cross-validated accuracy
/// uses deterministic stratified folds, the returned model is fit on all data.
inline LogisticTrainReport train_visual_spam_classifier_features(const std::vector<std::vector<double>>& xs,
                                                                 const std::vector<int>& ys,
                                                                 const LogisticTrainConfig& cfg = {}) {
    if (xs.size() != ys.size() || xs.empty()) {
        throw Error(ErrorCode::InvalidArgument, "need a non-empty, aligned training set");
    }
    std::size_t pos = 0, neg = 0;
    for (int y : ys) {
        if (y == 1) ++pos;
        else if (y == 0) ++neg;
        else throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    }
    if (pos < 2 || neg < 2) {
        throw Error(ErrorCode::SingleClass, "photo classifier needs at least 2 examples of each class (got " +
                                                std::to_string(pos) + " photos, " + std::to_string(neg) +
                                                " non-photos)");
    }
    for (const auto& x : xs) {
        if (x.size() != xs.front().size()) {
            throw Error(ErrorCode::DimensionMismatch, "inconsistent feature dimension");
        }
    }
    std::vector<int> fold(xs.size());
    std::size_t seen_pos = 0, seen_neg = 0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        fold[i] = static_cast<int>((ys[i] == 1 ? seen_pos++ : seen_neg++) % static_cast<std::size_t>(cfg.folds));
    }
    std::size_t correct = 0, evaluated = 0;
    for (int f = 0; f < cfg.folds; ++f) {
        std::vector<std::vector<double>> tx;
        std::vector<int> ty;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (fold[i] != f) {
                tx.push_back(xs[i]);
                ty.push_back(ys[i]);
            }
        }
        const bool has_test = std::find(fold.begin(), fold.end(), f) != fold.end();
        if (!has_test) continue;
        const auto m = detail::fit_logistic(tx, ty, cfg).model;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (fold[i] != f) continue;
            ++evaluated;
            if ((m.probability(xs[i]) >= 0.5) == (ys[i] == 1)) ++correct;
        }
    }
    auto full = detail::fit_logistic(xs, ys, cfg);
    LogisticTrainReport report;
    report.model = std::move(full.model);
    report.iterations = full.iterations;
    report.converged = full.converged;
    report.cv_accuracy = evaluated ? static_cast<double>(correct) / evaluated : 0.0;
    return report;
}

inline LogisticTrainReport train_visual_spam_classifier(const std::vector<std::pair<Image, bool>>& examples,
                                                        const LogisticTrainConfig& cfg = {}) {
    std::vector<std::vector<double>> xs;
    std::vector<int> ys;
    for (const auto& [img, is_photo] : examples) {
        xs.push_back(photo_features(img));
        ys.push_back(is_photo ? 1 : 0);
    }
    return train_visual_spam_classifier_features(xs, ys, cfg);
}

inline std::string photo_layout_hash() { return to_hex(fnv1a64(kPhotoFeatureLayout)); }

inline void save_logistic_model(const LogisticModel& m, const std::filesystem::path& path) {
    auto j = make_container("photo-classifier", photo_layout_hash());
    j["feature_layout"] = kPhotoFeatureLayout;
    j["weights"] = m.weights;
    j["bias"] = m.bias;
    j["l1_lambda"] = m.l1_lambda;
    j["mean"] = m.mean;
    j["scale"] = m.scale;
    write_file(path, j.dump(2));
}

inline LogisticModel load_logistic_model(const std::filesystem::path& path) {
    const auto j = read_container(path, "photo-classifier");
    check_layout(j, photo_layout_hash(), path.string());
    LogisticModel m;
    j.at("weights").get_to(m.weights);
    j.at("bias").get_to(m.bias);
    j.at("l1_lambda").get_to(m.l1_lambda);
    if (j.contains("mean")) j.at("mean").get_to(m.mean);
    if (j.contains("scale")) j.at("scale").get_to(m.scale);
    if (m.weights.size() != static_cast<std::size_t>(kPhotoFeatureDim) ||
        (!m.mean.empty() && (m.mean.size() != m.weights.size() || m.scale.size() != m.weights.size()))) {
        throw Error(ErrorCode::LayoutMismatch, path.string() + ": wrong photo classifier weight dimension");
    }
    return m;
}

// ---------------------------------------------------------------------------
// Transition annotations

/// Unordered image pair; stored with image_a <= image_b.
struct ImagePair {
    std::string image_a;
    std::string image_b;

    ImagePair() = default;
    ImagePair(std::string a, std::string b) : image_a(std::move(a)), image_b(std::move(b)) {
        if (image_b < image_a) std::swap(image_a, image_b);
    }

    auto operator<=>(const ImagePair&) const = default;
    std::string key() const { return image_a + "|" + image_b; }
};

struct Vote {
    ImagePair pair;
    std::string annotator;
    int vote = 0;
};

struct AnnotatedPair {
    std::string image_a;
    std::string image_b;
    double rating = 0.0;
    std::int64_t annotator_count = 0;
    std::int64_t positive_votes = 0;
};

/// Maps a 1..5 Likert score to a 0/1 vote.
inline int likert_to_vote(int score, int good_from = 4) {
    if (score < 1 || score > 5) {
        throw Error(ErrorCode::InvalidArgument, "Likert score out of range: " + std::to_string(score));
    }
    return score >= good_from ? 1 : 0;
}

/// Mean of 0/1 votes per pair, output sorted by pair so the result does not
/// depend on vote order.
inline std::vector<AnnotatedPair> aggregate_annotations(const std::vector<Vote>& votes) {
    std::map<ImagePair, std::pair<std::int64_t, std::int64_t>> acc;  // (sum, count)
    std::set<std::pair<ImagePair, std::string>> seen;
    for (const auto& v : votes) {
        if (v.vote != 0 && v.vote != 1) {
            throw Error(ErrorCode::InvalidArgument, "vote must be 0 or 1 for pair " + v.pair.key());
        }
        if (!seen.insert({v.pair, v.annotator}).second) {
            throw Error(ErrorCode::DuplicateVote,
                        "annotator '" + v.annotator + "' voted twice on pair " + v.pair.key());
        }
        auto& [sum, count] = acc[v.pair];
        sum += v.vote;
        ++count;
    }
    std::vector<AnnotatedPair> out;
    out.reserve(acc.size());
    for (const auto& [pair, sc] : acc) {
        out.push_back({pair.image_a, pair.image_b, static_cast<double>(sc.first) / static_cast<double>(sc.second),
                       sc.second, sc.first});
    }
    return out;
}

/// CSV with header `image_a,image_b,rating`.
inline void save_training_pairs(const std::filesystem::path& path, const std::vector<AnnotatedPair>& pairs) {
    std::string out = "image_a,image_b,rating\n";
    for (const auto& p : pairs) {
        out += p.image_a + "," + p.image_b + "," + nlohmann::json(p.rating).dump() + "\n";
    }
    write_file(path, out);
}

struct RatedPair {
    std::string image_a;
    std::string image_b;
    double rating = 0.0;
};

inline std::vector<RatedPair> load_training_pairs(const std::filesystem::path& path) {
    std::vector<RatedPair> out;
    const auto lines = split_lines(read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_blank(lines[i])) continue;
        if (i == 0 && lines[i].rfind("image_a", 0) == 0) continue;
        const auto c1 = lines[i].find(',');
        const auto c2 = c1 == std::string::npos ? c1 : lines[i].find(',', c1 + 1);
        if (c2 == std::string::npos) {
            throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(i + 1) + ": expected 3 columns");
        }
        RatedPair p{lines[i].substr(0, c1), lines[i].substr(c1 + 1, c2 - c1 - 1), 0.0};
        try {
            p.rating = std::stod(lines[i].substr(c2 + 1));
        } catch (const std::exception&) {
            throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(i + 1) + ": bad rating");
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// CSV with header `image_a,image_b,annotator,vote`.
inline std::vector<Vote> load_votes(const std::filesystem::path& path) {
    std::vector<Vote> out;
    const auto lines = split_lines(read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_blank(lines[i])) continue;
        if (i == 0 && lines[i].rfind("image_a", 0) == 0) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        for (;;) {
            const auto c = lines[i].find(',', start);
            cols.push_back(lines[i].substr(start, c == std::string::npos ? std::string::npos : c - start));
            if (c == std::string::npos) break;
            start = c + 1;
        }
        if (cols.size() != 4) {
            throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(i + 1) + ": expected 4 columns");
        }
        int vote = 0;
        try {
            vote = std::stoi(cols[3]);
        } catch (const std::exception&) {
            throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(i + 1) + ": bad vote");
        }
        out.push_back({ImagePair(cols[0], cols[1]), cols[2], vote});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Near-duplicate clustering

struct HashedDocument {
    std::string id;
    std::int64_t timestamp = 0;
    std::uint64_t phash = 0;
};

struct DuplicateCluster {
    std::vector<std::string> members;  // ordered by (timestamp, id)
    std::string representative;        // earliest timestamp, ties by id
};

/// Single-link clusters over pHash Hamming distance <= threshold.
inline std::vector<DuplicateCluster> dedup_near_duplicates(const std::vector<HashedDocument>& docs,
                                                           int hamming_threshold) {
    const std::size_t n = docs.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (hamming_distance(docs[i].phash, docs[j].phash) <= hamming_threshold) {
                parent[find(i)] = find(j);
            }
        }
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);
    std::vector<DuplicateCluster> clusters;
    for (auto& [root, idx] : groups) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return std::tie(docs[a].timestamp, docs[a].id) < std::tie(docs[b].timestamp, docs[b].id);
        });
        DuplicateCluster c;
        for (auto i : idx) c.members.push_back(docs[i].id);
        c.representative = c.members.front();
        clusters.push_back(std::move(c));
    }
    std::sort(clusters.begin(), clusters.end(), [&](const auto& a, const auto& b) {
        return a.members.front() < b.members.front();
    });
    return clusters;
}

}  // namespace storyline
