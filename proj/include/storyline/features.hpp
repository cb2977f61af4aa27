#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyline/color.hpp"
#include "storyline/error.hpp"
#include "storyline/image.hpp"
#include "storyline/util.hpp"

namespace storyline {

/// Knobs that change the numeric layout of extracted features. Anything that
/// consumes features (the transition model in particular) pins the hash of
/// these settings so train and predict always agree.
struct ExtractionSettings {
    int hist_bins_per_channel = 16;
    int correlogram_l_bins = 4;
    int correlogram_a_bins = 2;
    int correlogram_b_bins = 2;
    std::vector<int> correlogram_distances = {1};
    int max_side = 512;
    double edge_threshold = 0.25;  // fraction of the max Sobel magnitude

    int correlogram_colors() const {
        return correlogram_l_bins * correlogram_a_bins * correlogram_b_bins;
    }

    std::string canonical() const {
        std::ostringstream os;
        os << "hist=" << hist_bins_per_channel << "^3:lab;corr=L" << correlogram_l_bins << "a"
           << correlogram_a_bins << "b" << correlogram_b_bins << ";corr_d=";
        for (std::size_t i = 0; i < correlogram_distances.size(); ++i) {
            os << (i ? "," : "") << correlogram_distances[i];
        }
        os << ";max_side=" << max_side << ";edge=" << edge_threshold
           << ";luma=rec601;entropy=gray256;phash=dct32x32:1-8";
        return os.str();
    }

    std::string layout_hash() const { return to_hex(fnv1a64(canonical())); }

    bool operator==(const ExtractionSettings&) const = default;
};

inline void to_json(nlohmann::json& j, const ExtractionSettings& s) {
    j = {{"hist_bins_per_channel", s.hist_bins_per_channel},
         {"correlogram_l_bins", s.correlogram_l_bins},
         {"correlogram_a_bins", s.correlogram_a_bins},
         {"correlogram_b_bins", s.correlogram_b_bins},
         {"correlogram_distances", s.correlogram_distances},
         {"max_side", s.max_side},
         {"edge_threshold", s.edge_threshold}};
}

inline void from_json(const nlohmann::json& j, ExtractionSettings& s) {
    j.at("hist_bins_per_channel").get_to(s.hist_bins_per_channel);
    j.at("correlogram_l_bins").get_to(s.correlogram_l_bins);
    j.at("correlogram_a_bins").get_to(s.correlogram_a_bins);
    j.at("correlogram_b_bins").get_to(s.correlogram_b_bins);
    j.at("correlogram_distances").get_to(s.correlogram_distances);
    j.at("max_side").get_to(s.max_side);
    j.at("edge_threshold").get_to(s.edge_threshold);
}

struct EdgeCounts {
    std::int64_t horizontal = 0;
    std::int64_t vertical = 0;
    std::int64_t diagonal = 0;

    bool operator==(const EdgeCounts&) const = default;
};

struct VisualFeatures {
    double luminance = 0.0;
    std::vector<double> color_hist;
    std::array<double, 3> color_moment{};
    std::vector<double> correlogram;
    double entropy = 0.0;
    EdgeCounts edges;
    std::uint64_t phash = 0;

    bool operator==(const VisualFeatures&) const = default;
};

enum class Environment { Unknown, Outdoors, Indoors };

inline std::string_view to_string(Environment env) {
    switch (env) {
    case Environment::Outdoors: return "outdoors";
    case Environment::Indoors: return "indoors";
    case Environment::Unknown: return "unknown";
    }
    return "unknown";
}

inline Environment parse_environment(std::string_view s) {
    if (s == "outdoors") return Environment::Outdoors;
    if (s == "indoors") return Environment::Indoors;
    if (s == "unknown" || s.empty()) return Environment::Unknown;
    throw Error(ErrorCode::Parse, "unknown environment label '" + std::string(s) + "'");
}

struct SemanticFeatures {
    std::set<std::string> concepts;
    std::vector<double> dense_embedding;
    Environment environment = Environment::Unknown;
    std::set<std::string> scene_categories;
    std::set<std::string> scene_attributes;

    bool operator==(const SemanticFeatures&) const = default;
};

struct FeatureBundle {
    std::string image_id;
    std::string content_hash;
    std::string source;  // image path the features came from, if any
    VisualFeatures visual;
    std::optional<SemanticFeatures> semantic;  // nullopt = flagged semantic-absent

    bool semantic_absent() const { return !semantic.has_value(); }
};

// ---------------------------------------------------------------------------
// Gradients

/// Sobel gradient orientations, bucketed to the nearest of 0/45/90/135 degree
/// gradient directions. A 0-degree gradient (intensity change along x) is a
/// vertical edge; a 90-degree gradient is a horizontal edge.
struct OrientationCounts {
    std::int64_t vertical = 0;
    std::int64_t horizontal = 0;
    std::int64_t deg45 = 0;
    std::int64_t deg135 = 0;
};

inline OrientationCounts sobel_orientations(const Plane& gray, double threshold_fraction) {
    OrientationCounts counts;
    if (gray.width < 3 || gray.height < 3) {
        return counts;
    }
    const int w = gray.width, h = gray.height;
    Plane gx(w, h), gy(w, h), mag(w, h);
    double max_mag = 0.0;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const double dx = (gray(x + 1, y - 1) + 2 * gray(x + 1, y) + gray(x + 1, y + 1)) -
                              (gray(x - 1, y - 1) + 2 * gray(x - 1, y) + gray(x - 1, y + 1));
            const double dy = (gray(x - 1, y + 1) + 2 * gray(x, y + 1) + gray(x + 1, y + 1)) -
                              (gray(x - 1, y - 1) + 2 * gray(x, y - 1) + gray(x + 1, y - 1));
            gx(x, y) = dx;
            gy(x, y) = dy;
            mag(x, y) = std::hypot(dx, dy);
            max_mag = std::max(max_mag, mag(x, y));
        }
    }
    if (max_mag <= 0.0) {
        return counts;
    }
    const double threshold = threshold_fraction * max_mag;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            if (mag(x, y) < threshold) {
                continue;
            }
            double deg = std::atan2(gy(x, y), gx(x, y)) * 180.0 / std::numbers::pi;
            if (deg < 0) deg += 180.0;
            const int bucket = static_cast<int>(std::lround(deg / 45.0)) % 4;
            switch (bucket) {
            case 0: ++counts.vertical; break;
            case 1: ++counts.deg135; break;
            case 2: ++counts.horizontal; break;
            default: ++counts.deg45; break;
            }
        }
    }
    return counts;
}

// ---------------------------------------------------------------------------
// pHash

namespace detail {

inline const std::array<std::array<double, 32>, 32>& dct32_matrix() {
    static const auto m = [] {
        std::array<std::array<double, 32>, 32> c{};
        for (int u = 0; u < 32; ++u) {
            const double alpha = u == 0 ? std::sqrt(1.0 / 32) : std::sqrt(2.0 / 32);
            for (int x = 0; x < 32; ++x) {
                c[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)] =
                    alpha * std::cos((2 * x + 1) * u * std::numbers::pi / 64.0);
            }
        }
        return c;
    }();
    return m;
}

inline std::uint64_t phash_from_gray(const Plane& gray) {
    const Plane small = resize_area(gray, 32, 32);
    const auto& c = dct32_matrix();
    // Only rows/cols 1..8 of the 2D DCT are needed.
    std::array<std::array<double, 32>, 9> rows{};
    for (int u = 1; u <= 8; ++u) {
        for (int x = 0; x < 32; ++x) {
            double acc = 0.0;
            for (int y = 0; y < 32; ++y) {
                acc += c[static_cast<std::size_t>(u)][static_cast<std::size_t>(y)] * small(x, y);
            }
            rows[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)] = acc;
        }
    }
    std::array<double, 64> coeffs{};
    for (int u = 1; u <= 8; ++u) {
        for (int v = 1; v <= 8; ++v) {
            double acc = 0.0;
            for (int x = 0; x < 32; ++x) {
                acc += rows[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)] *
                       c[static_cast<std::size_t>(v)][static_cast<std::size_t>(x)];
            }
            coeffs[static_cast<std::size_t>((u - 1) * 8 + (v - 1))] = acc;
        }
    }
    auto sorted = coeffs;
    std::sort(sorted.begin(), sorted.end());
    const double median = 0.5 * (sorted[31] + sorted[32]);
    std::uint64_t hash = 0;
    for (std::size_t i = 0; i < 64; ++i) {
        if (coeffs[i] > median) {
            hash |= std::uint64_t{1} << i;
        }
    }
    return hash;
}

}  // namespace detail

/// DCT perceptual hash: 32x32 gray, 2D DCT-II, the 8x8 block just past the DC
/// row and column, thresholded at its median.
inline std::uint64_t compute_phash(const Image& image) {
    return detail::phash_from_gray(luma_plane(image));
}

inline int hamming_distance(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

// ---------------------------------------------------------------------------
// Visual features

inline double gray_entropy(const Plane& gray) {
    std::array<std::int64_t, 256> hist{};
    for (double v : gray.values) {
        const int level = static_cast<int>(std::clamp(std::round(v), 0.0, 255.0));
        ++hist[static_cast<std::size_t>(level)];
    }
    const double n = static_cast<double>(gray.values.size());
    double h = 0.0;
    for (auto count : hist) {
        if (count > 0) {
            const double p = count / n;
            h -= p * std::log2(p);
        }
    }
    return h > 0.0 ? h : 0.0;
}

namespace detail {

inline int quantize(double value, double lo, double hi, int bins) {
    const int b = static_cast<int>(std::floor((value - lo) / (hi - lo) * bins));
    return std::clamp(b, 0, bins - 1);
}

inline std::vector<double> auto_correlogram(const std::vector<int>& colors, int w, int h, int ncolors,
                                            const std::vector<int>& distances) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(ncolors) * distances.size());
    for (int d : distances) {
        std::vector<std::int64_t> same(static_cast<std::size_t>(ncolors), 0);
        std::vector<std::int64_t> total(static_cast<std::size_t>(ncolors), 0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int c = colors[static_cast<std::size_t>(y) * w + x];
                // Ring of chessboard radius d around (x, y).
                for (int dy = -d; dy <= d; ++dy) {
                    for (int dx = -d; dx <= d; ++dx) {
                        if (std::max(std::abs(dx), std::abs(dy)) != d) continue;
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        ++total[static_cast<std::size_t>(c)];
                        if (colors[static_cast<std::size_t>(ny) * w + nx] == c) {
                            ++same[static_cast<std::size_t>(c)];
                        }
                    }
                }
            }
        }
        for (int c = 0; c < ncolors; ++c) {
            const auto t = total[static_cast<std::size_t>(c)];
            out.push_back(t > 0 ? static_cast<double>(same[static_cast<std::size_t>(c)]) / t : 0.0);
        }
    }
    return out;
}

}  // namespace detail

inline VisualFeatures extract_visual_features(const Image& input, const ExtractionSettings& settings = {}) {
    if (input.width <= 0 || input.height <= 0) {
        throw Error(ErrorCode::InvalidArgument, "image has no pixels");
    }
    const Image img = limit_long_side(input, settings.max_side);
    const std::size_t n = img.pixel_count();
    const int hb = settings.hist_bins_per_channel;

    VisualFeatures f;
    f.color_hist.assign(static_cast<std::size_t>(hb) * hb * hb, 0.0);
    std::vector<std::int64_t> hist_counts(f.color_hist.size(), 0);
    std::vector<int> corr_colors(n);
    const Plane gray = luma_plane(img);

    double luma_sum = 0.0;
    double lsum = 0.0, asum = 0.0, bsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto* p = &img.rgb[i * 3];
        const Lab lab = rgb_to_cielab(p[0], p[1], p[2]);
        luma_sum += gray.values[i];
        lsum += lab.l;
        asum += lab.a;
        bsum += lab.b;
        const int li = detail::quantize(lab.l, 0.0, 100.0, hb);
        const int ai = detail::quantize(lab.a, -128.0, 128.0, hb);
        const int bi = detail::quantize(lab.b, -128.0, 128.0, hb);
        ++hist_counts[static_cast<std::size_t>((li * hb + ai) * hb + bi)];
        const int cl = detail::quantize(lab.l, 0.0, 100.0, settings.correlogram_l_bins);
        const int ca = detail::quantize(lab.a, -128.0, 128.0, settings.correlogram_a_bins);
        const int cb = detail::quantize(lab.b, -128.0, 128.0, settings.correlogram_b_bins);
        corr_colors[i] = (cl * settings.correlogram_a_bins + ca) * settings.correlogram_b_bins + cb;
    }
    const double dn = static_cast<double>(n);
    for (std::size_t i = 0; i < hist_counts.size(); ++i) {
        f.color_hist[i] = static_cast<double>(hist_counts[i]) / dn;
    }
    f.luminance = luma_sum / dn;
    f.color_moment = {lsum / dn, asum / dn, bsum / dn};
    f.correlogram = detail::auto_correlogram(corr_colors, img.width, img.height,
                                             settings.correlogram_colors(),
                                             settings.correlogram_distances);
    f.entropy = gray_entropy(gray);
    const auto orient = sobel_orientations(gray, settings.edge_threshold);
    f.edges = {orient.horizontal, orient.vertical, orient.deg45 + orient.deg135};
    f.phash = detail::phash_from_gray(gray);
    return f;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json visual_to_json(const VisualFeatures& f) {
    nlohmann::json hist = nlohmann::json::array();
    for (std::size_t i = 0; i < f.color_hist.size(); ++i) {
        if (f.color_hist[i] != 0.0) {
            hist.push_back({i, f.color_hist[i]});
        }
    }
    return {{"luminance", f.luminance},
            {"color_hist_size", f.color_hist.size()},
            {"color_hist", std::move(hist)},
            {"color_moment", f.color_moment},
            {"correlogram", f.correlogram},
            {"entropy", f.entropy},
            {"edges", {f.edges.horizontal, f.edges.vertical, f.edges.diagonal}},
            {"phash", to_hex(f.phash)}};
}

inline VisualFeatures visual_from_json(const nlohmann::json& j) {
    VisualFeatures f;
    j.at("luminance").get_to(f.luminance);
    f.color_hist.assign(j.at("color_hist_size").get<std::size_t>(), 0.0);
    for (const auto& entry : j.at("color_hist")) {
        const auto idx = entry.at(0).get<std::size_t>();
        if (idx >= f.color_hist.size()) {
            throw Error(ErrorCode::Parse, "color histogram index out of range");
        }
        f.color_hist[idx] = entry.at(1).get<double>();
    }
    j.at("color_moment").get_to(f.color_moment);
    j.at("correlogram").get_to(f.correlogram);
    j.at("entropy").get_to(f.entropy);
    const auto& e = j.at("edges");
    f.edges = {e.at(0).get<std::int64_t>(), e.at(1).get<std::int64_t>(), e.at(2).get<std::int64_t>()};
    f.phash = std::stoull(j.at("phash").get<std::string>(), nullptr, 16);
    return f;
}

inline nlohmann::json semantic_to_json(const SemanticFeatures& s) {
    return {{"concepts", s.concepts},
            {"embedding", s.dense_embedding},
            {"environment", to_string(s.environment)},
            {"scene_categories", s.scene_categories},
            {"scene_attributes", s.scene_attributes}};
}

inline SemanticFeatures semantic_from_json(const nlohmann::json& j) {
    SemanticFeatures s;
    if (j.contains("concepts")) j.at("concepts").get_to(s.concepts);
    if (j.contains("embedding")) j.at("embedding").get_to(s.dense_embedding);
    if (j.contains("environment")) s.environment = parse_environment(j.at("environment").get<std::string>());
    if (j.contains("scene_categories")) j.at("scene_categories").get_to(s.scene_categories);
    if (j.contains("scene_attributes")) j.at("scene_attributes").get_to(s.scene_attributes);
    return s;
}

// ---------------------------------------------------------------------------
// Semantic sidecars

/// Tracks the embedding dimension shared by every sidecar in one corpus. The
/// first non-empty embedding fixes it.
class EmbeddingDimension {
  public:
    void check(const std::string& image_id, std::size_t dim) {
        if (dim == 0) return;
        if (!m_dim) {
            m_dim = dim;
        } else if (*m_dim != dim) {
            throw Error(ErrorCode::DimensionMismatch,
                        "embedding for image '" + image_id + "' has dimension " + std::to_string(dim) +
                            ", corpus dimension is " + std::to_string(*m_dim));
        }
    }
    std::optional<std::size_t> value() const { return m_dim; }
    void set(std::size_t dim) { m_dim = dim; }

  private:
    std::optional<std::size_t> m_dim;
};

/// Reads a line-delimited sidecar file keyed by image id.
inline std::map<std::string, SemanticFeatures> load_sidecar_records(const std::filesystem::path& path) {
    std::map<std::string, SemanticFeatures> out;
    const auto lines = split_lines(read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_blank(lines[i])) continue;
        try {
            const auto j = nlohmann::json::parse(lines[i]);
            out[j.at("image_id").get<std::string>()] = semantic_from_json(j);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse,
                        path.string() + ":" + std::to_string(i + 1) + ": malformed sidecar record: " + e.what());
        }
    }
    return out;
}

/// nullopt when the sidecar file is missing or has no record for the image.
inline std::optional<SemanticFeatures> load_semantic_sidecar(const std::filesystem::path& path,
                                                             const std::string& image_id,
                                                             EmbeddingDimension& dim) {
    if (path.empty() || !std::filesystem::exists(path)) {
        return std::nullopt;
    }
    auto records = load_sidecar_records(path);
    auto it = records.find(image_id);
    if (it == records.end()) {
        return std::nullopt;
    }
    dim.check(image_id, it->second.dense_embedding.size());
    return std::move(it->second);
}

// ---------------------------------------------------------------------------
// Feature store (persisted bundles, keyed by content hash for reuse)

inline constexpr int kFeatureStoreVersion = 1;

class FeatureStore {
  public:
    explicit FeatureStore(ExtractionSettings settings = {}) : m_settings(std::move(settings)) {}

    const ExtractionSettings& settings() const { return m_settings; }
    const std::map<std::string, FeatureBundle>& bundles() const { return m_bundles; }
    std::optional<std::size_t> embedding_dim() const { return m_dim.value(); }

    const FeatureBundle* find(const std::string& image_id) const {
        auto it = m_bundles.find(image_id);
        return it == m_bundles.end() ? nullptr : &it->second;
    }

    const FeatureBundle& at(const std::string& image_id) const {
        const auto* b = find(image_id);
        if (b == nullptr) {
            throw Error(ErrorCode::MissingFeatures, "no features for image '" + image_id + "'");
        }
        return *b;
    }

    const VisualFeatures* find_by_content(const std::string& content_hash) const {
        auto it = m_by_content.find(content_hash);
        return it == m_by_content.end() ? nullptr : &m_bundles.at(it->second).visual;
    }

    void add(FeatureBundle bundle) {
        if (bundle.semantic) {
            m_dim.check(bundle.image_id, bundle.semantic->dense_embedding.size());
        }
        if (!bundle.content_hash.empty()) {
            m_by_content[bundle.content_hash] = bundle.image_id;
        }
        std::string id = bundle.image_id;
        m_bundles.insert_or_assign(std::move(id), std::move(bundle));
    }

    std::size_t size() const { return m_bundles.size(); }

    void save(const std::filesystem::path& path) const {
        std::string out;
        nlohmann::json header = {{"format", "storyline-features"},
                                 {"version", kFeatureStoreVersion},
                                 {"layout_hash", m_settings.layout_hash()},
                                 {"settings", m_settings}};
        if (m_dim.value()) header["embedding_dim"] = *m_dim.value();
        out += header.dump() + "\n";
        for (const auto& [id, b] : m_bundles) {
            nlohmann::json j = {{"image_id", b.image_id},
                                {"content_hash", b.content_hash},
                                {"source", b.source},
                                {"visual", visual_to_json(b.visual)},
                                {"semantic", b.semantic ? semantic_to_json(*b.semantic) : nlohmann::json()}};
            out += j.dump() + "\n";
        }
        write_file(path, out);
    }

    static FeatureStore load(const std::filesystem::path& path) {
        const auto lines = split_lines(read_file(path));
        if (lines.empty()) {
            throw Error(ErrorCode::Parse, path.string() + ": empty feature store");
        }
        try {
            const auto header = nlohmann::json::parse(lines[0]);
            if (header.value("format", "") != "storyline-features") {
                throw Error(ErrorCode::Parse, path.string() + ": not a feature store");
            }
            if (header.at("version").get<int>() != kFeatureStoreVersion) {
                throw Error(ErrorCode::VersionMismatch,
                            path.string() + ": unsupported feature store version " + header.at("version").dump());
            }
            FeatureStore store(header.at("settings").get<ExtractionSettings>());
            if (store.m_settings.layout_hash() != header.at("layout_hash").get<std::string>()) {
                throw Error(ErrorCode::LayoutMismatch, path.string() + ": layout hash does not match settings");
            }
            for (std::size_t i = 1; i < lines.size(); ++i) {
                if (is_blank(lines[i])) continue;
                const auto j = nlohmann::json::parse(lines[i]);
                FeatureBundle b;
                j.at("image_id").get_to(b.image_id);
                j.at("content_hash").get_to(b.content_hash);
                b.source = j.value("source", "");
                b.visual = visual_from_json(j.at("visual"));
                if (!j.at("semantic").is_null()) b.semantic = semantic_from_json(j.at("semantic"));
                store.add(std::move(b));
            }
            return store;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse, path.string() + ": malformed feature store: " + e.what());
        }
    }

  private:
    ExtractionSettings m_settings;
    std::map<std::string, FeatureBundle> m_bundles;
    std::map<std::string, std::string> m_by_content;
    EmbeddingDimension m_dim;
};

/// Decodes an image file and extracts its visual features, reusing cached
/// features when an identical file (same content hash) was seen before.
inline FeatureBundle extract_bundle(const std::string& image_id, const std::filesystem::path& image_path,
                                    const std::filesystem::path& sidecar_path, const FeatureStore* cache,
                                    EmbeddingDimension& dim, const ExtractionSettings& settings) {
    FeatureBundle b;
    b.image_id = image_id;
    b.source = image_path.string();
    const std::string bytes = read_file(image_path);
    b.content_hash = sha256_hex(bytes);
    const VisualFeatures* cached = nullptr;
    if (cache != nullptr && cache->settings() == settings) {
        cached = cache->find_by_content(b.content_hash);
    }
    b.visual = cached ? *cached : extract_visual_features(decode_image(bytes), settings);
    b.semantic = load_semantic_sidecar(sidecar_path, image_id, dim);
    return b;
}

}  // namespace storyline
