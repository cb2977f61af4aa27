#pragma once

// Deterministic synthetic fixtures: a tweet-like corpus with images and
// semantic sidecars, curated stories, and rated pairs with a known target.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyline/corpus.hpp"
#include "storyline/features.hpp"
#include "storyline/image.hpp"
#include "storyline/retrieval.hpp"
#include "storyline/transition.hpp"
#include "storyline/util.hpp"

namespace storyline::synthetic {

using Rgb = std::array<double, 3>;

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

/// Roughly bell-shaped noise in [-amp, amp].
inline double noise(std::mt19937_64& rng, double amp) {
    return amp * (unit_uniform(rng) + unit_uniform(rng) + unit_uniform(rng) - 1.5) / 1.5;
}

inline std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

/// Stays inside [15, 240] so grain never saturates into flat patches.
inline Rgb jitter(std::mt19937_64& rng, const Rgb& c, double amp) {
    Rgb out;
    for (int k = 0; k < 3; ++k) out[k] = std::clamp(c[k] + noise(rng, amp), 15.0, 240.0);
    return out;
}

/// Photo-like: a two-tone gradient with soft blobs and sensor-style noise.
inline Image photo_like_image(std::mt19937_64& rng, const Rgb& top, const Rgb& bottom, const Rgb& accent,
                              int width = 64, int height = 48) {
    Image img(width, height);
    struct Blob {
        double cx, cy, rx, ry;
        Rgb color;
    };
    std::vector<Blob> blobs;
    const std::size_t count = 2 + pick(rng, 3);
    for (std::size_t i = 0; i < count; ++i) {
        blobs.push_back({uniform(rng, 0, width), uniform(rng, 0, height), uniform(rng, 4, width / 3.0),
                         uniform(rng, 4, height / 3.0), jitter(rng, accent, 30)});
    }
    for (int y = 0; y < height; ++y) {
        const double t = static_cast<double>(y) / std::max(1, height - 1);
        for (int x = 0; x < width; ++x) {
            Rgb c;
            for (int k = 0; k < 3; ++k) c[k] = (1 - t) * top[k] + t * bottom[k];
            for (const auto& b : blobs) {
                const double dx = (x - b.cx) / b.rx;
                const double dy = (y - b.cy) / b.ry;
                const double w = std::exp(-(dx * dx + dy * dy));
                for (int k = 0; k < 3; ++k) c[k] = (1 - w) * c[k] + w * b.color[k];
            }
            const double grain = noise(rng, 10);
            img.set(x, y, clamp_byte(c[0] + grain + noise(rng, 6)), clamp_byte(c[1] + grain + noise(rng, 6)),
                    clamp_byte(c[2] + grain + noise(rng, 6)));
        }
    }
    return img;
}

/// Graphic / banner: flat fill, a few flat boxes and text-like bars.
inline Image graphic_image(std::mt19937_64& rng, int width = 64, int height = 48) {
    static const std::array<Rgb, 6> kFlat = {Rgb{255, 255, 255}, Rgb{0, 0, 0},     Rgb{220, 30, 40},
                                              Rgb{20, 60, 200},   Rgb{250, 210, 0}, Rgb{0, 150, 70}};
    const Rgb bg = kFlat[pick(rng, kFlat.size())];
    Image img(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) img.set(x, y, clamp_byte(bg[0]), clamp_byte(bg[1]), clamp_byte(bg[2]));
    }
    const std::size_t boxes = 1 + pick(rng, 3);
    for (std::size_t i = 0; i < boxes; ++i) {
        Rgb c = kFlat[pick(rng, kFlat.size())];
        const int x0 = static_cast<int>(pick(rng, width / 2));
        const int y0 = static_cast<int>(pick(rng, height / 2));
        const int x1 = x0 + 8 + static_cast<int>(pick(rng, width / 2));
        const int y1 = y0 + 4 + static_cast<int>(pick(rng, height / 2));
        for (int y = y0; y < std::min(y1, height); ++y) {
            for (int x = x0; x < std::min(x1, width); ++x) img.set(x, y, clamp_byte(c[0]), clamp_byte(c[1]), clamp_byte(c[2]));
        }
    }
    const Rgb ink = kFlat[pick(rng, kFlat.size())];
    for (int row = 4; row + 2 < height; row += 6) {
        if (pick(rng, 2) == 0) continue;
        const int len = 10 + static_cast<int>(pick(rng, width - 12));
        for (int y = row; y < row + 2; ++y) {
            for (int x = 2; x < std::min(len, width); ++x) {
                if ((x / 3) % 3 != 2) img.set(x, y, clamp_byte(ink[0]), clamp_byte(ink[1]), clamp_byte(ink[2]));
            }
        }
    }
    return img;
}

inline Image random_palette_photo(std::mt19937_64& rng, int width = 64, int height = 48) {
    auto color = [&] { return Rgb{uniform(rng, 20, 235), uniform(rng, 20, 235), uniform(rng, 20, 235)}; };
    const Rgb top = color();
    const Rgb bottom = color();
    const Rgb accent = color();
    return photo_like_image(rng, top, bottom, accent, width, height);
}

/// Labeled photo (true) / graphic (false) examples for the visual spam model.
inline std::vector<std::pair<Image, bool>> photo_classifier_fixture(std::uint64_t seed, std::size_t per_class) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<Image, bool>> out;
    for (std::size_t i = 0; i < per_class; ++i) {
        out.emplace_back(random_palette_photo(rng), true);
        out.emplace_back(graphic_image(rng), false);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus

inline const std::array<std::string_view, 28>& topic_words() {
    static const std::array<std::string_view, 28> words = {
        "wildfire",  "flood",      "marathon", "election",   "hurricane", "festival", "earthquake",
        "parade",    "strike",     "concert",  "summit",     "eclipse",   "regatta",  "harvest",
        "blizzard",  "carnival",   "tournament", "volcano",  "heatwave",  "pilgrimage", "launch",
        "derby",     "exhibition", "landslide", "olympics",  "vigil",     "wedding",  "drought",
    };
    return words;
}

inline const std::array<std::string_view, 40>& aspect_words() {
    static const std::array<std::string_view, 40> words = {
        "arrival",  "crowds",    "smoke",   "rescue",     "damage",   "aftermath", "speech",   "victory",
        "traffic",  "shelter",   "skyline", "harbor",     "stadium",  "bridge",    "museum",   "volunteers",
        "police",   "fireworks", "boats",   "fields",     "mountains", "streets",  "coast",    "river",
        "ceremony", "finish",    "podium",  "rain",       "snow",     "sunset",    "market",   "tents",
        "helicopters", "protesters", "music", "dancers",  "ruins",    "engines",   "trophy",   "flags",
    };
    return words;
}

inline const std::array<std::string_view, 24>& filler_words() {
    static const std::array<std::string_view, 24> words = {
        "people", "city",  "day",     "night",  "world",   "today", "new",   "great", "time",  "look",  "see", "home",
        "water",  "place", "morning", "family", "country", "life",  "first", "big",   "group", "hour",  "area", "team",
    };
    return words;
}

struct SyntheticOptions {
    std::uint64_t seed = 7;
    std::size_t stories = 28;
    std::size_t docs_per_segment = 9;
    std::size_t noise_docs = 20;
    std::size_t spam_docs = 80;
    std::size_t near_duplicates = 12;
    std::size_t embedding_dim = 16;
    double semantic_fraction = 0.9;
    int width = 64;
    int height = 48;
};

struct SyntheticCorpus {
    std::vector<Document> documents;  // image/sidecar paths relative to the fixture root
    std::vector<Story> stories;
    std::map<std::string, Image> images;                // by document id
    std::map<std::string, SemanticFeatures> sidecars;  // by document id
};

namespace detail {

struct SegmentTheme {
    std::string topic;
    std::vector<std::string> aspects;
    Rgb top, bottom, accent;
    std::vector<double> centroid;
};

inline std::string join_words(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) {
        if (!s.empty()) s += ' ';
        s += w;
    }
    return s;
}

}  // namespace detail

/// Builds the corpus in memory. Topic documents mix their story's topic word,
/// their segment's aspect words and common English filler; photos share a
/// per-segment palette so color-based transitions are learnable.
inline SyntheticCorpus generate_corpus(const SyntheticOptions& opt = {}) {
    std::mt19937_64 rng(opt.seed);
    SyntheticCorpus out;
    std::int64_t clock = 1'500'000'000;
    std::size_t serial = 0;
    auto next_id = [&] { return "t" + std::to_string(100000 + serial++); };
    auto filler = [&](std::size_t n) {
        std::vector<std::string> w;
        for (std::size_t i = 0; i < n; ++i) w.emplace_back(filler_words()[pick(rng, filler_words().size())]);
        return w;
    };
    auto add_doc = [&](Document d, std::optional<Image> img, std::optional<SemanticFeatures> sem) {
        d.timestamp = clock;
        clock += 37 + static_cast<std::int64_t>(pick(rng, 600));
        if (img) {
            d.image_path = "images/" + d.id + ".png";
            out.images.emplace(d.id, std::move(*img));
        }
        if (sem) {
            d.sidecar_path = "sidecars/" + d.id + ".jsonl";
            out.sidecars.emplace(d.id, std::move(*sem));
        }
        out.documents.push_back(std::move(d));
    };
    auto color = [&] { return Rgb{uniform(rng, 20, 235), uniform(rng, 20, 235), uniform(rng, 20, 235)}; };
    auto semantic_for = [&](const detail::SegmentTheme& th) {
        SemanticFeatures s;
        s.concepts.insert(th.topic);
        for (const auto& a : th.aspects) {
            if (pick(rng, 3) != 0) s.concepts.insert(a);
        }
        for (double c : th.centroid) s.dense_embedding.push_back(c + noise(rng, 0.3));
        s.environment = pick(rng, 5) == 0 ? Environment::Unknown
                                          : (th.top[2] > th.top[0] ? Environment::Outdoors : Environment::Indoors);
        s.scene_categories.insert(th.aspects.front());
        s.scene_attributes.insert(th.top[0] + th.top[1] + th.top[2] > 380 ? "bright" : "dark");
        if (pick(rng, 2) == 0) s.scene_attributes.insert("crowded");
        return s;
    };

    const auto& topics = topic_words();
    const auto& aspects = aspect_words();
    std::vector<std::vector<detail::SegmentTheme>> story_themes;
    for (std::size_t s = 0; s < opt.stories; ++s) {
        Story story;
        const std::string topic(topics[s % topics.size()]);
        story.id = "story-" + std::to_string(s + 1);
        story.topic = topic;
        const std::size_t n_seg = 3 + pick(rng, 2);
        std::vector<std::size_t> order(aspects.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        portable_shuffle(order, rng);
        const Rgb base_top = color();
        const Rgb base_bottom = color();
        std::vector<double> base_centroid;
        for (std::size_t k = 0; k < opt.embedding_dim; ++k) base_centroid.push_back(noise(rng, 1.0));
        std::vector<detail::SegmentTheme> themes;
        for (std::size_t j = 0; j < n_seg; ++j) {
            detail::SegmentTheme th;
            th.topic = topic;
            th.aspects = {std::string(aspects[order[2 * j]]), std::string(aspects[order[2 * j + 1]])};
            th.top = jitter(rng, base_top, 40);
            th.bottom = jitter(rng, base_bottom, 40);
            th.accent = color();
            for (double c : base_centroid) th.centroid.push_back(c + noise(rng, 0.5));
            story.segments.push_back("The " + topic + " " + th.aspects[0] + " and " + th.aspects[1] + " in the " +
                                     std::string(filler_words()[pick(rng, filler_words().size())]));
            themes.push_back(std::move(th));
        }
        out.stories.push_back(std::move(story));
        story_themes.push_back(std::move(themes));
    }

    // Topic documents, interleaved across stories so timestamps mix.
    for (std::size_t r = 0; r < opt.docs_per_segment; ++r) {
        for (const auto& themes : story_themes) {
            for (const auto& th : themes) {
                Document d;
                d.id = next_id();
                std::vector<std::string> words = filler(3 + pick(rng, 4));
                words.push_back(th.topic);
                if (pick(rng, 4) != 0) words.push_back(th.aspects[0]);
                if (pick(rng, 4) != 0) words.push_back(th.aspects[1]);
                if (pick(rng, 5) == 0) words.push_back(std::string(aspects[pick(rng, aspects.size())]));
                portable_shuffle(words, rng);
                d.text = detail::join_words(words);
                if (pick(rng, 3) == 0) {
                    d.text += " #" + th.topic;
                    d.hashtag_count = 1;
                }
                std::optional<SemanticFeatures> sem;
                if (unit_uniform(rng) < opt.semantic_fraction) sem = semantic_for(th);
                add_doc(std::move(d),
                        photo_like_image(rng, jitter(rng, th.top, 15), jitter(rng, th.bottom, 15), th.accent,
                                         opt.width, opt.height),
                        std::move(sem));
            }
        }
    }

    // Off-topic photos.
    for (std::size_t i = 0; i < opt.noise_docs; ++i) {
        Document d;
        d.id = next_id();
        d.text = detail::join_words(filler(6));
        add_doc(std::move(d), random_palette_photo(rng, opt.width, opt.height), std::nullopt);
    }

    // Near-duplicate reposts: same scene, slightly brighter.
    const std::size_t originals = out.documents.size();
    for (std::size_t i = 0; i < opt.near_duplicates && originals > 0; ++i) {
        const Document src = out.documents[pick(rng, originals)];
        if (src.image_path.empty()) continue;
        Document d = src;
        d.id = next_id();
        d.text = src.text + " again";
        d.sidecar_path.clear();
        Image img = out.images.at(src.id);
        for (auto& v : img.rgb) v = clamp_byte(v + 3.0);
        std::optional<SemanticFeatures> sem;
        if (auto it = out.sidecars.find(src.id); it != out.sidecars.end()) sem = it->second;
        add_doc(std::move(d), std::move(img), std::move(sem));
    }

    // Spam in every flavor the filter knows about.
    for (std::size_t i = 0; i < opt.spam_docs; ++i) {
        const auto& themes = story_themes[pick(rng, story_themes.size())];
        const auto& th = themes[pick(rng, themes.size())];
        Document d;
        d.id = next_id();
        std::vector<std::string> words = filler(4);
        words.push_back(th.topic);
        words.push_back(th.aspects[0]);
        d.text = detail::join_words(words);
        std::optional<Image> img = photo_like_image(rng, th.top, th.bottom, th.accent, opt.width, opt.height);
        switch (i % 7) {
        case 0: d.is_retweet = true; d.text = "RT " + d.text; break;
        case 1:
            d.hashtag_count = 4 + static_cast<std::int64_t>(pick(rng, 4));
            for (std::int64_t h = 0; h < d.hashtag_count; ++h) d.text += " #tag" + std::to_string(h);
            break;
        case 2:
            d.mention_count = 4 + static_cast<std::int64_t>(pick(rng, 3));
            for (std::int64_t m = 0; m < d.mention_count; ++m) d.text += " @user" + std::to_string(m);
            break;
        case 3:
            d.url_count = 3;
            for (int u = 0; u < 3; ++u) d.text += " https://example.com/" + std::to_string(u);
            break;
        case 4:
            d.text = "zorbla quenthi vashmor " + th.topic + " kelthu druvam pintosk";
            break;
        case 5: img = graphic_image(rng, opt.width, opt.height); break;
        case 6: img.reset(); break;
        }
        add_doc(std::move(d), std::move(img), std::nullopt);
    }
    return out;
}

/// Writes corpus.jsonl, stories.jsonl, images/ and sidecars/ under root.
inline void write_fixture(const SyntheticCorpus& c, const std::filesystem::path& root) {
    std::filesystem::create_directories(root / "images");
    std::filesystem::create_directories(root / "sidecars");
    for (const auto& [id, img] : c.images) write_png(root / "images" / (id + ".png"), img);
    for (const auto& [id, sem] : c.sidecars) {
        auto j = semantic_to_json(sem);
        j["image_id"] = id;
        write_file(root / "sidecars" / (id + ".jsonl"), j.dump() + "\n");
    }
    std::vector<Document> docs = c.documents;
    for (auto& d : docs) {
        if (!d.image_path.empty()) d.image_path = (root / d.image_path).string();
        if (!d.sidecar_path.empty()) d.sidecar_path = (root / d.sidecar_path).string();
    }
    save_corpus(root / "corpus.jsonl", docs);
    std::string stories;
    for (const auto& s : c.stories) stories += story_to_json(s).dump() + "\n";
    write_file(root / "stories.jsonl", stories);
}

/// In-memory bundles without touching disk (the content hash covers the raw
/// pixels).
inline FeatureStore bundles_for(const SyntheticCorpus& c, const ExtractionSettings& settings = {}) {
    FeatureStore store(settings);
    for (const auto& d : c.documents) {
        auto it = c.images.find(d.id);
        if (it == c.images.end()) continue;
        FeatureBundle b;
        b.image_id = d.id;
        b.content_hash = sha256_hex(std::string_view(reinterpret_cast<const char*>(it->second.rgb.data()),
                                                     it->second.rgb.size()));
        b.visual = extract_visual_features(it->second, settings);
        if (auto s = c.sidecars.find(d.id); s != c.sidecars.end()) b.semantic = s->second;
        store.add(std::move(b));
    }
    return store;
}

/// Rated pairs whose rating is a known monotone function of the color
/// histogram distance: clamp(1 - d / max d) over the sampled pairs.
inline std::vector<RatedPair> monotone_pairs(const FeatureStore& store, std::size_t count, std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& [id, b] : store.bundles()) ids.push_back(id);
    if (ids.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two bundles");
    std::mt19937_64 rng(seed);
    std::set<ImagePair> seen;
    std::vector<std::pair<ImagePair, double>> raw;
    const std::size_t max_pairs = ids.size() * (ids.size() - 1) / 2;
    while (raw.size() < std::min(count, max_pairs)) {
        const auto& a = ids[pick(rng, ids.size())];
        const auto& b = ids[pick(rng, ids.size())];
        if (a == b) continue;
        ImagePair p(a, b);
        if (!seen.insert(p).second) continue;
        raw.emplace_back(p, transition_distances(store.at(a), store.at(b))[1]);
    }
    double max_d = 0.0;
    for (const auto& [p, d] : raw) max_d = std::max(max_d, d);
    std::vector<RatedPair> out;
    for (const auto& [p, d] : raw) {
        out.push_back({p.image_a, p.image_b, std::clamp(1.0 - (max_d > 0 ? d / max_d : 0.0), 0.0, 1.0)});
    }
    return out;
}

}  // namespace storyline::synthetic
