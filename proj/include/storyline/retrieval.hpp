#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "storyline/corpus.hpp"
#include "storyline/error.hpp"
#include "storyline/text.hpp"
#include "storyline/util.hpp"

namespace storyline {

struct Story {
    std::string id;
    std::string topic;
    std::vector<std::string> segments;
};

inline Story story_from_json(const nlohmann::json& j) {
    Story s;
    try {
        s.id = j.at("id").get<std::string>();
        s.topic = j.value("topic", "");
        j.at("segments").get_to(s.segments);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed story: ") + e.what());
    }
    if (s.segments.empty()) {
        throw Error(ErrorCode::InvalidArgument, "story '" + s.id + "' has no segments");
    }
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
        if (is_blank(s.segments[i])) {
            throw Error(ErrorCode::InvalidArgument,
                        "story '" + s.id + "' segment " + std::to_string(i + 1) + " is empty");
        }
    }
    return s;
}

inline nlohmann::json story_to_json(const Story& s) {
    return {{"id", s.id}, {"topic", s.topic}, {"segments", s.segments}};
}

/// A story file is a single JSON story object, a JSON array of stories, or one
/// story object per line.
inline std::vector<Story> load_stories(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::vector<Story> out;
    nlohmann::json whole = nlohmann::json::parse(text, nullptr, false);
    if (!whole.is_discarded()) {
        if (whole.is_array()) {
            for (const auto& j : whole) out.push_back(story_from_json(j));
        } else {
            out.push_back(story_from_json(whole));
        }
        return out;
    }
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_blank(lines[i])) continue;
        try {
            out.push_back(story_from_json(nlohmann::json::parse(lines[i])));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

struct Candidate {
    std::string document_id;
    std::string image_id;
    double raw_bm25 = 0.0;
    double rel = 0.0;
    double relc = 1.0;

    bool operator==(const Candidate&) const = default;
};

struct CandidateSet {
    std::size_t segment = 0;
    std::vector<Candidate> candidates;

    bool operator==(const CandidateSet&) const = default;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    std::optional<double> avgdl_override;
};

/// Non-negative BM25 idf: ln(1 + (N - df + 0.5) / (df + 0.5)).
inline double bm25_idf(std::size_t num_docs, std::size_t df) {
    const double n = static_cast<double>(num_docs), d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
};

/// Immutable inverted index over document texts.
class Index {
  public:
    Index() = default;

    static Index build(const std::vector<Document>& docs) {
        if (docs.empty()) {
            throw Error(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
        }
        Index idx;
        std::vector<const Document*> sorted;
        for (const auto& d : docs) sorted.push_back(&d);
        // Document order is by id so that statistics and ties do not depend on
        // corpus order.
        std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
            if (sorted[i]->id == sorted[i + 1]->id) {
                throw Error(ErrorCode::DuplicateId, "duplicate document id " + sorted[i]->id);
            }
        }
        std::map<std::string, std::vector<Posting>> postings;
        std::uint64_t total = 0;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            const auto tokens = index_tokens(sorted[i]->text);
            std::map<std::string, std::uint32_t> tf;
            for (const auto& t : tokens) ++tf[t];
            for (const auto& [term, count] : tf) postings[term].push_back({static_cast<std::uint32_t>(i), count});
            idx.m_doc_ids.push_back(sorted[i]->id);
            idx.m_lengths.push_back(static_cast<std::uint32_t>(tokens.size()));
            total += tokens.size();
        }
        idx.m_postings.reserve(postings.size());
        for (auto& [term, list] : postings) idx.m_postings.emplace(term, std::move(list));
        idx.m_avgdl = static_cast<double>(total) / static_cast<double>(sorted.size());
        return idx;
    }

    std::size_t num_docs() const { return m_doc_ids.size(); }
    double avgdl() const { return m_avgdl; }
    const std::vector<std::string>& doc_ids() const { return m_doc_ids; }
    std::uint32_t length(std::size_t doc) const { return m_lengths[doc]; }

    std::size_t document_frequency(const std::string& term) const {
        auto it = m_postings.find(term);
        return it == m_postings.end() ? 0 : it->second.size();
    }

    const std::vector<Posting>* postings(const std::string& term) const {
        auto it = m_postings.find(term);
        return it == m_postings.end() ? nullptr : &it->second;
    }

    std::optional<std::size_t> doc_index(const std::string& id) const {
        auto it = std::lower_bound(m_doc_ids.begin(), m_doc_ids.end(), id);
        if (it == m_doc_ids.end() || *it != id) return std::nullopt;
        return static_cast<std::size_t>(it - m_doc_ids.begin());
    }

    /// BM25 score of every document with a positive score, keyed by doc index.
    std::vector<std::pair<std::size_t, double>> score(const std::string& text, const Bm25Params& p = {}) const {
        auto terms = index_tokens(text);
        std::sort(terms.begin(), terms.end());
        terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
        const double avgdl = p.avgdl_override.value_or(m_avgdl > 0 ? m_avgdl : 1.0);
        std::vector<double> acc(num_docs(), 0.0);
        for (const auto& t : terms) {
            const auto* list = postings(t);
            if (list == nullptr) continue;
            const double idf = bm25_idf(num_docs(), list->size());
            for (const auto& post : *list) {
                const double tf = post.tf;
                const double norm = p.k1 * (1.0 - p.b + p.b * m_lengths[post.doc] / avgdl);
                acc[post.doc] += idf * tf * (p.k1 + 1.0) / (tf + norm);
            }
        }
        std::vector<std::pair<std::size_t, double>> out;
        for (std::size_t i = 0; i < acc.size(); ++i) {
            if (acc[i] > 0.0) out.emplace_back(i, acc[i]);
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json terms = nlohmann::json::object();
        std::vector<const std::string*> keys;
        for (const auto& [term, list] : m_postings) keys.push_back(&term);
        std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a < *b; });
        for (const auto* k : keys) {
            auto arr = nlohmann::json::array();
            for (const auto& post : m_postings.at(*k)) arr.push_back({post.doc, post.tf});
            terms[*k] = std::move(arr);
        }
        return {{"format", "storyline-index"}, {"version", 1}, {"wordlist_version", kWordListVersion},
                {"doc_ids", m_doc_ids},       {"lengths", m_lengths}, {"avgdl", m_avgdl},
                {"postings", std::move(terms)}};
    }

    static Index from_json(const nlohmann::json& j) {
        if (j.value("format", "") != "storyline-index") {
            throw Error(ErrorCode::Parse, "not an index file");
        }
        if (j.value("version", 0) != 1 || j.value("wordlist_version", 0) != kWordListVersion) {
            throw Error(ErrorCode::VersionMismatch, "index version or stopword list version mismatch");
        }
        Index idx;
        j.at("doc_ids").get_to(idx.m_doc_ids);
        j.at("lengths").get_to(idx.m_lengths);
        j.at("avgdl").get_to(idx.m_avgdl);
        if (idx.m_doc_ids.size() != idx.m_lengths.size()) {
            throw Error(ErrorCode::Parse, "index doc/length arrays differ in size");
        }
        for (const auto& [term, arr] : j.at("postings").items()) {
            std::vector<Posting> list;
            for (const auto& p : arr) {
                Posting post{p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()};
                if (post.doc >= idx.m_doc_ids.size()) throw Error(ErrorCode::Parse, "posting out of range");
                list.push_back(post);
            }
            idx.m_postings.emplace(term, std::move(list));
        }
        return idx;
    }

    void save(const std::filesystem::path& path) const { write_file(path, to_json().dump()); }

    static Index load(const std::filesystem::path& path) {
        try {
            return from_json(nlohmann::json::parse(read_file(path)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse, path.string() + ": malformed index: " + e.what());
        }
    }

  private:
    std::vector<std::string> m_doc_ids;  // sorted
    std::vector<std::uint32_t> m_lengths;
    std::unordered_map<std::string, std::vector<Posting>> m_postings;
    double m_avgdl = 0.0;
};

inline Index build_index(const std::vector<Document>& docs) { return Index::build(docs); }

/// Top-k documents by BM25, ties by document id; zero scores excluded.
inline CandidateSet query(const Index& index, const std::string& segment_text, std::size_t k = 10,
                          const Bm25Params& params = {}, std::size_t segment = 0) {
    auto scored = index.score(segment_text, params);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;  // doc ids are sorted, so index order is id order
    });
    CandidateSet set;
    set.segment = segment;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) {
        const auto& id = index.doc_ids()[scored[i].first];
        set.candidates.push_back({id, id, scored[i].second, 0.0, 1.0});
    }
    return set;
}

/// rel = raw / max raw over all candidates of the story; relC = 1 - rel.
inline void normalize_relevance(std::vector<CandidateSet>& sets) {
    double max_raw = 0.0;
    for (const auto& s : sets) {
        for (const auto& c : s.candidates) max_raw = std::max(max_raw, c.raw_bm25);
    }
    if (!(max_raw > 0.0)) {
        throw Error(ErrorCode::NoCandidates, "story cannot be illustrated: no candidate has a positive score");
    }
    for (auto& s : sets) {
        for (auto& c : s.candidates) {
            c.rel = c.raw_bm25 / max_raw;
            c.relc = 1.0 - c.rel;
        }
    }
}

/// Retrieves and normalizes candidates for every segment of a story.
inline std::vector<CandidateSet> retrieve_story(const Index& index, const Story& story, std::size_t k = 10,
                                                const Bm25Params& params = {}) {
    std::vector<CandidateSet> sets;
    std::vector<std::size_t> empty;
    for (std::size_t i = 0; i < story.segments.size(); ++i) {
        sets.push_back(query(index, story.segments[i], k, params, i));
        if (sets.back().candidates.empty()) empty.push_back(i);
    }
    if (!empty.empty()) {
        std::string msg = "story '" + story.id + "' has segments with no candidates:";
        for (auto i : empty) msg += " " + std::to_string(i);
        throw Error(ErrorCode::NoCandidates, msg, empty);
    }
    normalize_relevance(sets);
    return sets;
}

inline nlohmann::json candidate_sets_to_json(const std::vector<CandidateSet>& sets) {
    auto arr = nlohmann::json::array();
    for (const auto& s : sets) {
        auto cands = nlohmann::json::array();
        for (const auto& c : s.candidates) {
            cands.push_back({{"document_id", c.document_id},
                             {"image_id", c.image_id},
                             {"raw_bm25", c.raw_bm25},
                             {"rel", c.rel},
                             {"relc", c.relc}});
        }
        arr.push_back({{"segment", s.segment}, {"candidates", std::move(cands)}});
    }
    return arr;
}

inline std::vector<CandidateSet> candidate_sets_from_json(const nlohmann::json& j) {
    std::vector<CandidateSet> out;
    for (const auto& sj : j) {
        CandidateSet s;
        sj.at("segment").get_to(s.segment);
        for (const auto& cj : sj.at("candidates")) {
            Candidate c;
            cj.at("document_id").get_to(c.document_id);
            cj.at("image_id").get_to(c.image_id);
            cj.at("raw_bm25").get_to(c.raw_bm25);
            cj.at("rel").get_to(c.rel);
            cj.at("relc").get_to(c.relc);
            s.candidates.push_back(std::move(c));
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace storyline
