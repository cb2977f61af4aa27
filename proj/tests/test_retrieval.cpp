#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "scratch.hpp"
#include "storyline/retrieval.hpp"

using namespace storyline;

namespace {

Document text_doc(const std::string& id, const std::string& text) {
    Document d;
    d.id = id;
    d.text = text;
    return d;
}

// Token counts after stopword removal: d1 = 4, d2 = 5, d3 = 3.
std::vector<Document> toy() {
    return {text_doc("d1", "Flood water in the city harbor"),
            text_doc("d2", "flood rescue boats, flood streets"),
            text_doc("d3", "mayor press briefing")};
}

double score_of(const CandidateSet& s, const std::string& id) {
    for (const auto& c : s.candidates) {
        if (c.document_id == id) return c.raw_bm25;
    }
    return 0.0;
}

}  // namespace

TEST(Index, HandCountedStatistics) {
    const auto idx = build_index(toy());
    EXPECT_EQ(idx.num_docs(), 3u);
    EXPECT_EQ(idx.document_frequency("flood"), 2u);
    EXPECT_EQ(idx.document_frequency("water"), 1u);
    EXPECT_EQ(idx.document_frequency("the"), 0u);
    EXPECT_EQ(idx.document_frequency("mayor"), 1u);
    EXPECT_EQ(idx.length(*idx.doc_index("d1")), 4u);
    EXPECT_EQ(idx.length(*idx.doc_index("d2")), 5u);
    EXPECT_EQ(idx.length(*idx.doc_index("d3")), 3u);
    EXPECT_DOUBLE_EQ(idx.avgdl(), 4.0);
}

TEST(Index, ScoresMatchReferenceFormula) {
    const auto idx = build_index(toy());
    const auto flood = query(idx, "flood");
    ASSERT_EQ(flood.candidates.size(), 2u);
    EXPECT_NEAR(score_of(flood, "d1"), oracle::bm25(1, 4, 4, 3, 2), 1e-6);
    EXPECT_NEAR(score_of(flood, "d2"), oracle::bm25(2, 5, 4, 3, 2), 1e-6);
    EXPECT_EQ(flood.candidates.front().document_id, "d2");

    const auto two = query(idx, "flood water");
    EXPECT_NEAR(score_of(two, "d1"), oracle::bm25(1, 4, 4, 3, 2) + oracle::bm25(1, 4, 4, 3, 1), 1e-6);
    // Repeated query terms count once.
    EXPECT_NEAR(score_of(query(idx, "water water"), "d1"), oracle::bm25(1, 4, 4, 3, 1), 1e-12);
    EXPECT_EQ(flood.candidates.front().image_id, flood.candidates.front().document_id);
}

TEST(Index, AbsentTermAndEmptyDocument) {
    auto docs = toy();
    docs.push_back(text_doc("d4", ""));
    const auto idx = build_index(docs);
    EXPECT_EQ(idx.length(*idx.doc_index("d4")), 0u);
    EXPECT_TRUE(query(idx, "volcano").candidates.empty());
    for (const auto& q : {"flood", "water", "mayor press", "flood city harbor"}) {
        for (const auto& c : query(idx, q).candidates) EXPECT_NE(c.document_id, "d4");
    }
}

TEST(Index, TopKAndTies) {
    std::vector<Document> docs;
    for (int i = 0; i < 30; ++i) docs.push_back(text_doc("t" + std::to_string(100 + i), "parade"));
    const auto idx = build_index(docs);
    const auto r = query(idx, "parade", 10);
    ASSERT_EQ(r.candidates.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(r.candidates[i].document_id, "t" + std::to_string(100 + i));
}

TEST(Index, InputOrderDoesNotMatter) {
    auto docs = toy();
    std::reverse(docs.begin(), docs.end());
    const auto a = build_index(toy()), b = build_index(docs);
    EXPECT_EQ(a.to_json(), b.to_json());
    EXPECT_EQ(query(a, "flood city"), query(b, "flood city"));
}

TEST(Index, AvgdlOverride) {
    const auto idx = build_index(toy());
    Bm25Params p;
    p.avgdl_override = idx.avgdl();
    EXPECT_EQ(query(idx, "flood", 10, p), query(idx, "flood"));
    p.avgdl_override = 10.0;
    EXPECT_NEAR(score_of(query(idx, "flood", 10, p), "d2"), oracle::bm25(2, 5, 10, 3, 2), 1e-12);
}

TEST(Index, SaveLoadAndDuplicates) {
    const auto dir = scratch::dir("index");
    const auto idx = build_index(toy());
    idx.save(dir / "i.json");
    const auto back = Index::load(dir / "i.json");
    EXPECT_EQ(back.to_json(), idx.to_json());
    EXPECT_EQ(query(back, "flood water"), query(idx, "flood water"));

    auto docs = toy();
    docs.push_back(text_doc("d1", "again"));
    try {
        build_index(docs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
    }
    try {
        build_index({});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyCorpus);
    }
}

TEST(Relevance, Normalization) {
    std::vector<CandidateSet> sets(2);
    sets[0].candidates = {{"a", "a", 8.0, 0, 1}, {"b", "b", 4.0, 0, 1}};
    sets[1].candidates = {{"c", "c", 2.0, 0, 1}};
    auto scaled = sets;
    for (auto& s : scaled) {
        for (auto& c : s.candidates) c.raw_bm25 *= 7.0;
    }
    normalize_relevance(sets);
    normalize_relevance(scaled);
    EXPECT_EQ(sets[0].candidates[0].rel, 1.0);
    EXPECT_EQ(sets[0].candidates[0].relc, 0.0);
    EXPECT_EQ(sets[0].candidates[1].rel, 0.5);
    EXPECT_EQ(sets[1].candidates[0].rel, 0.25);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t k = 0; k < sets[i].candidates.size(); ++k) {
            EXPECT_DOUBLE_EQ(sets[i].candidates[k].rel, scaled[i].candidates[k].rel);
            EXPECT_EQ(sets[i].candidates[k].relc, 1.0 - sets[i].candidates[k].rel);
        }
    }
}

TEST(Relevance, StoryRetrieval) {
    const auto idx = build_index(toy());
    Story s;
    s.id = "s1";
    s.segments = {"flood water", "mayor press"};
    const auto sets = retrieve_story(idx, s, 10);
    ASSERT_EQ(sets.size(), 2u);
    EXPECT_EQ(sets[1].segment, 1u);
    double best = 0.0;
    for (const auto& set : sets) {
        for (const auto& c : set.candidates) best = std::max(best, c.rel);
    }
    EXPECT_EQ(best, 1.0);

    s.segments = {"flood", "volcano", "glacier"};
    try {
        retrieve_story(idx, s, 10);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoCandidates);
        EXPECT_EQ(e.segments(), (std::vector<std::size_t>{1, 2}));
    }
}

TEST(Stories, ParsingAndValidation) {
    const auto dir = scratch::dir("stories");
    scratch::write(dir / "s.jsonl",
                   "{\"id\":\"a\",\"segments\":[\"one\",\"two\"]}\n{\"id\":\"b\",\"segments\":[\"three\"]}\n");
    const auto stories = load_stories(dir / "s.jsonl");
    ASSERT_EQ(stories.size(), 2u);
    EXPECT_EQ(stories[0].segments.size(), 2u);
    EXPECT_THROW(story_from_json(nlohmann::json::parse(R"({"id":"x","segments":[]})")), Error);
    EXPECT_THROW(story_from_json(nlohmann::json::parse(R"({"id":"x","segments":["ok","  "]})")), Error);
    const auto j = story_to_json(stories[1]);
    EXPECT_EQ(story_from_json(j).segments, stories[1].segments);
}

TEST(CandidateSets, JsonRoundTrip) {
    const auto idx = build_index(toy());
    Story s;
    s.id = "s";
    s.segments = {"flood", "press"};
    const auto sets = retrieve_story(idx, s);
    EXPECT_EQ(candidate_sets_from_json(candidate_sets_to_json(sets)), sets);
}
