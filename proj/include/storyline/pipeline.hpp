#pragma once

// End-to-end steps shared by the CLI and the demo: filtering, feature
// extraction, dedup, training and per-story solving.

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyline/corpus.hpp"
#include "storyline/features.hpp"
#include "storyline/retrieval.hpp"
#include "storyline/storygraph.hpp"
#include "storyline/synthetic.hpp"
#include "storyline/transition.hpp"

namespace storyline {

inline nlohmann::json filter_report_to_json(const FilterReport& r) {
    auto rejected = nlohmann::json::array();
    for (const auto& x : r.rejected) rejected.push_back({{"id", x.id}, {"reason", to_string(x.reason)}});
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [reason, n] : r.counts()) counts[std::string(to_string(reason))] = n;
    return {{"kept", r.kept}, {"rejected", std::move(rejected)}, {"counts", std::move(counts)}};
}

/// Bundles for every document with an image. Documents whose image cannot be
/// read are reported through warn and skipped.
inline FeatureStore extract_corpus_features(const std::vector<Document>& docs, const ExtractionSettings& settings,
                                            const FeatureStore* cache = nullptr,
                                            const WarningSink& warn = stderr_warnings()) {
    FeatureStore store(settings);
    EmbeddingDimension dim;
    for (const auto& d : docs) {
        if (d.image_path.empty()) continue;
        try {
            store.add(extract_bundle(d.id, d.image_path, d.sidecar_path, cache, dim, settings));
        } catch (const Error& e) {
            if (e.code() == ErrorCode::DimensionMismatch) throw;
            warn(d.id + ": " + e.what());
        }
    }
    return store;
}

/// Drops near-duplicate images, keeping the earliest post of each cluster.
inline std::vector<Document> drop_near_duplicates(const std::vector<Document>& docs, const FeatureStore& store,
                                                  int hamming_threshold, std::vector<DuplicateCluster>* clusters = nullptr) {
    std::vector<HashedDocument> hashed;
    for (const auto& d : docs) {
        if (const auto* b = store.find(d.id)) hashed.push_back({d.id, d.timestamp, b->visual.phash});
    }
    auto found = dedup_near_duplicates(hashed, hamming_threshold);
    std::set<std::string> dropped;
    for (const auto& c : found) {
        for (const auto& m : c.members) {
            if (m != c.representative) dropped.insert(m);
        }
    }
    if (clusters != nullptr) {
        clusters->clear();
        for (auto& c : found) {
            if (c.members.size() > 1) clusters->push_back(std::move(c));
        }
    }
    std::vector<Document> out;
    for (const auto& d : docs) {
        if (!dropped.contains(d.id)) out.push_back(d);
    }
    return out;
}

struct StoryResult {
    Story story;
    std::vector<CandidateSet> candidate_sets;
    std::map<Method, std::vector<Storyline>> storylines;
};

inline StoryResult solve_story(const Index& index, const TransitionModel& model, const FeatureStore& store,
                               const Story& story, const std::vector<Method>& methods, std::size_t k,
                               const SolverConstraints& constraints, const SolverOptions& opt = {}) {
    StoryResult r;
    r.story = story;
    r.candidate_sets = retrieve_story(index, story, k);
    const CostTable table = build_cost_table(r.candidate_sets, model, store);
    for (auto m : methods) {
        r.storylines[m] = top_k_storylines(story.id, r.candidate_sets, table, m, constraints, opt);
    }
    return r;
}

inline nlohmann::json story_result_to_json(const StoryResult& r) {
    nlohmann::json methods = nlohmann::json::object();
    for (const auto& [m, lines] : r.storylines) {
        auto arr = nlohmann::json::array();
        for (const auto& l : lines) arr.push_back(storyline_to_json(l));
        methods[std::string(to_string(m))] = std::move(arr);
    }
    return {{"story", story_to_json(r.story)},
            {"candidate_sets", candidate_sets_to_json(r.candidate_sets)},
            {"methods", std::move(methods)}};
}

inline void save_rated_pairs(const std::filesystem::path& path, const std::vector<RatedPair>& pairs) {
    std::vector<AnnotatedPair> rows;
    for (const auto& p : pairs) rows.push_back({p.image_a, p.image_b, p.rating, 0, 0});
    save_training_pairs(path, rows);
}

// ---------------------------------------------------------------------------
// Demo

struct DemoOptions {
    synthetic::SyntheticOptions corpus;
    std::size_t photo_examples_per_class = 150;
    int dedup_threshold = 4;
    std::size_t training_pairs = 872;
    GbrtConfig gbrt;
    std::size_t k = 10;
    SolverConstraints constraints;  // beta 0.9, gamma 0.4, top_k 4
    WarningSink warn = [](const std::string&) {};
};

struct DemoResult {
    std::size_t documents = 0;
    FilterReport filter;
    std::vector<DuplicateCluster> duplicate_clusters;
    std::size_t indexed = 0;
    TransitionTrainReport training;
    double photo_cv_accuracy = 0.0;
    std::vector<StoryResult> stories;
    double solve_seconds = 0.0;
    double total_seconds = 0.0;
};

/// Generates the synthetic corpus under root and runs every stage on it,
/// writing each stage's artifact next to the corpus.
inline DemoResult run_demo(const std::filesystem::path& root, const DemoOptions& opt = {}) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    DemoResult res;

    synthetic::write_fixture(synthetic::generate_corpus(opt.corpus), root);
    const auto docs = load_corpus(root / "corpus.jsonl", opt.warn);
    res.documents = docs.size();
    const auto stories = load_stories(root / "stories.jsonl");

    const auto photo = train_visual_spam_classifier(
        synthetic::photo_classifier_fixture(opt.corpus.seed + 1, opt.photo_examples_per_class));
    res.photo_cv_accuracy = photo.cv_accuracy;
    save_logistic_model(photo.model, root / "photo-model.json");

    FilterOptions fopt;
    fopt.photo_model = &photo.model;
    res.filter = filter_documents(docs, fopt);
    write_file(root / "filter-report.json", filter_report_to_json(res.filter).dump(2) + "\n");
    const auto kept = kept_documents(docs, res.filter);

    const ExtractionSettings settings;
    const auto store = extract_corpus_features(kept, settings, nullptr, opt.warn);
    store.save(root / "features.jsonl");
    const auto unique = drop_near_duplicates(kept, store, opt.dedup_threshold, &res.duplicate_clusters);
    save_corpus(root / "corpus.clean.jsonl", unique);

    const auto index = build_index(unique);
    res.indexed = index.num_docs();
    index.save(root / "index.json");

    const auto pairs = synthetic::monotone_pairs(store, opt.training_pairs, opt.corpus.seed + 2);
    save_rated_pairs(root / "training-pairs.csv", pairs);
    res.training = train_transition_model(training_examples(pairs, store), opt.gbrt, settings);
    save_model(res.training.model, root / "transition-model.json");

    const auto solve_start = Clock::now();
    const std::vector<Method> methods(kAllMethods.begin(), kAllMethods.end());
    nlohmann::json report = nlohmann::json::array();
    for (const auto& story : stories) {
        res.stories.push_back(solve_story(index, res.training.model, store, story, methods, opt.k, opt.constraints));
        report.push_back(story_result_to_json(res.stories.back()));
    }
    res.solve_seconds = std::chrono::duration<double>(Clock::now() - solve_start).count();
    write_file(root / "storylines.json", report.dump(1) + "\n");
    res.total_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return res;
}

}  // namespace storyline
