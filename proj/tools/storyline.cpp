#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "storyline/corpus.hpp"
#include "storyline/features.hpp"
#include "storyline/pipeline.hpp"
#include "storyline/retrieval.hpp"
#include "storyline/service.hpp"
#include "storyline/storygraph.hpp"
#include "storyline/synthetic.hpp"
#include "storyline/transition.hpp"

namespace fs = std::filesystem;
using namespace storyline;

namespace {

void write_or_print(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        write_file(out, text);
    }
}

ExtractionSettings settings_from(const std::string& path) {
    if (path.empty()) return {};
    try {
        return nlohmann::json::parse(read_file(path)).get<ExtractionSettings>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, path + ": " + e.what());
    }
}

std::vector<std::pair<Image, bool>> labeled_images(const fs::path& csv) {
    std::vector<std::pair<Image, bool>> out;
    const auto base = csv.parent_path();
    const auto lines = split_lines(read_file(csv));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_blank(lines[i]) || (i == 0 && lines[i].rfind("path", 0) == 0)) continue;
        const auto comma = lines[i].rfind(',');
        if (comma == std::string::npos) {
            throw Error(ErrorCode::Parse, csv.string() + ":" + std::to_string(i + 1) + ": expected path,label");
        }
        fs::path p = lines[i].substr(0, comma);
        if (p.is_relative()) p = base / p;
        const auto label = lines[i].substr(comma + 1);
        if (label != "0" && label != "1") {
            throw Error(ErrorCode::Parse, csv.string() + ":" + std::to_string(i + 1) + ": label must be 0 or 1");
        }
        out.emplace_back(load_image(p), label == "1");
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"storyline: illustrate news stories with cohesive image sequences"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a corpus and write it in canonical form");
    std::string ingest_in, ingest_out;
    ingest->add_option("--input", ingest_in, "corpus (JSON lines)")->required();
    ingest->add_option("--out", ingest_out, "canonical corpus")->required();

    // filter
    auto* filter = app.add_subcommand("filter", "drop retweets, spam, non-English text and non-photos");
    std::string filter_corpus, filter_out, filter_report, filter_model, filter_ocr;
    double filter_threshold = 0.5, filter_english = 0.25;
    bool filter_allow_textonly = false;
    filter->add_option("--corpus", filter_corpus)->required();
    filter->add_option("--out", filter_out, "kept documents")->required();
    filter->add_option("--report", filter_report, "rejection report (JSON)");
    filter->add_option("--photo-model", filter_model, "visual spam classifier");
    filter->add_option("--photo-threshold", filter_threshold);
    filter->add_option("--english-ratio", filter_english);
    filter->add_option("--ocr-command", filter_ocr, "command printing text found in an image");
    filter->add_flag("--allow-text-only", filter_allow_textonly, "keep documents without an image");

    // train-spam-classifier
    auto* spam = app.add_subcommand("train-spam-classifier", "train the photograph-vs-graphic classifier");
    std::string spam_examples, spam_out;
    std::size_t spam_synthetic = 0;
    double spam_lambda = 1.0;
    spam->add_option("--examples", spam_examples, "CSV of path,label (1 = photograph)");
    spam->add_option("--synthetic", spam_synthetic, "train on N generated examples per class instead");
    spam->add_option("--lambda", spam_lambda, "L1 penalty");
    spam->add_option("--out", spam_out)->required();

    // extract-features
    auto* extract = app.add_subcommand("extract-features", "compute visual and semantic feature bundles");
    std::string extract_corpus, extract_out, extract_cache, extract_settings;
    extract->add_option("--corpus", extract_corpus)->required();
    extract->add_option("--out", extract_out)->required();
    extract->add_option("--cache", extract_cache, "existing feature store to reuse by content hash");
    extract->add_option("--settings", extract_settings, "extraction settings (JSON)");

    // dedup
    auto* dedup = app.add_subcommand("dedup", "collapse near-duplicate images by pHash");
    std::string dedup_corpus, dedup_features, dedup_out, dedup_report;
    int dedup_threshold = 4;
    dedup->add_option("--corpus", dedup_corpus)->required();
    dedup->add_option("--features", dedup_features)->required();
    dedup->add_option("--out", dedup_out)->required();
    dedup->add_option("--threshold", dedup_threshold, "max Hamming distance");
    dedup->add_option("--report", dedup_report, "clusters (JSON)");

    // index
    auto* index = app.add_subcommand("index", "build the BM25 index");
    std::string index_corpus, index_out;
    index->add_option("--corpus", index_corpus)->required();
    index->add_option("--out", index_out)->required();

    // retrieve
    auto* retrieve = app.add_subcommand("retrieve", "candidate images per story segment");
    std::string retrieve_index, retrieve_story_path, retrieve_out;
    std::size_t retrieve_k = 10;
    retrieve->add_option("--index", retrieve_index)->required();
    retrieve->add_option("--story", retrieve_story_path)->required();
    retrieve->add_option("--k", retrieve_k);
    retrieve->add_option("--out", retrieve_out);

    // train-transitions
    auto* train = app.add_subcommand("train-transitions", "learn transition quality from rated pairs");
    std::string train_pairs, train_features, train_out;
    GbrtConfig gbrt;
    train->add_option("--pairs", train_pairs, "CSV image_a,image_b,rating")->required();
    train->add_option("--features", train_features)->required();
    train->add_option("--out", train_out)->required();
    train->add_option("--trees", gbrt.trees);
    train->add_option("--depth", gbrt.max_depth);
    train->add_option("--lr", gbrt.learning_rate);
    train->add_option("--min-leaf", gbrt.min_samples_leaf);
    train->add_option("--split", gbrt.train_fraction, "training fraction; 1 disables the held-out split");
    train->add_option("--seed", gbrt.seed);

    // solve
    auto* solve = app.add_subcommand("solve", "rank illustrated storylines");
    std::string solve_index, solve_model, solve_story_path, solve_features, solve_method = "all", solve_out;
    SolverConstraints solve_c;
    std::size_t solve_k = 10;
    std::uint64_t solve_budget = SolverOptions{}.node_budget;
    solve->add_option("--index", solve_index)->required();
    solve->add_option("--model", solve_model)->required();
    solve->add_option("--story", solve_story_path)->required();
    solve->add_option("--features", solve_features)->required();
    solve->add_option("--method", solve_method, "all|max-trans|max-trans-rel|max-cohesion|max-cohesion-rel");
    solve->add_option("--beta", solve_c.beta);
    solve->add_option("--gamma", solve_c.gamma);
    solve->add_option("--top-k", solve_c.top_k);
    solve->add_option("--k", solve_k, "candidates per segment");
    solve->add_option("--node-budget", solve_budget);
    solve->add_option("--out", solve_out);

    // serve
    auto* serve = app.add_subcommand("serve", "run the editor HTTP service");
    std::string serve_config, serve_host;
    int serve_port = 0;
    serve->add_option("--config", serve_config, "service config (JSON); STORYLINE_* variables override it");
    serve->add_option("--host", serve_host);
    serve->add_option("--port", serve_port);

    // export-votes
    auto* votes = app.add_subcommand("export-votes", "export editor votes as training pairs");
    std::string votes_db, votes_out;
    bool votes_raw = false;
    votes->add_option("--db", votes_db)->required();
    votes->add_option("--out", votes_out);
    votes->add_flag("--raw", votes_raw, "write individual votes instead of aggregated ratings");

    // demo
    auto* demo = app.add_subcommand("demo", "generate the synthetic corpus and run every stage on it");
    std::string demo_dir = "demo-out";
    DemoOptions demo_opt;
    demo->add_option("--out-dir", demo_dir);
    demo->add_option("--seed", demo_opt.corpus.seed);
    demo->add_option("--stories", demo_opt.corpus.stories);

    CLI11_PARSE(app, argc, argv);

    const WarningSink warn = stderr_warnings();
    try {
        if (*ingest) {
            const auto docs = load_corpus(ingest_in, warn);
            save_corpus(ingest_out, docs);
            std::cerr << docs.size() << " documents\n";
        } else if (*filter) {
            const auto docs = load_corpus(filter_corpus, warn);
            FilterOptions opt;
            opt.english_min_ratio = filter_english;
            opt.photo_threshold = filter_threshold;
            opt.require_image = !filter_allow_textonly;
            LogisticModel model;
            if (!filter_model.empty()) {
                model = load_logistic_model(filter_model);
                opt.photo_model = &model;
            }
            if (!filter_ocr.empty()) opt.ocr = external_ocr_hook(filter_ocr);
            const auto report = filter_documents(docs, opt);
            save_corpus(filter_out, kept_documents(docs, report));
            if (!filter_report.empty()) write_file(filter_report, filter_report_to_json(report).dump(2) + "\n");
            std::cerr << report.kept.size() << " kept, " << report.rejected.size() << " rejected\n";
        } else if (*spam) {
            std::vector<std::pair<Image, bool>> examples;
            if (spam_synthetic > 0) {
                examples = synthetic::photo_classifier_fixture(1, spam_synthetic);
            } else if (!spam_examples.empty()) {
                examples = labeled_images(spam_examples);
            } else {
                throw Error(ErrorCode::InvalidArgument, "give --examples or --synthetic");
            }
            LogisticTrainConfig cfg;
            cfg.l1_lambda = spam_lambda;
            const auto r = train_visual_spam_classifier(examples, cfg);
            save_logistic_model(r.model, spam_out);
            std::cerr << "cross-validated accuracy " << r.cv_accuracy << " (" << r.iterations << " iterations)\n";
        } else if (*extract) {
            const auto docs = load_corpus(extract_corpus, warn);
            std::optional<FeatureStore> cache;
            if (!extract_cache.empty() && fs::exists(extract_cache)) cache = FeatureStore::load(extract_cache);
            const auto store =
                extract_corpus_features(docs, settings_from(extract_settings), cache ? &*cache : nullptr, warn);
            store.save(extract_out);
            std::cerr << store.size() << " feature bundles\n";
        } else if (*dedup) {
            const auto docs = load_corpus(dedup_corpus, warn);
            const auto store = FeatureStore::load(dedup_features);
            std::vector<DuplicateCluster> clusters;
            const auto unique = drop_near_duplicates(docs, store, dedup_threshold, &clusters);
            save_corpus(dedup_out, unique);
            if (!dedup_report.empty()) {
                auto j = nlohmann::json::array();
                for (const auto& c : clusters) j.push_back({{"representative", c.representative}, {"members", c.members}});
                write_file(dedup_report, j.dump(2) + "\n");
            }
            std::cerr << clusters.size() << " duplicate clusters, " << unique.size() << " documents kept\n";
        } else if (*index) {
            const auto idx = build_index(load_corpus(index_corpus, warn));
            idx.save(index_out);
            std::cerr << idx.num_docs() << " documents indexed\n";
        } else if (*retrieve) {
            const auto idx = Index::load(retrieve_index);
            auto out = nlohmann::json::array();
            for (const auto& story : load_stories(retrieve_story_path)) {
                out.push_back({{"story", story_to_json(story)},
                               {"candidate_sets", candidate_sets_to_json(retrieve_story(idx, story, retrieve_k))}});
            }
            write_or_print(retrieve_out, out.dump(2) + "\n");
        } else if (*train) {
            const auto store = FeatureStore::load(train_features);
            const auto r = train_transition_model(training_examples(load_training_pairs(train_pairs), store), gbrt,
                                                  store.settings());
            save_model(r.model, train_out);
            std::cerr << "train MSE " << r.train_mse_per_stage.back();
            if (r.held_out) {
                std::cerr << "; held-out n=" << r.held_out->n_test << " MSE " << r.held_out->mse << " R^2 "
                          << r.held_out->r2 << " Spearman " << r.held_out->spearman;
            }
            std::cerr << "\n";
        } else if (*solve) {
            const auto idx = Index::load(solve_index);
            const auto store = FeatureStore::load(solve_features);
            const auto model = load_model(solve_model, store.settings().layout_hash());
            std::vector<Method> methods;
            if (solve_method == "all") {
                methods.assign(kAllMethods.begin(), kAllMethods.end());
            } else {
                methods.push_back(parse_method(solve_method));
            }
            SolverOptions opt;
            opt.node_budget = solve_budget;
            auto out = nlohmann::json::array();
            for (const auto& story : load_stories(solve_story_path)) {
                out.push_back(story_result_to_json(solve_story(idx, model, store, story, methods, solve_k, solve_c, opt)));
            }
            write_or_print(solve_out, out.dump(2) + "\n");
        } else if (*serve) {
            auto cfg = load_service_config(serve_config.empty() ? std::nullopt
                                                                : std::optional<fs::path>(serve_config));
            if (!serve_host.empty()) cfg.host = serve_host;
            if (serve_port != 0) cfg.port = serve_port;
            auto store = std::make_shared<const FeatureStore>(FeatureStore::load(cfg.features_path));
            auto model = std::make_shared<const TransitionModel>(load_model(cfg.model_path, store->settings().layout_hash()));
            auto idx = std::make_shared<const Index>(Index::load(cfg.index_path));
            StorylineService service(idx, model, store, cfg);
            httplib::Server server;
            install_routes(server, service);
            std::cerr << "listening on " << cfg.host << ":" << cfg.port << "\n";
            if (!server.listen(cfg.host, cfg.port)) {
                throw Error(ErrorCode::Io, "cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
            }
        } else if (*votes) {
            Database db(votes_db);
            const auto stored = StorylineService::read_votes(db, std::nullopt);
            if (votes_raw) {
                std::string csv = "image_a,image_b,annotator,vote\n";
                for (const auto& v : stored) {
                    csv += v.vote.pair.image_a + "," + v.vote.pair.image_b + "," + v.vote.annotator + "," +
                           std::to_string(v.vote.vote) + "\n";
                }
                write_or_print(votes_out, csv);
            } else {
                const auto pairs = StorylineService::training_pairs_from(stored);
                if (votes_out.empty() || votes_out == "-") {
                    std::cout << training_pairs_to_csv(pairs);
                } else {
                    save_training_pairs(votes_out, pairs);
                }
            }
        } else if (*demo) {
            demo_opt.warn = warn;
            const auto r = run_demo(demo_dir, demo_opt);
            std::cout << "documents        " << r.documents << "\n";
            std::cout << "kept / rejected  " << r.filter.kept.size() << " / " << r.filter.rejected.size() << "\n";
            for (const auto& [reason, n] : r.filter.counts()) std::cout << "  " << to_string(reason) << " " << n << "\n";
            std::cout << "duplicate groups " << r.duplicate_clusters.size() << "\n";
            std::cout << "indexed          " << r.indexed << "\n";
            std::cout << "photo model CV   " << r.photo_cv_accuracy << "\n";
            if (r.training.held_out) {
                std::cout << "transition R^2   " << r.training.held_out->r2 << " (Spearman "
                          << r.training.held_out->spearman << ")\n";
            }
            std::size_t sets = 0;
            for (const auto& s : r.stories) sets += s.storylines.size();
            std::cout << "storyline sets   " << sets << " over " << r.stories.size() << " stories in "
                      << r.solve_seconds << " s\n";
            std::cout << "artifacts in     " << demo_dir << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
