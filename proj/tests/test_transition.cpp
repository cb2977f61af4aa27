#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "scratch.hpp"
#include "storyline/synthetic.hpp"
#include "storyline/transition.hpp"

using namespace storyline;

namespace {

FeatureBundle bundle_from(const Image& img, const std::string& id, std::optional<SemanticFeatures> sem = {}) {
    FeatureBundle b;
    b.image_id = id;
    b.visual = extract_visual_features(img);
    b.semantic = std::move(sem);
    return b;
}

SemanticFeatures semantic(std::set<std::string> concepts, Environment env, std::vector<double> emb = {1.0, 2.0}) {
    SemanticFeatures s;
    s.concepts = std::move(concepts);
    s.environment = env;
    s.dense_embedding = std::move(emb);
    s.scene_categories = {"street", "plaza"};
    s.scene_attributes = {"sunny"};
    return s;
}

DistanceVector random_vector(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 10.0);
    DistanceVector d;
    for (std::size_t i = 0; i < kDistanceDims; ++i) d[i] = u(rng);
    return d;
}

struct Fixture {
    FeatureStore store;
    std::vector<RatedPair> pairs;
};

const Fixture& monotone_fixture() {
    static const Fixture f = [] {
        Fixture x;
        x.store = synthetic::bundles_for(synthetic::generate_corpus());
        x.pairs = synthetic::monotone_pairs(x.store, 872, 9);
        return x;
    }();
    return f;
}

bool bits_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(Distances, SelfPair) {
    std::mt19937_64 rng(1);
    const auto b = bundle_from(synthetic::random_palette_photo(rng), "x",
                               semantic({"a", "b", "c"}, Environment::Outdoors));
    const auto d = transition_distances(b, b);
    for (std::size_t i = 0; i < kFirstSemanticDim; ++i) EXPECT_EQ(d[i], 0.0) << kDistanceNames[i];
    EXPECT_EQ(d[7], 3.0);
    EXPECT_EQ(d[8], 0.0);
    EXPECT_EQ(d[9], 1.0);
    EXPECT_EQ(d[10], 2.0);
    EXPECT_EQ(d[11], 1.0);
}

TEST(Distances, EnvironmentsAndConcepts) {
    std::mt19937_64 rng(2);
    const Image img = synthetic::random_palette_photo(rng);
    const auto a = bundle_from(img, "a", semantic({"a", "b", "c"}, Environment::Outdoors, {0.0, 0.0}));
    const auto b = bundle_from(img, "b", semantic({"b", "c", "d"}, Environment::Indoors, {3.0, 4.0}));
    const auto d = transition_distances(a, b);
    EXPECT_EQ(d[9], 0.0);
    EXPECT_EQ(d[7], 2.0);
    EXPECT_DOUBLE_EQ(d[8], 5.0);
    const auto u = bundle_from(img, "u", semantic({}, Environment::Unknown));
    EXPECT_EQ(transition_distances(u, u)[9], 0.0);
}

TEST(Distances, MissingSemanticsAreNaN) {
    std::mt19937_64 rng(3);
    const auto a = bundle_from(synthetic::random_palette_photo(rng), "a");
    const auto b = bundle_from(synthetic::random_palette_photo(rng), "b", semantic({"x"}, Environment::Indoors));
    const auto d = transition_distances(a, b);
    for (std::size_t i = kFirstSemanticDim; i < kDistanceDims; ++i) EXPECT_TRUE(std::isnan(d[i]));
    for (std::size_t i = 0; i < kFirstSemanticDim; ++i) EXPECT_GE(d[i], 0.0);
}

TEST(Distances, EmbeddingDimensionMismatch) {
    std::mt19937_64 rng(4);
    const Image img = synthetic::random_palette_photo(rng);
    const auto a = bundle_from(img, "a", semantic({}, Environment::Indoors, {1, 2, 3}));
    const auto b = bundle_from(img, "b", semantic({}, Environment::Indoors, {1, 2}));
    EXPECT_THROW(transition_distances(a, b), Error);
}

TEST(Distances, SymmetricBitExact) {
    const auto& f = monotone_fixture();
    std::vector<const FeatureBundle*> all;
    for (const auto& [id, b] : f.store.bundles()) all.push_back(&b);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto& a = *all[rng() % all.size()];
        const auto& b = *all[rng() % all.size()];
        EXPECT_EQ(transition_distances(a, b), transition_distances(b, a));
    }
}

TEST(Standardizer, ZeroVarianceAndTwoPoints) {
    std::vector<DistanceVector> rows(2);
    for (auto& r : rows) {
        for (std::size_t i = 0; i < kDistanceDims; ++i) r[i] = 3.0;
    }
    rows[0][1] = 0.0;
    rows[1][1] = 2.0;
    const auto s = fit_standardizer(rows);
    EXPECT_EQ(s.mean[1], 1.0);
    EXPECT_EQ(s.stddev[1], 1.0);
    EXPECT_EQ(s.transform(rows[0])[1], -1.0);
    EXPECT_EQ(s.transform(rows[1])[1], 1.0);
    EXPECT_EQ(s.stddev[0], Standardizer::kEpsilon);
    EXPECT_EQ(s.transform(rows[0])[0], 0.0);
    EXPECT_THROW(fit_standardizer({rows[0]}), Error);
}

TEST(Standardizer, RandomMatrixIsStandardized) {
    std::mt19937_64 rng(6);
    std::vector<DistanceVector> rows;
    for (int i = 0; i < 100; ++i) rows.push_back(random_vector(rng));
    const auto s = fit_standardizer(rows);
    for (std::size_t d = 0; d < kDistanceDims; ++d) {
        double sum = 0.0, sq = 0.0;
        for (const auto& r : rows) {
            const double z = s.transform(r)[d];
            sum += z;
            sq += z * z;
        }
        EXPECT_NEAR(sum / 100.0, 0.0, 1e-9);
        EXPECT_NEAR(std::sqrt(sq / 100.0), 1.0, 1e-9);
    }
}

TEST(Standardizer, NaNMapsToMean) {
    std::mt19937_64 rng(7);
    std::vector<DistanceVector> rows;
    for (int i = 0; i < 10; ++i) rows.push_back(random_vector(rng));
    rows[3][8] = std::numeric_limits<double>::quiet_NaN();
    const auto s = fit_standardizer(rows);
    double sum = 0.0;
    for (int i = 0; i < 10; ++i) {
        if (i != 3) sum += rows[static_cast<std::size_t>(i)][8];
    }
    EXPECT_NEAR(s.mean[8], sum / 9.0, 1e-12);
    EXPECT_EQ(s.transform(rows[3])[8], 0.0);
}

TEST(Gbrt, TwoPointClosedForm) {
    // Two distinct points repeated: each stage removes a (1 - lr) share of the
    // residual, so the remaining error is 0.5 * 0.9^100.
    std::vector<TrainingExample> data;
    for (int i = 0; i < 10; ++i) {
        TrainingExample e;
        e.distances[0] = i % 2 ? 5.0 : 1.0;
        e.rating = i % 2 ? 1.0 : 0.0;
        data.push_back(e);
    }
    GbrtConfig cfg;
    cfg.train_fraction = 1.0;
    const auto r = train_transition_model(data, cfg);
    const double residual = 0.5 * std::pow(0.9, 100);
    EXPECT_NEAR(r.model.predict(data[1].distances), 1.0 - residual, 1e-12);
    EXPECT_NEAR(r.model.predict(data[0].distances), residual, 1e-12);
    EXPECT_NEAR(r.train_mse_per_stage.back(), residual * residual, 1e-15);
    EXPECT_LE(r.train_mse_per_stage.back(), 1e-4);
    EXPECT_FALSE(r.held_out);
}

TEST(Gbrt, ConstantTarget) {
    std::mt19937_64 rng(8);
    std::vector<TrainingExample> data;
    for (int i = 0; i < 50; ++i) data.push_back({random_vector(rng), 0.7});
    const auto r = train_transition_model(data);
    for (int i = 0; i < 100; ++i) EXPECT_NEAR(r.model.predict(random_vector(rng)), 0.7, 1e-9);
}

TEST(Gbrt, MonotoneFixture) {
    const auto& f = monotone_fixture();
    ASSERT_EQ(f.pairs.size(), 872u);
    const auto r = train_transition_model(training_examples(f.pairs, f.store));
    ASSERT_TRUE(r.held_out);
    EXPECT_EQ(r.held_out->n_train, 610u);
    EXPECT_EQ(r.held_out->n_test, 262u);
    EXPECT_GE(r.held_out->r2, 0.8);
    EXPECT_GE(r.held_out->spearman, 0.9);
    ASSERT_EQ(r.train_mse_per_stage.size(), 101u);
    for (std::size_t i = 1; i < r.train_mse_per_stage.size(); ++i) {
        EXPECT_LE(r.train_mse_per_stage[i], r.train_mse_per_stage[i - 1] + 1e-15);
    }

    // Closest and farthest pairs by the target's own distance.
    std::size_t near = 0, far = 0;
    for (std::size_t i = 0; i < f.pairs.size(); ++i) {
        if (f.pairs[i].rating > f.pairs[near].rating) near = i;
        if (f.pairs[i].rating < f.pairs[far].rating) far = i;
    }
    const auto q = [&](const RatedPair& p) { return trans_quality(r.model, f.store.at(p.image_a), f.store.at(p.image_b)); };
    EXPECT_GT(q(f.pairs[near]), q(f.pairs[far]));
}

TEST(Gbrt, SymmetryClampAndComplement) {
    const auto& f = monotone_fixture();
    const auto r = train_transition_model(training_examples(f.pairs, f.store));
    std::vector<const FeatureBundle*> all;
    for (const auto& [id, b] : f.store.bundles()) all.push_back(&b);
    std::mt19937_64 rng(10);
    for (int i = 0; i < 200; ++i) {
        const auto& a = *all[rng() % all.size()];
        const auto& b = *all[rng() % all.size()];
        const double ab = trans_quality(r.model, a, b);
        EXPECT_TRUE(bits_equal(ab, trans_quality(r.model, b, a)));
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0);
        EXPECT_EQ(trans_q(r.model, a, b) + ab, 1.0);
    }
    // Out-of-range vectors still land in [0,1].
    for (int i = 0; i < 100; ++i) {
        DistanceVector d = random_vector(rng);
        for (std::size_t k = 0; k < kDistanceDims; ++k) d[k] *= (i % 2 ? 1e6 : -1e6);
        const double v = r.model.predict(d);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Gbrt, InvalidInput) {
    std::vector<TrainingExample> few(5);
    EXPECT_THROW(train_transition_model(few), Error);
    std::vector<TrainingExample> bad(20);
    bad[4].rating = 1.5;
    EXPECT_THROW(train_transition_model(bad), Error);
}

TEST(Persistence, RoundTripIsBitExact) {
    const auto dir = scratch::dir("transition-model");
    const auto& f = monotone_fixture();
    const auto r = train_transition_model(training_examples(f.pairs, f.store));
    save_model(r.model, dir / "m.json");
    const auto back = load_model(dir / "m.json", r.model.layout_hash());
    EXPECT_EQ(model_fingerprint(back), model_fingerprint(r.model));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        DistanceVector d;
        for (std::size_t k = 0; k < kDistanceDims; ++k) d[k] = u(rng) * (r.model.standardizer.mean[k] + 1.0);
        EXPECT_TRUE(bits_equal(back.predict(d), r.model.predict(d)));
    }
}

TEST(Persistence, Errors) {
    const auto dir = scratch::dir("transition-errors");
    std::mt19937_64 rng(12);
    std::vector<TrainingExample> data;
    for (int i = 0; i < 30; ++i) data.push_back({random_vector(rng), (i % 10) / 10.0});
    const auto model = train_transition_model(data).model;
    auto j = model_to_json(model);

    auto versioned = j;
    versioned["version"] = 2;
    scratch::write(dir / "v.json", versioned.dump());
    try {
        load_model(dir / "v.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::VersionMismatch);
    }

    ExtractionSettings other;
    other.correlogram_distances = {1, 3};
    try {
        save_model(model, dir / "m.json");
        load_model(dir / "m.json", other.layout_hash());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LayoutMismatch);
    }

    auto tampered = j;
    tampered["extraction"]["correlogram_l_bins"] = 8;
    scratch::write(dir / "t.json", tampered.dump());
    try {
        load_model(dir / "t.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LayoutMismatch);
    }

    scratch::write(dir / "g.json", "{\"format\":\"storyline-model\",");
    EXPECT_THROW(load_model(dir / "g.json"), Error);
}

TEST(Persistence, BundleLayoutIsChecked) {
    std::mt19937_64 rng(13);
    std::vector<TrainingExample> data;
    for (int i = 0; i < 30; ++i) data.push_back({random_vector(rng), (i % 10) / 10.0});
    const auto model = train_transition_model(data).model;
    ExtractionSettings coarse;
    coarse.hist_bins_per_channel = 8;
    FeatureBundle a;
    a.image_id = "coarse";
    a.visual = extract_visual_features(synthetic::random_palette_photo(rng), coarse);
    try {
        trans_quality(model, a, a);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LayoutMismatch);
        EXPECT_NE(std::string(e.what()).find("coarse"), std::string::npos);
    }
}

TEST(Metrics, RanksAndCorrelation) {
    EXPECT_EQ(average_ranks({10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
    EXPECT_NEAR(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-12);
    EXPECT_NEAR(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-12);
    EXPECT_NEAR(r_squared({1, 2, 3}, {1, 2, 3}), 1.0, 1e-12);
    EXPECT_NEAR(mean_squared_error({0, 2}, {1, 1}), 1.0, 1e-12);
}
