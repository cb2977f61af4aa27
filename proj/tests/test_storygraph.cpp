#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "storyline/storygraph.hpp"

using namespace storyline;

namespace {

std::vector<CandidateSet> sets_for(const oracle::Instance& inst) {
    std::vector<CandidateSet> sets;
    for (std::size_t i = 0; i < inst.sizes.size(); ++i) {
        CandidateSet s;
        s.segment = i;
        for (std::size_t a = 0; a < inst.sizes[i]; ++a) {
            const std::string id = "s" + std::to_string(i) + "c" + std::to_string(a);
            s.candidates.push_back({id, id, 1.0, 1.0 - inst.relc[i][a], inst.relc[i][a]});
        }
        sets.push_back(std::move(s));
    }
    return sets;
}

const SolverParams kDefaults{0.9, 0.4};

// Forces branch-and-bound on clique methods.
const SolverOptions kBranchAndBound{0, 50'000'000};

}  // namespace

TEST(PairCost, RelevanceWeightedValues) {
    EXPECT_NEAR(pair_cost_rel(0.5, 0.5, 0.2, 0.4), 0.78, 1e-12);
    EXPECT_EQ(pair_cost_rel(0.0, 0.0, 0.0, 0.4), 0.0);
    for (double g : {0.0, 0.3, 1.0}) EXPECT_DOUBLE_EQ(pair_cost_rel(1.0, 1.0, 1.0, g), 2.0);
    EXPECT_THROW(pair_cost_rel(0.5, 0.5, 0.5, 1.5), Error);
    EXPECT_THROW(pair_cost_rel(0.5, 0.5, 0.5, -0.1), Error);
    EXPECT_EQ(pair_cost_plain(0.37), 0.37);
}

TEST(MaxTransitions, TwoByTwoExample) {
    CostTable t({2, 2});
    t.set_trans_q(0, 0, 1, 0, 0.9);
    t.set_trans_q(0, 0, 1, 1, 0.1);
    t.set_trans_q(0, 1, 1, 0, 0.5);
    t.set_trans_q(0, 1, 1, 1, 0.7);
    const auto best = solve_max_transitions(t);
    EXPECT_EQ(best.selection, (Selection{0, 1}));
    EXPECT_NEAR(best.objective(), 0.1, 1e-12);
}

TEST(MaxTransitions, EqualCostsBreakTiesByLowestIndex) {
    CostTable t({3, 3, 3, 3});
    for (std::size_t i = 0; i + 1 < 4; ++i) {
        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = 0; b < 3; ++b) t.set_trans_q(i, a, i + 1, b, 0.25);
        }
    }
    const auto best = solve_max_transitions(t);
    EXPECT_EQ(best.selection, (Selection{0, 0, 0, 0}));
    EXPECT_NEAR(best.objective(), 3 * 0.25, 1e-12);
    const auto clique = solve_max_cohesion(t);
    EXPECT_EQ(clique.selection, (Selection{0, 0, 0, 0}));
}

TEST(MaxTransitions, SingleSegmentReturnsMostRelevant) {
    CostTable t({4});
    const double relc[] = {0.6, 0.2, 0.9, 0.2};
    for (std::size_t a = 0; a < 4; ++a) t.set_relc(0, a, relc[a]);
    EXPECT_EQ(solve_max_transitions(t).selection, (Selection{1}));
    EXPECT_EQ(solve_max_cohesion(t).selection, (Selection{1}));
    EXPECT_EQ(solve_max_transitions_rel(t).selection, (Selection{1}));
    EXPECT_NEAR(solve_max_transitions_rel(t).objective(), 0.1 * 0.2, 1e-12);
}

TEST(Solvers, MatchBruteForce) {
    std::mt19937_64 rng(11);
    const std::vector<std::pair<std::size_t, std::size_t>> shapes = {{4, 6}, {3, 4}, {3, 2}, {4, 5}, {2, 3}, {1, 3}};
    for (const auto& [n, k] : shapes) {
        for (int rep = 0; rep < 5; ++rep) {
            const auto inst = oracle::random_instance(rng, n, k);
            const auto table = inst.table();
            for (auto m : kAllMethods) {
                const auto ranked = oracle::enumerate(m, inst, 0.9, 0.4);
                for (const auto& opt : {SolverOptions{}, kBranchAndBound}) {
                    const auto got = solve_best(m, table, kDefaults, opt);
                    EXPECT_NEAR(got.objective(), ranked.front().objective, 1e-9) << to_string(m) << " n=" << n;
                    EXPECT_NEAR(oracle::objective(m, inst, got.selection, 0.9, 0.4), got.objective(), 1e-12);
                }
            }
        }
    }
}

TEST(Solvers, TopKMatchesEnumerationInOrder) {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 2 + rep % 3, k = 2 + rep % 4;
        auto inst = oracle::random_instance(rng, n, k);
        const auto table = inst.table();
        for (auto m : kAllMethods) {
            const auto ranked = oracle::enumerate(m, inst, 0.9, 0.4);
            for (const auto& opt : {SolverOptions{}, kBranchAndBound}) {
                const auto got = solve_top_k(m, table, full_domains(table), kDefaults, 5, opt);
                ASSERT_EQ(got.size(), std::min<std::size_t>(5, ranked.size()));
                for (std::size_t r = 0; r < got.size(); ++r) {
                    EXPECT_EQ(got[r].selection, ranked[r].selection) << to_string(m) << " rank " << r;
                    EXPECT_NEAR(got[r].objective(), ranked[r].objective, 1e-9);
                }
            }
        }
    }
}

TEST(Solvers, TopKLargerThanSpaceReturnsEverything) {
    std::mt19937_64 rng(13);
    const auto inst = oracle::random_instance(rng, 2, 2);
    const auto table = inst.table();
    for (auto m : kAllMethods) {
        EXPECT_EQ(solve_top_k(m, table, full_domains(table), kDefaults, 10).size(), 4u);
        EXPECT_TRUE(solve_top_k(m, table, full_domains(table), kDefaults, 0).empty());
    }
}

TEST(Solvers, TopOneEqualsSingleSolver) {
    std::mt19937_64 rng(14);
    const auto inst = oracle::random_instance(rng, 3, 4);
    const auto table = inst.table();
    for (auto m : kAllMethods) {
        const auto one = solve_top_k(m, table, full_domains(table), kDefaults, 1);
        EXPECT_EQ(one.front().selection, solve_best(m, table, kDefaults).selection);
    }
}

TEST(Solvers, BetaExtremes) {
    std::mt19937_64 rng(15);
    const auto inst = oracle::random_instance(rng, 3, 4);
    const auto table = inst.table();
    // beta = 0: only the first segment's relevance matters.
    const double min_relc = *std::min_element(inst.relc[0].begin(), inst.relc[0].end());
    EXPECT_NEAR(solve_max_transitions_rel(table, 0.0, 0.4).objective(), min_relc, 1e-12);
    EXPECT_NEAR(solve_max_cohesion_rel(table, 0.0, 0.4).objective(), min_relc, 1e-12);
    // beta = 1: the relevance-weighted path divided by 2(N-1).
    double best = 1e9;
    for (const auto& r : oracle::enumerate(Method::MaxTransitionsRel, inst, 1.0, 0.4)) best = std::min(best, r.objective);
    EXPECT_NEAR(solve_max_transitions_rel(table, 1.0, 0.4).objective(), best, 1e-12);
}

TEST(Solvers, OneCandidatePerSegmentIsForced) {
    std::mt19937_64 rng(16);
    const auto inst = oracle::random_instance(rng, 4, 1);
    const auto r = solve_max_cohesion(inst.table());
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) sum += inst.trans(i, 0, j, 0);
    }
    EXPECT_NEAR(r.objective(), sum, 1e-12);
    EXPECT_EQ(r.breakdown.edges.size(), 6u);
}

TEST(Solvers, InvalidInputs) {
    CostTable t({2, 2});
    EXPECT_THROW(solve_top_k(Method::MaxTransitions, t, {{0, 1}}, kDefaults, 1), Error);
    try {
        solve_top_k(Method::MaxCohesion, t, {{0, 1}, {}}, kDefaults, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptySegment);
        EXPECT_EQ(e.segments(), std::vector<std::size_t>{1});
    }
    EXPECT_THROW(solve_top_k(Method::MaxTransitionsRel, t, full_domains(t), {0.9, 2.0}, 1), Error);
    EXPECT_THROW(solve_top_k(Method::MaxTransitionsRel, t, full_domains(t), {-1.0, 0.4}, 1), Error);
}

TEST(Solvers, NodeBudgetIsReported) {
    std::mt19937_64 rng(17);
    const auto inst = oracle::random_instance(rng, 4, 6);
    try {
        solve_best(Method::MaxCohesion, inst.table(), kDefaults, {0, 3});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SolverBudget);
    }
}

TEST(Constraints, PinsAndExclusions) {
    std::mt19937_64 rng(18);
    const auto inst = oracle::random_instance(rng, 3, 4);
    const auto sets = sets_for(inst);
    const auto table = inst.table();
    SolverConstraints c;
    c.top_k = 5;
    c.pins[2] = "s2c3";
    for (auto m : kAllMethods) {
        for (const auto& line : top_k_storylines("st", sets, table, m, c)) {
            EXPECT_EQ(line.chosen[2].image_id, "s2c3");
        }
    }
    SolverConstraints ex;
    ex.exclusions = {"s0c0", "s1c2"};
    for (auto m : kAllMethods) {
        for (const auto& line : top_k_storylines("st", sets, table, m, ex)) {
            for (const auto& ch : line.chosen) EXPECT_FALSE(ex.exclusions.contains(ch.image_id));
        }
    }
}

TEST(Constraints, Errors) {
    std::mt19937_64 rng(19);
    const auto sets = sets_for(oracle::random_instance(rng, 3, 2));
    auto code_of = [&](const SolverConstraints& c) {
        try {
            resolve_domains(sets, c);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;
    };
    SolverConstraints absent;
    absent.pins[1] = "s0c0";
    EXPECT_EQ(code_of(absent), ErrorCode::InvalidPin);
    SolverConstraints both;
    both.pins[1] = "s1c0";
    both.exclusions = {"s1c0"};
    EXPECT_EQ(code_of(both), ErrorCode::InvalidPin);
    SolverConstraints out_of_range;
    out_of_range.pins[3] = "s1c0";
    EXPECT_EQ(code_of(out_of_range), ErrorCode::InvalidPin);
    SolverConstraints emptied;
    emptied.exclusions = {"s2c0", "s2c1"};
    EXPECT_EQ(code_of(emptied), ErrorCode::EmptySegment);
    try {
        resolve_domains(sets, emptied);
    } catch (const Error& e) {
        EXPECT_EQ(e.segments(), std::vector<std::size_t>{2});
    }
    SolverConstraints zero;
    zero.top_k = 0;
    EXPECT_EQ(code_of(zero), ErrorCode::InvalidArgument);
}

TEST(Properties, ExclusionNeverImproves) {
    std::mt19937_64 rng(20);
    for (int rep = 0; rep < 20; ++rep) {
        const auto inst = oracle::random_instance(rng, 3, 4);
        const auto sets = sets_for(inst);
        const auto table = inst.table();
        for (auto m : kAllMethods) {
            const auto base = top_k_storylines("st", sets, table, m, SolverConstraints{}).front();
            // Exclude a candidate that is not part of the optimum.
            SolverConstraints c;
            for (const auto& s : sets) {
                for (const auto& cand : s.candidates) {
                    if (cand.image_id != base.chosen[s.segment].image_id) {
                        c.exclusions.insert(cand.image_id);
                        break;
                    }
                }
                if (!c.exclusions.empty()) break;
            }
            const auto after = top_k_storylines("st", sets, table, m, c).front();
            EXPECT_GE(after.objective, base.objective - 1e-12);
        }
    }
}

TEST(Properties, PinningTheOptimumKeepsItsObjective) {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const auto inst = oracle::random_instance(rng, 4, 3);
        const auto sets = sets_for(inst);
        const auto table = inst.table();
        for (auto m : kAllMethods) {
            const auto base = top_k_storylines("st", sets, table, m, SolverConstraints{}).front();
            SolverConstraints c;
            const std::size_t seg = static_cast<std::size_t>(rep) % 4;
            c.pins[seg] = base.chosen[seg].image_id;
            EXPECT_NEAR(top_k_storylines("st", sets, table, m, c).front().objective, base.objective, 1e-12);
        }
    }
}

TEST(Properties, ObjectiveBounds) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 2 + rep % 3;
        const auto inst = oracle::random_instance(rng, n, 3);
        const auto table = inst.table();
        const SolverParams p{u(rng), u(rng)};
        const auto plain = solve_best(Method::MaxTransitions, table, p);
        EXPECT_GE(plain.objective(), 0.0);
        EXPECT_LE(plain.objective(), static_cast<double>(n - 1));
        // Every selection, not only the optimum, stays in range.
        for (const auto& r : oracle::enumerate(Method::MaxTransitionsRel, inst, p.beta, p.gamma)) {
            const double v = evaluate_selection(Method::MaxTransitionsRel, table, r.selection, p).objective;
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Properties, ReversingSegmentsForCliques) {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 3 + rep % 2;
        const auto inst = oracle::random_instance(rng, n, 4);
        oracle::Instance rev = inst;
        std::reverse(rev.relc.begin(), rev.relc.end());
        rev.tq.clear();
        for (const auto& [ij, m] : inst.tq) {
            // Segment i becomes n-1-i; keep the smaller index first.
            const std::size_t a = n - 1 - ij.second, b = n - 1 - ij.first;
            std::vector<std::vector<double>> mt(4, std::vector<double>(4));
            for (std::size_t x = 0; x < 4; ++x) {
                for (std::size_t y = 0; y < 4; ++y) mt[y][x] = m[x][y];
            }
            rev.tq[{a, b}] = mt;
        }
        const auto t = inst.table(), tr = rev.table();
        EXPECT_NEAR(solve_max_cohesion(t).objective(), solve_max_cohesion(tr).objective(), 1e-12);
        // The relevance clique changes only through relC(v1).
        const SolverParams p = kDefaults;
        Selection sel(n);
        for (std::size_t i = 0; i < n; ++i) sel[i] = (i * 7 + rep) % 4;
        Selection rsel(sel.rbegin(), sel.rend());
        const double a = evaluate_selection(Method::MaxCohesionRel, t, sel, p).objective;
        const double b = evaluate_selection(Method::MaxCohesionRel, tr, rsel, p).objective;
        EXPECT_NEAR(b - a, (1.0 - p.beta) * (inst.relc[n - 1][sel[n - 1]] - inst.relc[0][sel[0]]), 1e-12);
    }
}

TEST(Properties, CliqueDominatesChainOnSameSelection) {
    std::mt19937_64 rng(24);
    for (int rep = 0; rep < 30; ++rep) {
        const auto inst = oracle::random_instance(rng, 4, 3);
        const auto t = inst.table();
        const auto clique = solve_max_cohesion(t);
        EXPECT_GE(clique.objective(),
                  evaluate_selection(Method::MaxTransitions, t, clique.selection, {}).objective - 1e-12);
    }
}

TEST(Explain, TotalsAndEdgeCounts) {
    std::mt19937_64 rng(25);
    const auto inst = oracle::random_instance(rng, 4, 3);
    const auto sets = sets_for(inst);
    const auto table = inst.table();
    SolverConstraints c;
    for (auto m : kAllMethods) {
        for (const auto& line : top_k_storylines("st", sets, table, m, c)) {
            const auto e = explain_storyline(line);
            EXPECT_NEAR(e.total, line.objective, 1e-9);
            EXPECT_EQ(e.edge_terms, is_chain(m) ? 3u : 6u);
            EXPECT_NE(e.text.find("objective"), std::string::npos);
            EXPECT_EQ(line.chosen.size(), 4u);
        }
    }
}

TEST(Storylines, JsonCarriesConfigForRelevanceMethods) {
    std::mt19937_64 rng(26);
    const auto inst = oracle::random_instance(rng, 2, 2);
    const auto sets = sets_for(inst);
    const auto table = inst.table();
    const auto rel = top_k_storylines("st", sets, table, Method::MaxCohesionRel, SolverConstraints{});
    const auto j = storyline_to_json(rel.front());
    EXPECT_EQ(j["config"]["beta"].get<double>(), 0.9);
    EXPECT_EQ(j["config"]["gamma"].get<double>(), 0.4);
    EXPECT_EQ(j["method"], "max-cohesion-rel");
    EXPECT_EQ(j["rank"], 1);
    const auto plain = top_k_storylines("st", sets, table, Method::MaxTransitions, SolverConstraints{});
    EXPECT_FALSE(storyline_to_json(plain.front()).contains("config"));
}

TEST(Methods, NamesRoundTrip) {
    for (auto m : kAllMethods) {
        EXPECT_EQ(parse_method(to_string(m)), m);
        EXPECT_EQ(parse_method(display_name(m)), m);
    }
    EXPECT_THROW(parse_method("shortest"), Error);
}
