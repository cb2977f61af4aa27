#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "storyline/corpus.hpp"
#include "storyline/error.hpp"
#include "storyline/features.hpp"
#include "storyline/retrieval.hpp"
#include "storyline/transition.hpp"

namespace storyline {

enum class Method { MaxTransitions, MaxTransitionsRel, MaxCohesion, MaxCohesionRel };

inline constexpr std::array<Method, 4> kAllMethods = {Method::MaxTransitions, Method::MaxTransitionsRel,
                                                      Method::MaxCohesion, Method::MaxCohesionRel};

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::MaxTransitions: return "max-trans";
    case Method::MaxTransitionsRel: return "max-trans-rel";
    case Method::MaxCohesion: return "max-cohesion";
    case Method::MaxCohesionRel: return "max-cohesion-rel";
    }
    return "?";
}

inline std::string_view display_name(Method m) {
    switch (m) {
    case Method::MaxTransitions: return "MaxTransitions";
    case Method::MaxTransitionsRel: return "MaxTransitionsRel";
    case Method::MaxCohesion: return "MaxCohesion";
    case Method::MaxCohesionRel: return "MaxCohesionRel";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    for (auto m : kAllMethods) {
        if (s == to_string(m) || s == display_name(m)) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(s) + "'");
}

inline bool is_chain(Method m) { return m == Method::MaxTransitions || m == Method::MaxTransitionsRel; }
inline bool uses_relevance(Method m) { return m == Method::MaxTransitionsRel || m == Method::MaxCohesionRel; }

// ---------------------------------------------------------------------------
// Pair costs

inline double pair_cost_plain(double trans_q) { return trans_q; }

/// Relevance-weighted pair cost, in [0,2]:
/// (1-gamma)(relC_x + relC_y) + gamma(relC_x * relC_y + transQ).
inline double pair_cost_rel(double relc_x, double relc_y, double trans_q, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "gamma must lie in [0,1]");
    }
    return (1.0 - gamma) * (relc_x + relc_y) + gamma * (relc_x * relc_y + trans_q);
}

/// Dense transQ / relC tables over the vertices (segment, candidate rank).
class CostTable {
  public:
    CostTable() = default;
    explicit CostTable(std::vector<std::size_t> sizes) : m_sizes(std::move(sizes)) {
        std::size_t total = 0;
        for (auto s : m_sizes) {
            m_offsets.push_back(total);
            total += s;
        }
        m_total = total;
        m_tq.assign(total * total, 0.0);
        m_relc.assign(total, 1.0);
    }

    std::size_t segments() const { return m_sizes.size(); }
    std::size_t size(std::size_t seg) const { return m_sizes[seg]; }
    const std::vector<std::size_t>& sizes() const { return m_sizes; }

    double trans_q(std::size_t sa, std::size_t a, std::size_t sb, std::size_t b) const {
        return m_tq[vertex(sa, a) * m_total + vertex(sb, b)];
    }
    void set_trans_q(std::size_t sa, std::size_t a, std::size_t sb, std::size_t b, double v) {
        m_tq[vertex(sa, a) * m_total + vertex(sb, b)] = v;
        m_tq[vertex(sb, b) * m_total + vertex(sa, a)] = v;
    }
    double relc(std::size_t seg, std::size_t a) const { return m_relc[vertex(seg, a)]; }
    void set_relc(std::size_t seg, std::size_t a, double v) { m_relc[vertex(seg, a)] = v; }

  private:
    std::size_t vertex(std::size_t seg, std::size_t a) const { return m_offsets[seg] + a; }

    std::vector<std::size_t> m_sizes;
    std::vector<std::size_t> m_offsets;
    std::size_t m_total = 0;
    std::vector<double> m_tq;
    std::vector<double> m_relc;
};

/// Builds the transQ table from the model, memoizing per unordered image pair.
inline CostTable build_cost_table(const std::vector<CandidateSet>& sets, const TransitionModel& model,
                                  const FeatureStore& store) {
    std::vector<std::size_t> sizes;
    for (const auto& s : sets) sizes.push_back(s.candidates.size());
    CostTable table(sizes);
    std::map<ImagePair, double> memo;
    auto bundle = [&](const std::string& id) -> const FeatureBundle& {
        const auto* b = store.find(id);
        if (b == nullptr) {
            throw Error(ErrorCode::MissingFeatures, "no features for image '" + id + "'");
        }
        return *b;
    };
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t a = 0; a < sizes[i]; ++a) {
            table.set_relc(i, a, sets[i].candidates[a].relc);
        }
    }
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            for (std::size_t a = 0; a < sizes[i]; ++a) {
                for (std::size_t b = 0; b < sizes[j]; ++b) {
                    const auto& ia = sets[i].candidates[a].image_id;
                    const auto& ib = sets[j].candidates[b].image_id;
                    ImagePair key(ia, ib);
                    auto it = memo.find(key);
                    if (it == memo.end()) {
                        it = memo.emplace(key, trans_q(model, bundle(ia), bundle(ib))).first;
                    }
                    table.set_trans_q(i, a, j, b, it->second);
                }
            }
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Objectives

struct SolverParams {
    double beta = 0.9;
    double gamma = 0.4;
};

using Selection = std::vector<std::size_t>;  // candidate rank per segment

struct EdgeTerm {
    std::size_t segment_a = 0;
    std::size_t segment_b = 0;
    std::size_t candidate_a = 0;
    std::size_t candidate_b = 0;
    double trans_q = 0.0;
    double pair_cost = 0.0;
};

struct CostBreakdown {
    std::vector<EdgeTerm> edges;
    double transition_weight = 1.0;
    double transition_sum = 0.0;
    std::optional<double> first_relc;  // set for the relevance methods
    double relevance_weight = 0.0;
    double objective = 0.0;
};

/// Transition-term weight per method: 1 for the plain methods,
/// beta/(2(N-1)) for the chain and beta/(N(N-1)) for the clique variant.
inline double transition_weight(Method m, std::size_t n, double beta) {
    switch (m) {
    case Method::MaxTransitions:
    case Method::MaxCohesion: return 1.0;
    case Method::MaxTransitionsRel: return n > 1 ? beta / (2.0 * static_cast<double>(n - 1)) : 0.0;
    case Method::MaxCohesionRel:
        return n > 1 ? beta / (static_cast<double>(n) * static_cast<double>(n - 1)) : 0.0;
    }
    return 1.0;
}

namespace detail {

inline double edge_cost(Method m, const CostTable& t, const SolverParams& p, std::size_t si, std::size_t a,
                        std::size_t sj, std::size_t b) {
    const double tq = t.trans_q(si, a, sj, b);
    return uses_relevance(m) ? pair_cost_rel(t.relc(si, a), t.relc(sj, b), tq, p.gamma) : pair_cost_plain(tq);
}

}  // namespace detail

/// Canonical evaluation of a selection. Every solver reports this value, so
/// objectives are comparable between methods and runs.
inline CostBreakdown evaluate_selection(Method m, const CostTable& t, const Selection& sel, const SolverParams& p) {
    const std::size_t n = sel.size();
    CostBreakdown bd;
    bd.transition_weight = transition_weight(m, n, p.beta);
    auto add_edge = [&](std::size_t i, std::size_t j) {
        const double tq = t.trans_q(i, sel[i], j, sel[j]);
        const double pc = detail::edge_cost(m, t, p, i, sel[i], j, sel[j]);
        bd.edges.push_back({i, j, sel[i], sel[j], tq, pc});
        bd.transition_sum += pc;
    };
    if (is_chain(m)) {
        for (std::size_t i = 0; i + 1 < n; ++i) add_edge(i, i + 1);
    } else {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) add_edge(i, j);
        }
    }
    if (uses_relevance(m) && n > 0) {
        bd.first_relc = t.relc(0, sel[0]);
        bd.relevance_weight = 1.0 - p.beta;
    }
    bd.objective = bd.transition_weight * bd.transition_sum + (bd.first_relc ? bd.relevance_weight * *bd.first_relc : 0.0);
    return bd;
}

// ---------------------------------------------------------------------------
// Constraints

struct SolverConstraints {
    std::map<std::size_t, std::string> pins;  // segment -> image id
    std::set<std::string> exclusions;
    double beta = 0.9;
    double gamma = 0.4;
    std::size_t top_k = 4;

    SolverParams params() const { return {beta, gamma}; }
};

using Domains = std::vector<std::vector<std::size_t>>;

/// Allowed candidate ranks per segment after exclusions and pins.
inline Domains resolve_domains(const std::vector<CandidateSet>& sets, const SolverConstraints& c) {
    if (!(c.beta >= 0.0 && c.beta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "beta must lie in [0,1]");
    if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in [0,1]");
    if (c.top_k == 0) throw Error(ErrorCode::InvalidArgument, "top_k must be positive");
    for (const auto& [seg, id] : c.pins) {
        if (seg >= sets.size()) {
            throw Error(ErrorCode::InvalidPin, "pin refers to segment " + std::to_string(seg) + " but the story has " +
                                                   std::to_string(sets.size()) + " segments");
        }
        if (c.exclusions.contains(id)) {
            throw Error(ErrorCode::InvalidPin, "image '" + id + "' is both pinned and excluded", {seg});
        }
        const auto& cands = sets[seg].candidates;
        if (std::none_of(cands.begin(), cands.end(), [&](const Candidate& x) { return x.image_id == id; })) {
            throw Error(ErrorCode::InvalidPin,
                        "image '" + id + "' is not a candidate of segment " + std::to_string(seg), {seg});
        }
    }
    Domains out(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const auto pin = c.pins.find(i);
        for (std::size_t a = 0; a < sets[i].candidates.size(); ++a) {
            const auto& id = sets[i].candidates[a].image_id;
            if (c.exclusions.contains(id)) continue;
            if (pin != c.pins.end() && pin->second != id) continue;
            out[i].push_back(a);
        }
        if (out[i].empty()) {
            throw Error(ErrorCode::EmptySegment, "segment " + std::to_string(i) + " has no candidates" +
                                                     (sets[i].candidates.empty() ? "" : " left after exclusions"),
                        {i});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Solvers

struct SolverOptions {
    std::uint64_t exhaustive_limit = 1'000'000;  // clique methods enumerate below this
    std::uint64_t node_budget = 50'000'000;      // branch-and-bound nodes before giving up
};

struct ScoredSelection {
    Selection selection;
    CostBreakdown breakdown;

    double objective() const { return breakdown.objective; }
};

namespace detail {

inline bool ranks_before(const ScoredSelection& a, const ScoredSelection& b) {
    if (a.objective() != b.objective()) return a.objective() < b.objective();
    return a.selection < b.selection;
}

/// Best path through the layered graph restricted to the domains. Costs-to-go
/// are computed back to front; the path is then read front to back taking
/// the lowest index among equal values, so exact ties resolve to the
/// lexicographically smallest selection.
inline Selection best_chain(Method m, const CostTable& t, const SolverParams& p, const Domains& dom) {
    const std::size_t n = dom.size();
    const double w = transition_weight(m, n, p.beta);
    const double rw = uses_relevance(m) ? 1.0 - p.beta : 0.0;
    std::vector<std::vector<double>> togo(n);
    togo[n - 1].assign(dom[n - 1].size(), 0.0);
    for (std::size_t i = n - 1; i-- > 0;) {
        togo[i].assign(dom[i].size(), std::numeric_limits<double>::infinity());
        for (std::size_t ka = 0; ka < dom[i].size(); ++ka) {
            for (std::size_t kb = 0; kb < dom[i + 1].size(); ++kb) {
                const double v = w * edge_cost(m, t, p, i, dom[i][ka], i + 1, dom[i + 1][kb]) + togo[i + 1][kb];
                togo[i][ka] = std::min(togo[i][ka], v);
            }
        }
    }
    Selection sel(n);
    std::size_t cur = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < dom[0].size(); ++k) {
        const double v = (uses_relevance(m) ? rw * t.relc(0, dom[0][k]) : 0.0) + togo[0][k];
        if (v < best) {
            best = v;
            cur = k;
        }
    }
    sel[0] = dom[0][cur];
    for (std::size_t i = 0; i + 1 < n; ++i) {
        std::size_t next = 0;
        double nb = std::numeric_limits<double>::infinity();
        for (std::size_t kb = 0; kb < dom[i + 1].size(); ++kb) {
            const double v = w * edge_cost(m, t, p, i, dom[i][cur], i + 1, dom[i + 1][kb]) + togo[i + 1][kb];
            if (v < nb) {
                nb = v;
                next = kb;
            }
        }
        cur = next;
        sel[i + 1] = dom[i + 1][cur];
    }
    return sel;
}

struct QueueEntry {
    ScoredSelection scored;
    Domains domains;
};

struct QueueOrder {
    bool operator()(const QueueEntry& a, const QueueEntry& b) const { return ranks_before(b.scored, a.scored); }
};

/// K best chains by deviation search: after taking the best path of a
/// subspace, the rest of that subspace splits into N disjoint subspaces that
/// agree with it on a prefix and deviate at the next segment.
inline std::vector<ScoredSelection> top_k_chain(Method m, const CostTable& t, const SolverParams& p,
                                                const Domains& dom, std::size_t k) {
    std::vector<ScoredSelection> out;
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, QueueOrder> queue;
    auto push = [&](Domains d) {
        for (const auto& layer : d) {
            if (layer.empty()) return;
        }
        Selection s = best_chain(m, t, p, d);
        queue.push({{s, evaluate_selection(m, t, s, p)}, std::move(d)});
    };
    push(dom);
    while (!queue.empty() && out.size() < k) {
        QueueEntry top = queue.top();
        queue.pop();
        const Selection& s = top.scored.selection;
        for (std::size_t i = 0; i < s.size(); ++i) {
            Domains d = top.domains;
            for (std::size_t j = 0; j < i; ++j) d[j] = {s[j]};
            d[i].erase(std::remove(d[i].begin(), d[i].end(), s[i]), d[i].end());
            push(std::move(d));
        }
        out.push_back(std::move(top.scored));
    }
    return out;
}

/// Bounded best-K set ordered by (objective, selection).
class BestK {
  public:
    explicit BestK(std::size_t k) : m_k(k) {}

    bool full() const { return m_items.size() >= m_k; }
    double worst() const { return m_items.back().objective(); }

    void offer(ScoredSelection s) {
        if (full() && !ranks_before(s, m_items.back())) return;
        auto pos = std::upper_bound(m_items.begin(), m_items.end(), s, ranks_before);
        m_items.insert(pos, std::move(s));
        if (m_items.size() > m_k) m_items.pop_back();
    }

    std::vector<ScoredSelection> take() { return std::move(m_items); }

  private:
    std::size_t m_k;
    std::vector<ScoredSelection> m_items;
};

inline std::vector<ScoredSelection> top_k_enumerate(Method m, const CostTable& t, const SolverParams& p,
                                                    const Domains& dom, std::size_t k) {
    BestK best(k);
    std::vector<std::size_t> idx(dom.size(), 0);
    Selection sel(dom.size());
    for (;;) {
        for (std::size_t i = 0; i < dom.size(); ++i) sel[i] = dom[i][idx[i]];
        best.offer({sel, evaluate_selection(m, t, sel, p)});
        std::size_t i = dom.size();
        while (i > 0) {
            --i;
            if (++idx[i] < dom[i].size()) break;
            idx[i] = 0;
            if (i == 0) return best.take();
        }
        if (dom.empty()) return best.take();
    }
}

/// Admissible bound: the cost already committed plus, for every open
/// partition, the cheapest way to attach one of its vertices to the chosen
/// ones. All pair costs are non-negative, so pairs among open partitions can
/// only add to it.
class CliqueSearch {
  public:
    CliqueSearch(Method m, const CostTable& t, const SolverParams& p, const Domains& dom, std::size_t k,
                 std::uint64_t budget)
        : m_method(m), m_table(t), m_params(p), m_dom(dom), m_best(k), m_budget(budget),
          m_weight(transition_weight(m, dom.size(), p.beta)),
          m_relevance_weight(uses_relevance(m) ? 1.0 - p.beta : 0.0), m_sel(dom.size()) {}

    std::vector<ScoredSelection> run() {
        descend(0, 0.0);
        return m_best.take();
    }

    std::uint64_t nodes() const { return m_nodes; }

  private:
    double attach_cost(std::size_t depth, std::size_t seg, std::size_t v) const {
        double c = 0.0;
        for (std::size_t i = 0; i < depth; ++i) {
            c += edge_cost(m_method, m_table, m_params, i, m_sel[i], seg, v);
        }
        c *= m_weight;
        if (seg == 0 && uses_relevance(m_method)) c += m_relevance_weight * m_table.relc(0, v);
        return c;
    }

    void descend(std::size_t depth, double partial) {
        if (++m_nodes > m_budget) {
            throw Error(ErrorCode::SolverBudget,
                        "branch-and-bound exceeded its node budget of " + std::to_string(m_budget));
        }
        const std::size_t n = m_dom.size();
        if (depth == n) {
            m_best.offer({m_sel, evaluate_selection(m_method, m_table, m_sel, m_params)});
            return;
        }
        double bound = partial;
        for (std::size_t seg = depth; seg < n; ++seg) {
            double lo = std::numeric_limits<double>::infinity();
            for (auto v : m_dom[seg]) lo = std::min(lo, attach_cost(depth, seg, v));
            bound += lo;
        }
        if (pruned(bound)) return;
        std::vector<std::pair<double, std::size_t>> children;
        for (auto v : m_dom[depth]) children.emplace_back(attach_cost(depth, depth, v), v);
        std::stable_sort(children.begin(), children.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [cost, v] : children) {
            if (pruned(partial + cost)) break;
            m_sel[depth] = v;
            descend(depth + 1, partial + cost);
        }
    }

    // A slack absorbs summation-order rounding between the bound and the
    // canonical objective, so equal-objective ties are never pruned.
    bool pruned(double bound) const { return m_best.full() && bound > m_best.worst() + 1e-9; }

    Method m_method;
    const CostTable& m_table;
    SolverParams m_params;
    const Domains& m_dom;
    BestK m_best;
    std::uint64_t m_budget;
    std::uint64_t m_nodes = 0;
    double m_weight;
    double m_relevance_weight;
    Selection m_sel;
};

inline std::uint64_t search_space(const Domains& dom) {
    std::uint64_t total = 1;
    for (const auto& d : dom) {
        if (total > std::numeric_limits<std::uint64_t>::max() / std::max<std::size_t>(d.size(), 1)) {
            return std::numeric_limits<std::uint64_t>::max();
        }
        total *= d.size();
    }
    return total;
}

}  // namespace detail

/// The k lowest-objective selections for a method, ascending
/// (ties by selection order).
inline std::vector<ScoredSelection> solve_top_k(Method m, const CostTable& t, const Domains& dom,
                                                const SolverParams& p, std::size_t k, const SolverOptions& opt = {}) {
    if (dom.size() != t.segments()) {
        throw Error(ErrorCode::InvalidArgument, "domains do not match the cost table");
    }
    if (dom.empty()) {
        throw Error(ErrorCode::InvalidArgument, "story has no segments");
    }
    for (std::size_t i = 0; i < dom.size(); ++i) {
        if (dom[i].empty()) {
            throw Error(ErrorCode::EmptySegment, "segment " + std::to_string(i) + " has no candidates", {i});
        }
    }
    if (!(p.beta >= 0.0 && p.beta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "beta must lie in [0,1]");
    if (!(p.gamma >= 0.0 && p.gamma <= 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in [0,1]");
    if (k == 0) return {};
    std::vector<ScoredSelection> out;
    if (dom.size() == 1 && !uses_relevance(m)) {
        // No transitions to score: the most relevant candidates come first.
        std::vector<std::size_t> order = dom[0];
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return t.relc(0, a) < t.relc(0, b); });
        for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
            Selection sel{order[i]};
            out.push_back({sel, evaluate_selection(m, t, sel, p)});
        }
        return out;
    }
    if (is_chain(m)) {
        out = detail::top_k_chain(m, t, p, dom, k);
    } else if (detail::search_space(dom) <= opt.exhaustive_limit) {
        out = detail::top_k_enumerate(m, t, p, dom, k);
    } else {
        out = detail::CliqueSearch(m, t, p, dom, k, opt.node_budget).run();
    }
    std::stable_sort(out.begin(), out.end(), detail::ranks_before);
    return out;
}

/// Unconstrained full domains.
inline Domains full_domains(const CostTable& t) {
    Domains d(t.segments());
    for (std::size_t i = 0; i < t.segments(); ++i) {
        for (std::size_t a = 0; a < t.size(i); ++a) d[i].push_back(a);
    }
    return d;
}

inline ScoredSelection solve_best(Method m, const CostTable& t, const SolverParams& p = {},
                                  const SolverOptions& opt = {}) {
    auto r = solve_top_k(m, t, full_domains(t), p, 1, opt);
    return std::move(r.front());
}

inline ScoredSelection solve_max_transitions(const CostTable& t) {
    return solve_best(Method::MaxTransitions, t);
}
inline ScoredSelection solve_max_transitions_rel(const CostTable& t, double beta = 0.9, double gamma = 0.4) {
    return solve_best(Method::MaxTransitionsRel, t, {beta, gamma});
}
inline ScoredSelection solve_max_cohesion(const CostTable& t, const SolverOptions& opt = {}) {
    return solve_best(Method::MaxCohesion, t, {}, opt);
}
inline ScoredSelection solve_max_cohesion_rel(const CostTable& t, double beta = 0.9, double gamma = 0.4,
                                              const SolverOptions& opt = {}) {
    return solve_best(Method::MaxCohesionRel, t, {beta, gamma}, opt);
}

// ---------------------------------------------------------------------------
// Storylines

struct ChosenImage {
    std::size_t segment = 0;
    std::size_t candidate_rank = 0;
    std::string image_id;
    std::string document_id;
    double rel = 0.0;
    double relc = 1.0;
};

struct Storyline {
    std::string story_id;
    Method method = Method::MaxTransitions;
    std::vector<ChosenImage> chosen;
    double objective = 0.0;
    CostBreakdown breakdown;
    std::size_t rank = 0;  // 1-based
    SolverParams config;
};

inline Storyline make_storyline(const std::string& story_id, Method m, const std::vector<CandidateSet>& sets,
                                ScoredSelection scored, std::size_t rank, const SolverParams& p) {
    Storyline s;
    s.story_id = story_id;
    s.method = m;
    for (std::size_t i = 0; i < scored.selection.size(); ++i) {
        const auto& c = sets[i].candidates[scored.selection[i]];
        s.chosen.push_back({i, scored.selection[i], c.image_id, c.document_id, c.rel, c.relc});
    }
    s.objective = scored.breakdown.objective;
    s.breakdown = std::move(scored.breakdown);
    s.rank = rank;
    s.config = p;
    return s;
}

/// Ranked storylines for one method under editor constraints.
inline std::vector<Storyline> top_k_storylines(const std::string& story_id, const std::vector<CandidateSet>& sets,
                                               const CostTable& table, Method m, const SolverConstraints& c,
                                               const SolverOptions& opt = {}) {
    const Domains dom = resolve_domains(sets, c);
    auto scored = solve_top_k(m, table, dom, c.params(), c.top_k, opt);
    std::vector<Storyline> out;
    for (std::size_t r = 0; r < scored.size(); ++r) {
        out.push_back(make_storyline(story_id, m, sets, std::move(scored[r]), r + 1, c.params()));
    }
    return out;
}

inline std::vector<Storyline> top_k_storylines(const std::string& story_id, const std::vector<CandidateSet>& sets,
                                               const TransitionModel& model, const FeatureStore& store, Method m,
                                               const SolverConstraints& c, const SolverOptions& opt = {}) {
    return top_k_storylines(story_id, sets, build_cost_table(sets, model, store), m, c, opt);
}

// ---------------------------------------------------------------------------
// Explanation

struct Explanation {
    std::size_t edge_terms = 0;
    double transition_sum = 0.0;
    double weighted_transition = 0.0;
    double relevance_term = 0.0;
    double total = 0.0;
    std::string text;
};

/// Recomputes the objective from the breakdown and renders a report.
inline Explanation explain_storyline(const Storyline& s) {
    const auto& bd = s.breakdown;
    Explanation e;
    e.edge_terms = bd.edges.size();
    for (const auto& edge : bd.edges) e.transition_sum += edge.pair_cost;
    e.weighted_transition = bd.transition_weight * e.transition_sum;
    e.relevance_term = bd.first_relc ? bd.relevance_weight * *bd.first_relc : 0.0;
    e.total = e.weighted_transition + e.relevance_term;

    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    os << display_name(s.method) << " #" << s.rank << " for story " << s.story_id << "\n";
    for (const auto& c : s.chosen) {
        os << "  segment " << c.segment << ": " << c.image_id << " (rel " << c.rel << ")\n";
    }
    for (const auto& edge : bd.edges) {
        os << "  pairCost(" << s.chosen[edge.segment_a].image_id << ", " << s.chosen[edge.segment_b].image_id
           << ") = " << edge.pair_cost << "  [transQ " << edge.trans_q << "]\n";
    }
    os << "  transitions: " << bd.transition_weight << " x " << e.transition_sum << " = " << e.weighted_transition
       << "\n";
    if (bd.first_relc) {
        os << "  first-segment relevance: " << bd.relevance_weight << " x relC " << *bd.first_relc << " = "
           << e.relevance_term << "\n";
    }
    os << "  objective: " << e.total << "\n";
    e.text = os.str();
    return e;
}

inline nlohmann::json storyline_to_json(const Storyline& s) {
    auto chosen = nlohmann::json::array();
    for (const auto& c : s.chosen) {
        chosen.push_back({{"segment", c.segment},
                          {"candidate_rank", c.candidate_rank},
                          {"image_id", c.image_id},
                          {"document_id", c.document_id},
                          {"rel", c.rel},
                          {"relc", c.relc}});
    }
    auto edges = nlohmann::json::array();
    for (const auto& e : s.breakdown.edges) {
        edges.push_back({{"from_segment", e.segment_a},
                         {"to_segment", e.segment_b},
                         {"image_a", s.chosen[e.segment_a].image_id},
                         {"image_b", s.chosen[e.segment_b].image_id},
                         {"trans_q", e.trans_q},
                         {"pair_cost", e.pair_cost}});
    }
    nlohmann::json bd = {{"edges", std::move(edges)},
                         {"transition_weight", s.breakdown.transition_weight},
                         {"transition_sum", s.breakdown.transition_sum},
                         {"objective", s.breakdown.objective}};
    if (s.breakdown.first_relc) {
        bd["first_relc"] = *s.breakdown.first_relc;
        bd["relevance_weight"] = s.breakdown.relevance_weight;
    }
    nlohmann::json j = {{"story_id", s.story_id},
                        {"method", to_string(s.method)},
                        {"rank", s.rank},
                        {"chosen", std::move(chosen)},
                        {"objective", s.objective},
                        {"breakdown", std::move(bd)}};
    if (uses_relevance(s.method)) {
        j["config"] = {{"beta", s.config.beta}, {"gamma", s.config.gamma}};
    }
    return j;
}

}  // namespace storyline
