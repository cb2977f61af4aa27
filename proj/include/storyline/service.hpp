#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <sqlite3.h>

#include <httplib.h>
#include <json.hpp>

#include "storyline/corpus.hpp"
#include "storyline/error.hpp"
#include "storyline/features.hpp"
#include "storyline/retrieval.hpp"
#include "storyline/storygraph.hpp"
#include "storyline/transition.hpp"
#include "storyline/util.hpp"

namespace storyline {

inline constexpr const char* kSessionSchema = "storyline.session/1";
inline constexpr const char* kSolutionsSchema = "storyline.solutions/1";
inline constexpr const char* kVoteSchema = "storyline.vote/1";
inline constexpr const char* kErrorSchema = "storyline.error/1";

// ---------------------------------------------------------------------------
// Configuration

struct ServiceConfig {
    std::filesystem::path index_path;
    std::filesystem::path model_path;
    std::filesystem::path features_path;
    std::filesystem::path media_dir;
    std::filesystem::path db_path = "storyline.db";
    std::string host = "127.0.0.1";
    int port = 8080;
    double beta = 0.9;
    double gamma = 0.4;
    std::size_t k = 10;
    std::size_t top_k = 4;
    SolverOptions solver;
};

namespace detail {

/// Relative paths in a config file are taken relative to that file.
inline std::filesystem::path config_path(const nlohmann::json& j, const char* key,
                                         const std::filesystem::path& base, const std::filesystem::path& fallback) {
    if (!j.contains(key)) return fallback;
    std::filesystem::path p = j.at(key).get<std::string>();
    return p.is_relative() ? base / p : p;
}

inline const char* env(const char* name) {
    const char* v = std::getenv(name);
    return (v != nullptr && *v != '\0') ? v : nullptr;
}

}  // namespace detail

/// Service settings from a JSON config file (optional), then STORYLINE_*
/// environment overrides.
inline ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file) {
    ServiceConfig c;
    if (file) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(*file));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse, file->string() + ": " + e.what());
        }
        const auto base = file->parent_path();
        c.index_path = detail::config_path(j, "index", base, c.index_path);
        c.model_path = detail::config_path(j, "model", base, c.model_path);
        c.features_path = detail::config_path(j, "features", base, c.features_path);
        c.media_dir = detail::config_path(j, "media_dir", base, c.media_dir);
        c.db_path = detail::config_path(j, "db", base, c.db_path);
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        c.beta = j.value("beta", c.beta);
        c.gamma = j.value("gamma", c.gamma);
        c.k = j.value("k", c.k);
        c.top_k = j.value("top_k", c.top_k);
        c.solver.node_budget = j.value("node_budget", c.solver.node_budget);
    }
    try {
        if (auto v = detail::env("STORYLINE_INDEX")) c.index_path = v;
        if (auto v = detail::env("STORYLINE_MODEL")) c.model_path = v;
        if (auto v = detail::env("STORYLINE_FEATURES")) c.features_path = v;
        if (auto v = detail::env("STORYLINE_MEDIA")) c.media_dir = v;
        if (auto v = detail::env("STORYLINE_DB")) c.db_path = v;
        if (auto v = detail::env("STORYLINE_HOST")) c.host = v;
        if (auto v = detail::env("STORYLINE_PORT")) c.port = std::stoi(v);
        if (auto v = detail::env("STORYLINE_BETA")) c.beta = std::stod(v);
        if (auto v = detail::env("STORYLINE_GAMMA")) c.gamma = std::stod(v);
        if (auto v = detail::env("STORYLINE_K")) c.k = std::stoul(v);
        if (auto v = detail::env("STORYLINE_TOP_K")) c.top_k = std::stoul(v);
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::InvalidArgument, "malformed STORYLINE_* environment override");
    }
    return c;
}

// ---------------------------------------------------------------------------
// SQLite

class Database {
  public:
    explicit Database(const std::filesystem::path& path) {
        if (sqlite3_open(path.string().c_str(), &m_db) != SQLITE_OK) {
            std::string msg = m_db ? sqlite3_errmsg(m_db) : "out of memory";
            sqlite3_close(m_db);
            throw Error(ErrorCode::Io, "cannot open " + path.string() + ": " + msg);
        }
        sqlite3_busy_timeout(m_db, 5000);
        exec("PRAGMA journal_mode=WAL");
        exec("PRAGMA synchronous=FULL");
        exec("PRAGMA foreign_keys=ON");
    }
    ~Database() { sqlite3_close(m_db); }
    Database(const Database&) = delete;
    Database& operator=(const Database&) = delete;

    void exec(const std::string& sql) {
        char* err = nullptr;
        if (sqlite3_exec(m_db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : "unknown";
            sqlite3_free(err);
            throw Error(ErrorCode::Io, "sqlite: " + msg);
        }
    }

    class Statement {
      public:
        Statement(sqlite3* db, const std::string& sql) : m_db(db) {
            if (sqlite3_prepare_v2(db, sql.c_str(), -1, &m_stmt, nullptr) != SQLITE_OK) {
                throw Error(ErrorCode::Io, std::string("sqlite: ") + sqlite3_errmsg(db));
            }
        }
        ~Statement() { sqlite3_finalize(m_stmt); }
        Statement(const Statement&) = delete;
        Statement& operator=(const Statement&) = delete;

        Statement& bind(int i, const std::string& v) {
            sqlite3_bind_text(m_stmt, i, v.c_str(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
            return *this;
        }
        Statement& bind(int i, std::int64_t v) {
            sqlite3_bind_int64(m_stmt, i, v);
            return *this;
        }

        /// True while rows remain.
        bool step() {
            const int rc = sqlite3_step(m_stmt);
            if (rc == SQLITE_ROW) return true;
            if (rc == SQLITE_DONE) return false;
            if (rc == SQLITE_CONSTRAINT) {
                throw Error(ErrorCode::Conflict, std::string("sqlite: ") + sqlite3_errmsg(m_db));
            }
            throw Error(ErrorCode::Io, std::string("sqlite: ") + sqlite3_errmsg(m_db));
        }

        std::string text(int col) const {
            const auto* p = sqlite3_column_text(m_stmt, col);
            return p ? std::string(reinterpret_cast<const char*>(p), sqlite3_column_bytes(m_stmt, col)) : "";
        }
        std::int64_t integer(int col) const { return sqlite3_column_int64(m_stmt, col); }

      private:
        sqlite3* m_db;
        sqlite3_stmt* m_stmt = nullptr;
    };

    Statement prepare(const std::string& sql) { return Statement(m_db, sql); }

  private:
    sqlite3* m_db = nullptr;
};

// ---------------------------------------------------------------------------
// Sessions

struct EditorSession {
    std::string id;
    Story story;
    std::size_t k = 10;
    std::vector<CandidateSet> candidate_sets;
    SolverConstraints constraints;
    std::int64_t revision = 0;
};

inline nlohmann::json constraints_to_json(const SolverConstraints& c) {
    auto pins = nlohmann::json::array();
    for (const auto& [seg, id] : c.pins) pins.push_back({{"segment", seg}, {"image_id", id}});
    return {{"pins", std::move(pins)},
            {"exclusions", std::vector<std::string>(c.exclusions.begin(), c.exclusions.end())},
            {"beta", c.beta},
            {"gamma", c.gamma},
            {"top_k", c.top_k}};
}

/// Applies the fields present in `patch` on top of `base`. Absent fields keep
/// their current value.
inline SolverConstraints apply_constraint_patch(SolverConstraints base, const nlohmann::json& patch) {
    if (!patch.is_object()) throw Error(ErrorCode::Parse, "constraints must be a JSON object");
    try {
        if (patch.contains("pins")) {
            base.pins.clear();
            for (const auto& p : patch.at("pins")) {
                const auto seg = p.at("segment").get<long long>();
                if (seg < 0) throw Error(ErrorCode::InvalidPin, "pin segment must be non-negative");
                const auto [it, fresh] =
                    base.pins.emplace(static_cast<std::size_t>(seg), p.at("image_id").get<std::string>());
                if (!fresh) {
                    throw Error(ErrorCode::InvalidPin, "segment " + std::to_string(seg) + " pinned twice",
                                {static_cast<std::size_t>(seg)});
                }
            }
        }
        if (patch.contains("exclusions")) {
            base.exclusions.clear();
            for (const auto& e : patch.at("exclusions")) base.exclusions.insert(e.get<std::string>());
        }
        if (patch.contains("beta")) base.beta = patch.at("beta").get<double>();
        if (patch.contains("gamma")) base.gamma = patch.at("gamma").get<double>();
        if (patch.contains("top_k")) {
            const auto k = patch.at("top_k").get<long long>();
            if (k <= 0) throw Error(ErrorCode::InvalidArgument, "top_k must be positive");
            base.top_k = static_cast<std::size_t>(k);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("constraints: ") + e.what());
    }
    return base;
}

inline nlohmann::json session_to_json(const EditorSession& s) {
    return {{"schema", kSessionSchema},
            {"id", s.id},
            {"story", story_to_json(s.story)},
            {"k", s.k},
            {"candidate_sets", candidate_sets_to_json(s.candidate_sets)},
            {"constraints", constraints_to_json(s.constraints)},
            {"revision", s.revision}};
}

struct StoredVote {
    std::string session_id;
    Vote vote;
    std::int64_t timestamp = 0;
};

inline nlohmann::json error_to_json(ErrorCode code, const std::string& message,
                                    const std::vector<std::size_t>& segments = {}) {
    nlohmann::json e = {{"code", to_string(code)}, {"message", message}};
    if (!segments.empty()) e["segments"] = segments;
    return {{"schema", kErrorSchema}, {"error", std::move(e)}};
}

inline nlohmann::json error_to_json(const Error& e) { return error_to_json(e.code(), e.what(), e.segments()); }

/// Editor workflow over a loaded index, model and feature store. Sessions and
/// votes live in SQLite; each session mutates under its own lock.
class StorylineService {
  public:
    StorylineService(std::shared_ptr<const Index> index, std::shared_ptr<const TransitionModel> model,
                     std::shared_ptr<const FeatureStore> store, ServiceConfig config)
        : m_index(std::move(index)), m_model(std::move(model)), m_store(std::move(store)),
          m_config(std::move(config)), m_db(m_config.db_path) {
        check_layout(nlohmann::json{{"layout_hash", m_model->layout_hash()}}, m_store->settings().layout_hash(),
                     "feature store");
        std::lock_guard lock(m_db_mutex);
        m_db.exec(R"(CREATE TABLE IF NOT EXISTS sessions (
                        id TEXT PRIMARY KEY, story TEXT NOT NULL, k INTEGER NOT NULL,
                        candidate_sets TEXT NOT NULL, constraints TEXT NOT NULL, revision INTEGER NOT NULL,
                        created INTEGER NOT NULL))");
        m_db.exec(R"(CREATE TABLE IF NOT EXISTS solutions (
                        session_id TEXT NOT NULL REFERENCES sessions(id), method TEXT NOT NULL,
                        revision INTEGER NOT NULL, payload TEXT NOT NULL, PRIMARY KEY (session_id, method)))");
        m_db.exec(R"(CREATE TABLE IF NOT EXISTS served_pairs (
                        session_id TEXT NOT NULL REFERENCES sessions(id), image_a TEXT NOT NULL,
                        image_b TEXT NOT NULL, PRIMARY KEY (session_id, image_a, image_b)))");
        m_db.exec(R"(CREATE TABLE IF NOT EXISTS votes (
                        session_id TEXT NOT NULL REFERENCES sessions(id), image_a TEXT NOT NULL,
                        image_b TEXT NOT NULL, annotator TEXT NOT NULL, vote INTEGER NOT NULL,
                        timestamp INTEGER NOT NULL, PRIMARY KEY (session_id, image_a, image_b, annotator)))");
        for (const auto& [id, b] : m_store->bundles()) {
            if (!b.source.empty() && !b.content_hash.empty()) m_media.emplace(b.content_hash, b.source);
        }
    }

    const ServiceConfig& config() const { return m_config; }

    EditorSession create_session(const Story& story, std::optional<std::size_t> k = std::nullopt) {
        EditorSession s;
        s.story = story;
        s.k = k.value_or(m_config.k);
        if (s.k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
        s.candidate_sets = retrieve_story(*m_index, story, s.k);
        s.constraints.beta = m_config.beta;
        s.constraints.gamma = m_config.gamma;
        s.constraints.top_k = m_config.top_k;
        resolve_domains(s.candidate_sets, s.constraints);
        for (const auto& set : s.candidate_sets) {
            for (const auto& c : set.candidates) m_store->at(c.image_id);
        }
        s.id = new_session_id();
        std::lock_guard lock(m_db_mutex);
        m_db.prepare("INSERT INTO sessions VALUES (?1, ?2, ?3, ?4, ?5, 0, ?6)")
            .bind(1, s.id)
            .bind(2, story_to_json(s.story).dump())
            .bind(3, static_cast<std::int64_t>(s.k))
            .bind(4, candidate_sets_to_json(s.candidate_sets).dump())
            .bind(5, constraints_to_json(s.constraints).dump())
            .bind(6, now())
            .step();
        return s;
    }

    EditorSession get_session(const std::string& id) {
        std::lock_guard lock(m_db_mutex);
        return load_session(id);
    }

    /// Replaces constraints atomically. A failed validation leaves the
    /// session untouched. When expected_revision is given and stale, the
    /// update is refused with a conflict.
    EditorSession update_constraints(const std::string& id, const nlohmann::json& patch) {
        auto guard = session_lock(id);
        EditorSession s = get_session(id);
        if (patch.contains("expected_revision") && patch.at("expected_revision").get<std::int64_t>() != s.revision) {
            throw Error(ErrorCode::Conflict, "session " + id + " is at revision " + std::to_string(s.revision));
        }
        SolverConstraints next = apply_constraint_patch(s.constraints, patch);
        resolve_domains(s.candidate_sets, next);
        s.constraints = std::move(next);
        ++s.revision;
        std::lock_guard lock(m_db_mutex);
        m_db.prepare("UPDATE sessions SET constraints = ?1, revision = ?2 WHERE id = ?3")
            .bind(1, constraints_to_json(s.constraints).dump())
            .bind(2, s.revision)
            .bind(3, id)
            .step();
        m_db.prepare("DELETE FROM solutions WHERE session_id = ?1").bind(1, id).step();
        return s;
    }

    /// Solutions payload for one method or "all". Cached per revision, so
    /// repeated calls without a mutation return the same bytes.
    std::string solutions(const std::string& id, const std::string& which = "all") {
        std::vector<Method> methods;
        if (which == "all") {
            methods.assign(kAllMethods.begin(), kAllMethods.end());
        } else {
            methods.push_back(parse_method(which));
        }
        auto guard = session_lock(id);
        EditorSession s = get_session(id);
        nlohmann::json by_method = nlohmann::json::object();
        std::optional<CostTable> table;
        for (auto m : methods) {
            const std::string name(to_string(m));
            if (auto cached = cached_solution(id, name, s.revision)) {
                by_method[name] = nlohmann::json::parse(*cached);
                continue;
            }
            nlohmann::json entry;
            try {
                if (!table) table = build_cost_table(s.candidate_sets, *m_model, *m_store);
                const auto lines = top_k_storylines(s.story.id, s.candidate_sets, *table, m, s.constraints,
                                                    m_config.solver);
                auto arr = nlohmann::json::array();
                for (const auto& line : lines) arr.push_back(storyline_to_json(line));
                entry = {{"storylines", std::move(arr)}};
                remember_served_pairs(id, lines);
            } catch (const Error& e) {
                entry = error_to_json(e);
                entry.erase("schema");
            }
            store_solution(id, name, s.revision, entry.dump());
            by_method[name] = std::move(entry);
        }
        nlohmann::json payload = {{"schema", kSolutionsSchema},
                                  {"session_id", id},
                                  {"story_id", s.story.id},
                                  {"revision", s.revision},
                                  {"model", model_fingerprint(*m_model)},
                                  {"methods", std::move(by_method)}};
        return payload.dump();
    }

    /// Stores a 0/1 vote on a transition already served in this session.
    StoredVote record_vote(const std::string& id, const nlohmann::json& body) {
        StoredVote v;
        v.session_id = id;
        try {
            v.vote.pair = ImagePair(body.at("image_a").get<std::string>(), body.at("image_b").get<std::string>());
            v.vote.annotator = body.at("annotator").get<std::string>();
            if (!body.at("vote").is_number_integer()) throw Error(ErrorCode::InvalidArgument, "vote must be 0 or 1");
            v.vote.vote = body.at("vote").get<int>();
            v.timestamp = body.contains("timestamp") ? body.at("timestamp").get<std::int64_t>() : now();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse, std::string("vote: ") + e.what());
        }
        if (v.vote.vote != 0 && v.vote.vote != 1) {
            throw Error(ErrorCode::InvalidArgument, "vote must be 0 or 1, got " + std::to_string(v.vote.vote));
        }
        if (v.vote.annotator.empty()) throw Error(ErrorCode::InvalidArgument, "annotator must not be empty");
        auto guard = session_lock(id);
        std::lock_guard lock(m_db_mutex);
        load_session(id);
        auto served = m_db.prepare("SELECT 1 FROM served_pairs WHERE session_id = ?1 AND image_a = ?2 AND image_b = ?3");
        served.bind(1, id).bind(2, v.vote.pair.image_a).bind(3, v.vote.pair.image_b);
        if (!served.step()) {
            throw Error(ErrorCode::InvalidArgument,
                        "pair " + v.vote.pair.key() + " was not served in session " + id);
        }
        auto dup = m_db.prepare(
            "SELECT 1 FROM votes WHERE session_id = ?1 AND image_a = ?2 AND image_b = ?3 AND annotator = ?4");
        dup.bind(1, id).bind(2, v.vote.pair.image_a).bind(3, v.vote.pair.image_b).bind(4, v.vote.annotator);
        if (dup.step()) {
            throw Error(ErrorCode::DuplicateVote,
                        v.vote.annotator + " already rated " + v.vote.pair.key() + " in session " + id);
        }
        m_db.prepare("INSERT INTO votes VALUES (?1, ?2, ?3, ?4, ?5, ?6)")
            .bind(1, id)
            .bind(2, v.vote.pair.image_a)
            .bind(3, v.vote.pair.image_b)
            .bind(4, v.vote.annotator)
            .bind(5, static_cast<std::int64_t>(v.vote.vote))
            .bind(6, v.timestamp)
            .step();
        return v;
    }

    std::vector<StoredVote> votes(const std::optional<std::string>& session = std::nullopt) {
        std::lock_guard lock(m_db_mutex);
        return read_votes(m_db, session);
    }

    /// Training rows. An annotator who rated the same pair in several sessions
    /// counts once, with the earliest vote.
    std::vector<AnnotatedPair> export_training_pairs() { return training_pairs_from(votes()); }

    static std::vector<AnnotatedPair> training_pairs_from(const std::vector<StoredVote>& stored) {
        std::map<std::pair<ImagePair, std::string>, const StoredVote*> first;
        for (const auto& v : stored) {
            auto key = std::make_pair(v.vote.pair, v.vote.annotator);
            auto it = first.find(key);
            if (it == first.end() || v.timestamp < it->second->timestamp) first[key] = &v;
        }
        std::vector<Vote> flat;
        for (const auto& [key, v] : first) flat.push_back(v->vote);
        return aggregate_annotations(flat);
    }

    static std::vector<StoredVote> read_votes(Database& db, const std::optional<std::string>& session) {
        std::vector<StoredVote> out;
        auto st = db.prepare(session ? "SELECT * FROM votes WHERE session_id = ?1 ORDER BY rowid"
                                     : "SELECT * FROM votes ORDER BY rowid");
        if (session) st.bind(1, *session);
        while (st.step()) {
            StoredVote v;
            v.session_id = st.text(0);
            v.vote.pair = ImagePair(st.text(1), st.text(2));
            v.vote.annotator = st.text(3);
            v.vote.vote = static_cast<int>(st.integer(4));
            v.timestamp = st.integer(5);
            out.push_back(std::move(v));
        }
        return out;
    }

    /// Media file for a content hash, if the feature store knows it.
    std::optional<std::filesystem::path> media_path(const std::string& content_hash) const {
        auto it = m_media.find(content_hash);
        if (it == m_media.end()) return std::nullopt;
        std::filesystem::path p = it->second;
        if (p.is_relative() && !m_config.media_dir.empty()) p = m_config.media_dir / p;
        if (!m_config.media_dir.empty()) {
            const auto root = std::filesystem::weakly_canonical(m_config.media_dir);
            const auto full = std::filesystem::weakly_canonical(p);
            const auto rel = full.lexically_relative(root);
            if (rel.empty() || *rel.begin() == "..") return std::nullopt;
        }
        return p;
    }

  private:
    static std::int64_t now() {
        return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
            .count();
    }

    std::string new_session_id() {
        std::lock_guard lock(m_id_mutex);
        if (!m_rng) {
            std::random_device rd;
            m_rng.emplace((static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
                          static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
        }
        return to_hex((*m_rng)()) + to_hex((*m_rng)());
    }

    std::unique_lock<std::mutex> session_lock(const std::string& id) {
        std::shared_ptr<std::mutex> mu;
        {
            std::lock_guard lock(m_locks_mutex);
            auto& slot = m_session_locks[id];
            if (!slot) slot = std::make_shared<std::mutex>();
            mu = slot;
        }
        // The map keeps the mutex alive for the service lifetime.
        return std::unique_lock<std::mutex>(*mu);
    }

    // Caller holds m_db_mutex.
    EditorSession load_session(const std::string& id) {
        auto st = m_db.prepare("SELECT story, k, candidate_sets, constraints, revision FROM sessions WHERE id = ?1");
        st.bind(1, id);
        if (!st.step()) throw Error(ErrorCode::NotFound, "no session '" + id + "'");
        EditorSession s;
        s.id = id;
        s.story = story_from_json(nlohmann::json::parse(st.text(0)));
        s.k = static_cast<std::size_t>(st.integer(1));
        s.candidate_sets = candidate_sets_from_json(nlohmann::json::parse(st.text(2)));
        s.constraints = apply_constraint_patch({}, nlohmann::json::parse(st.text(3)));
        s.revision = st.integer(4);
        return s;
    }

    std::optional<std::string> cached_solution(const std::string& id, const std::string& method,
                                               std::int64_t revision) {
        std::lock_guard lock(m_db_mutex);
        auto st = m_db.prepare("SELECT payload, revision FROM solutions WHERE session_id = ?1 AND method = ?2");
        st.bind(1, id).bind(2, method);
        if (st.step() && st.integer(1) == revision) return st.text(0);
        return std::nullopt;
    }

    void store_solution(const std::string& id, const std::string& method, std::int64_t revision,
                        const std::string& payload) {
        std::lock_guard lock(m_db_mutex);
        m_db.prepare("INSERT OR REPLACE INTO solutions VALUES (?1, ?2, ?3, ?4)")
            .bind(1, id)
            .bind(2, method)
            .bind(3, revision)
            .bind(4, payload)
            .step();
    }

    void remember_served_pairs(const std::string& id, const std::vector<Storyline>& lines) {
        std::lock_guard lock(m_db_mutex);
        for (const auto& line : lines) {
            for (const auto& e : line.breakdown.edges) {
                ImagePair p(line.chosen[e.segment_a].image_id, line.chosen[e.segment_b].image_id);
                m_db.prepare("INSERT OR IGNORE INTO served_pairs VALUES (?1, ?2, ?3)")
                    .bind(1, id)
                    .bind(2, p.image_a)
                    .bind(3, p.image_b)
                    .step();
            }
        }
    }

    std::shared_ptr<const Index> m_index;
    std::shared_ptr<const TransitionModel> m_model;
    std::shared_ptr<const FeatureStore> m_store;
    ServiceConfig m_config;
    Database m_db;
    std::mutex m_db_mutex;
    std::mutex m_locks_mutex;
    std::map<std::string, std::shared_ptr<std::mutex>> m_session_locks;
    std::mutex m_id_mutex;
    std::optional<std::mt19937_64> m_rng;
    std::map<std::string, std::string> m_media;
};

// ---------------------------------------------------------------------------
// HTTP

inline int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::DuplicateVote: return 409;
    case ErrorCode::Parse: return 400;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidPin:
    case ErrorCode::EmptySegment:
    case ErrorCode::NoCandidates:
    case ErrorCode::DuplicateId: return 422;
    case ErrorCode::SolverBudget: return 503;
    default: return 500;
    }
}

inline std::string votes_to_csv(const std::vector<StoredVote>& votes) {
    std::string out = "session_id,image_a,image_b,annotator,vote,timestamp\n";
    for (const auto& v : votes) {
        out += v.session_id + "," + v.vote.pair.image_a + "," + v.vote.pair.image_b + "," + v.vote.annotator + "," +
               std::to_string(v.vote.vote) + "," + std::to_string(v.timestamp) + "\n";
    }
    return out;
}

inline std::string training_pairs_to_csv(const std::vector<AnnotatedPair>& pairs) {
    std::ostringstream os;
    os.precision(17);
    os << "image_a,image_b,rating,annotators,positive\n";
    for (const auto& p : pairs) {
        os << p.image_a << ',' << p.image_b << ',' << p.rating << ',' << p.annotator_count << ','
           << p.positive_votes << '\n';
    }
    return os.str();
}

inline std::string media_content_type(std::string_view bytes) {
    if (bytes.size() >= 8 && bytes.substr(0, 8) == "\x89PNG\r\n\x1a\n") return "image/png";
    if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xff\xd8\xff") return "image/jpeg";
    if (bytes.size() >= 2 && bytes.substr(0, 2) == "P6") return "image/x-portable-pixmap";
    return "application/octet-stream";
}

/// Registers the API routes on an httplib server.
inline void install_routes(httplib::Server& server, StorylineService& service) {
    using httplib::Request;
    using httplib::Response;
    auto send_json = [](Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    };
    auto guarded = [send_json](auto handler) {
        return [handler, send_json](const Request& req, Response& res) {
            try {
                handler(req, res);
            } catch (const Error& e) {
                send_json(res, http_status(e.code()), error_to_json(e));
            } catch (const nlohmann::json::exception& e) {
                send_json(res, 400, error_to_json(ErrorCode::Parse, e.what()));
            } catch (const std::exception& e) {
                send_json(res, 500, error_to_json(ErrorCode::Io, e.what()));
            }
        };
    };
    auto body_json = [](const Request& req) {
        try {
            return nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse, std::string("request body: ") + e.what());
        }
    };

    server.Get("/health", [](const Request&, Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });

    server.Post("/sessions", guarded([&service, send_json, body_json](const Request& req, Response& res) {
        const auto body = body_json(req);
        const auto story = story_from_json(body.contains("story") ? body.at("story") : body);
        std::optional<std::size_t> k;
        if (body.contains("k")) {
            const auto v = body.at("k").get<long long>();
            if (v <= 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
            k = static_cast<std::size_t>(v);
        }
        send_json(res, 201, session_to_json(service.create_session(story, k)));
    }));

    server.Get(R"(/sessions/([0-9a-f]+))", guarded([&service, send_json](const Request& req, Response& res) {
        send_json(res, 200, session_to_json(service.get_session(req.matches[1])));
    }));

    server.Get(R"(/sessions/([0-9a-f]+)/solutions)", guarded([&service](const Request& req, Response& res) {
        const std::string method = req.has_param("method") ? req.get_param_value("method") : "all";
        res.set_content(service.solutions(req.matches[1], method), "application/json");
    }));

    server.Patch(R"(/sessions/([0-9a-f]+)/constraints)",
                 guarded([&service, send_json, body_json](const Request& req, Response& res) {
                     send_json(res, 200, session_to_json(service.update_constraints(req.matches[1], body_json(req))));
                 }));

    server.Post(R"(/sessions/([0-9a-f]+)/votes)",
                guarded([&service, send_json, body_json](const Request& req, Response& res) {
                    const auto v = service.record_vote(req.matches[1], body_json(req));
                    send_json(res, 201,
                              {{"schema", kVoteSchema},
                               {"session_id", v.session_id},
                               {"image_a", v.vote.pair.image_a},
                               {"image_b", v.vote.pair.image_b},
                               {"annotator", v.vote.annotator},
                               {"vote", v.vote.vote},
                               {"timestamp", v.timestamp}});
                }));

    server.Get(R"(/sessions/([0-9a-f]+)/votes)", guarded([&service](const Request& req, Response& res) {
        service.get_session(req.matches[1]);
        res.set_content(votes_to_csv(service.votes(std::string(req.matches[1]))), "text/csv");
    }));

    server.Get("/votes/export", guarded([&service](const Request&, Response& res) {
        res.set_content(training_pairs_to_csv(service.export_training_pairs()), "text/csv");
    }));

    server.Get(R"(/media/([0-9a-fA-F]{64}))", guarded([&service](const Request& req, Response& res) {
        const auto path = service.media_path(req.matches[1]);
        if (!path) throw Error(ErrorCode::NotFound, "no media for " + std::string(req.matches[1]));
        const auto bytes = read_file(*path);
        res.set_content(bytes, media_content_type(bytes));
    }));
}

}  // namespace storyline
