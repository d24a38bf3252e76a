#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <sqlite3.h>

#include "ragonite/conversation/conversation.hpp"
#include "ragonite/service/config.hpp"

namespace ragonite::service {

inline constexpr int kSchemaVersion = 1;

namespace detail {

class Statement {
public:
    Statement(sqlite3* db, const char* sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK)
            throw CorruptStore(std::string("cannot prepare statement: ") + sqlite3_errmsg(db),
                               "the store file may be damaged; restore a backup or start a fresh store");
    }
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;
    ~Statement() { sqlite3_finalize(stmt_); }

    Statement& bind(int i, const std::string& v) {
        sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
        return *this;
    }
    Statement& bind(int i, std::int64_t v) {
        sqlite3_bind_int64(stmt_, i, v);
        return *this;
    }

    /// Steps once; true while a row is available.
    bool step() {
        const int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw Error(std::string("store error: ") + sqlite3_errmsg(db_));
    }

    std::string text(int col) const {
        const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
        return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col))) : std::string();
    }
    std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }

private:
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

}  // namespace detail

/// Single-file SQLite store for conversations, turns, traces, attribution
/// reports and config versions. All methods are thread-safe and every write
/// is one transaction.
class Store {
public:
    explicit Store(const std::filesystem::path& path) {
        if (sqlite3_open_v2(path.string().c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr) !=
            SQLITE_OK) {
            const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
            sqlite3_close(db_);
            throw CorruptStore("cannot open store " + path.string() + ": " + msg, "check the path and permissions");
        }
        sqlite3_busy_timeout(db_, 5000);
        try {
            init();
        } catch (...) {
            sqlite3_close(db_);
            throw;
        }
    }
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;
    ~Store() { sqlite3_close(db_); }

    int schema_version() {
        std::lock_guard lock(mu_);
        return user_version();
    }

    // Conversations

    conversation::Conversation create_conversation(const std::string& domain) {
        std::lock_guard lock(mu_);
        Tx tx(*this);
        detail::Statement count(db_, "SELECT COUNT(*) FROM conversations");
        count.step();
        const auto n = count.integer(0) + 1;
        char id[32];
        std::snprintf(id, sizeof id, "conv-%06lld", static_cast<long long>(n));
        conversation::Conversation c{id, domain, {}, false, conversation::now_iso8601()};
        detail::Statement ins(db_, "INSERT INTO conversations(id, domain, deleted, created_at) VALUES(?, ?, 0, ?)");
        ins.bind(1, c.id).bind(2, c.domain).bind(3, c.created_at).step();
        tx.commit();
        return c;
    }

    std::optional<conversation::Conversation> find_conversation(const std::string& id) {
        std::lock_guard lock(mu_);
        detail::Statement q(db_, "SELECT id, domain, deleted, created_at FROM conversations WHERE id = ?");
        q.bind(1, id);
        if (!q.step()) return std::nullopt;
        conversation::Conversation c{q.text(0), q.text(1), {}, q.integer(2) != 0, q.text(3)};
        c.turns = load_turns(c.id);
        return c;
    }

    conversation::Conversation conversation(const std::string& id) {
        auto c = find_conversation(id);
        if (!c) throw NotFound("conversation " + id);
        return *c;
    }

    std::vector<conversation::Conversation> list_conversations(bool include_deleted) {
        std::vector<std::string> ids;
        {
            std::lock_guard lock(mu_);
            detail::Statement q(db_, include_deleted ? "SELECT id FROM conversations ORDER BY id"
                                                     : "SELECT id FROM conversations WHERE deleted = 0 ORDER BY id");
            while (q.step()) ids.push_back(q.text(0));
        }
        std::vector<conversation::Conversation> out;
        for (const auto& id : ids) out.push_back(conversation(id));
        return out;
    }

    void soft_delete(const std::string& id) {
        std::lock_guard lock(mu_);
        detail::Statement q(db_, "UPDATE conversations SET deleted = 1 WHERE id = ?");
        q.bind(1, id).step();
        if (sqlite3_changes(db_) == 0) throw NotFound("conversation " + id);
    }

    // Turns and traces

    /// Appends a turn and its trace atomically.
    void append_turn(const std::string& conversation_id, const conversation::ConversationTurn& turn,
                     const conversation::TraceRecord& trace) {
        std::lock_guard lock(mu_);
        Tx tx(*this);
        detail::Statement ins(db_, "INSERT INTO turns(id, conversation_id, idx, body) VALUES(?, ?, ?, ?)");
        ins.bind(1, turn.id).bind(2, conversation_id).bind(3, std::int64_t{turn.index}).bind(4, nlohmann::json(turn).dump());
        ins.step();
        put_trace_locked(trace);
        tx.commit();
    }

    void update_turn(const conversation::ConversationTurn& turn) {
        std::lock_guard lock(mu_);
        detail::Statement q(db_, "UPDATE turns SET body = ? WHERE id = ?");
        q.bind(1, nlohmann::json(turn).dump()).bind(2, turn.id).step();
        if (sqlite3_changes(db_) == 0) throw UnknownTurn("turn " + turn.id);
    }

    /// (conversation id, turn) for a turn id.
    std::pair<std::string, conversation::ConversationTurn> turn(const std::string& turn_id) {
        std::lock_guard lock(mu_);
        detail::Statement q(db_, "SELECT conversation_id, body FROM turns WHERE id = ?");
        q.bind(1, turn_id);
        if (!q.step()) throw NotFound("turn " + turn_id);
        return {q.text(0), parse<conversation::ConversationTurn>(q.text(1))};
    }

    conversation::TraceRecord trace(const std::string& turn_id) {
        std::lock_guard lock(mu_);
        detail::Statement q(db_, "SELECT body FROM traces WHERE turn_id = ?");
        q.bind(1, turn_id);
        if (!q.step()) throw NotFound("trace for turn " + turn_id);
        return parse<conversation::TraceRecord>(q.text(0));
    }

    /// Stores a finished attribution report, records it in the turn's trace and
    /// references it from the turn, in one transaction.
    std::string put_attribution(const std::string& turn_id, const attribution::AttributionReport& report) {
        std::lock_guard lock(mu_);
        Tx tx(*this);
        const std::string method(attribution::to_string(report.method));
        const std::string id = turn_id + "-" + method;
        detail::Statement ins(db_, "INSERT OR REPLACE INTO attributions(id, turn_id, method, body) VALUES(?, ?, ?, ?)");
        ins.bind(1, id).bind(2, turn_id).bind(3, method).bind(4, nlohmann::json(report).dump()).step();

        detail::Statement tq(db_, "SELECT body FROM turns WHERE id = ?");
        tq.bind(1, turn_id);
        if (!tq.step()) throw NotFound("turn " + turn_id);
        auto t = parse<conversation::ConversationTurn>(tq.text(0));
        t.attribution_refs[method] = id;
        detail::Statement up(db_, "UPDATE turns SET body = ? WHERE id = ?");
        up.bind(1, nlohmann::json(t).dump()).bind(2, turn_id).step();

        detail::Statement trq(db_, "SELECT body FROM traces WHERE turn_id = ?");
        trq.bind(1, turn_id);
        if (trq.step()) {
            auto tr = parse<conversation::TraceRecord>(trq.text(0));
            tr.attribution[method] = report;
            put_trace_locked(tr);
        }
        tx.commit();
        return id;
    }

    std::optional<attribution::AttributionReport> attribution(const std::string& turn_id,
                                                              attribution::Method method) {
        std::lock_guard lock(mu_);
        detail::Statement q(db_, "SELECT body FROM attributions WHERE turn_id = ? AND method = ?");
        q.bind(1, turn_id).bind(2, std::string(attribution::to_string(method)));
        if (!q.step()) return std::nullopt;
        return parse<attribution::AttributionReport>(q.text(0));
    }

    // Config versions

    std::optional<RuntimeConfig> latest_config() {
        std::lock_guard lock(mu_);
        detail::Statement q(db_, "SELECT body FROM configs ORDER BY version DESC LIMIT 1");
        if (!q.step()) return std::nullopt;
        return parse<RuntimeConfig>(q.text(0));
    }

    std::optional<RuntimeConfig> config(int version) {
        std::lock_guard lock(mu_);
        detail::Statement q(db_, "SELECT body FROM configs WHERE version = ?");
        q.bind(1, std::int64_t{version});
        if (!q.step()) return std::nullopt;
        return parse<RuntimeConfig>(q.text(0));
    }

    /// Stores `cfg` under the next version number and returns it with that version.
    RuntimeConfig add_config(RuntimeConfig cfg) {
        std::lock_guard lock(mu_);
        Tx tx(*this);
        detail::Statement q(db_, "SELECT COALESCE(MAX(version), 0) FROM configs");
        q.step();
        cfg.version = static_cast<int>(q.integer(0)) + 1;
        detail::Statement ins(db_, "INSERT INTO configs(version, body, created_at) VALUES(?, ?, ?)");
        ins.bind(1, std::int64_t{cfg.version}).bind(2, nlohmann::json(cfg).dump()).bind(3, conversation::now_iso8601());
        ins.step();
        tx.commit();
        return cfg;
    }

private:
    sqlite3* db_ = nullptr;
    std::mutex mu_;

    struct Tx {
        explicit Tx(Store& s) : s_(s) { s_.exec("BEGIN IMMEDIATE"); }
        void commit() {
            s_.exec("COMMIT");
            done_ = true;
        }
        ~Tx() {
            if (!done_) sqlite3_exec(s_.db_, "ROLLBACK", nullptr, nullptr, nullptr);
        }
        Store& s_;
        bool done_ = false;
    };

    void exec(const char* sql) {
        char* err = nullptr;
        if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : "unknown error";
            sqlite3_free(err);
            throw Error(std::string("store error: ") + msg);
        }
    }

    int user_version() {
        detail::Statement q(db_, "PRAGMA user_version");
        q.step();
        return static_cast<int>(q.integer(0));
    }

    void init() {
        // Reading the schema fails on files that are not SQLite databases.
        int tables = 0;
        try {
            detail::Statement q(db_, "SELECT COUNT(*) FROM sqlite_master WHERE type = 'table'");
            q.step();
            tables = static_cast<int>(q.integer(0));
        } catch (const Error& e) {
            throw CorruptStore(std::string("store is not a valid database: ") + e.what(),
                               "move the file aside and start a fresh store");
        }
        const int version = user_version();
        if (tables == 0 && version == 0) {
            exec("PRAGMA journal_mode = WAL");
            exec(R"(BEGIN;
                CREATE TABLE conversations(id TEXT PRIMARY KEY, domain TEXT NOT NULL,
                                           deleted INTEGER NOT NULL DEFAULT 0, created_at TEXT NOT NULL);
                CREATE TABLE turns(id TEXT PRIMARY KEY, conversation_id TEXT NOT NULL REFERENCES conversations(id),
                                   idx INTEGER NOT NULL, body TEXT NOT NULL, UNIQUE(conversation_id, idx));
                CREATE TABLE traces(turn_id TEXT PRIMARY KEY, body TEXT NOT NULL);
                CREATE TABLE attributions(id TEXT PRIMARY KEY, turn_id TEXT NOT NULL, method TEXT NOT NULL,
                                          body TEXT NOT NULL);
                CREATE TABLE configs(version INTEGER PRIMARY KEY, body TEXT NOT NULL, created_at TEXT NOT NULL);
                PRAGMA user_version = 1;
                COMMIT;)");
            return;
        }
        if (version != kSchemaVersion)
            throw CorruptStore("store schema version " + std::to_string(version) + " is not supported (expected " +
                                   std::to_string(kSchemaVersion) + ")",
                               version < kSchemaVersion ? "export the old store with the matching release or start a fresh store"
                                                        : "open it with a newer release");
    }

    std::vector<conversation::ConversationTurn> load_turns(const std::string& conversation_id) {
        detail::Statement q(db_, "SELECT body FROM turns WHERE conversation_id = ? ORDER BY idx");
        q.bind(1, conversation_id);
        std::vector<conversation::ConversationTurn> out;
        while (q.step()) out.push_back(parse<conversation::ConversationTurn>(q.text(0)));
        return out;
    }

    void put_trace_locked(const conversation::TraceRecord& trace) {
        detail::Statement q(db_, "INSERT OR REPLACE INTO traces(turn_id, body) VALUES(?, ?)");
        q.bind(1, trace.turn_id).bind(2, nlohmann::json(trace).dump()).step();
    }

    template <class T>
    static T parse(const std::string& body) {
        try {
            return nlohmann::json::parse(body).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw CorruptStore(std::string("unreadable record in store: ") + e.what(),
                               "restore a backup of the store file");
        }
    }
};

}  // namespace ragonite::service
