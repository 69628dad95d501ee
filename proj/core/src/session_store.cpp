#include <mutex>

#include <sqlite3.h>

#include "noisygate/service.hpp"

namespace noisygate::service {

namespace {

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
      throw IoError(std::string("session store: ") + sqlite3_errmsg(db));
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  void bind(int index, std::string_view text) {
    sqlite3_bind_text(stmt_, index, text.data(), static_cast<int>(text.size()), SQLITE_TRANSIENT);
  }
  void bind(int index, long long value) { sqlite3_bind_int64(stmt_, index, value); }

  /// True while a row is available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw IoError(std::string("session store: ") + sqlite3_errmsg(db_));
  }

  std::string text(int column) const {
    const auto* p = sqlite3_column_text(stmt_, column);
    return p ? std::string(reinterpret_cast<const char*>(p)) : std::string{};
  }
  long long integer(int column) const { return sqlite3_column_int64(stmt_, column); }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

void exec(sqlite3* db, const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string message = err ? err : "unknown error";
    sqlite3_free(err);
    throw IoError("session store: " + message);
  }
}

}  // namespace

struct SessionStore::Impl {
  sqlite3* db = nullptr;
  mutable std::mutex mutex;

  std::vector<AnswerRecord> history(std::string_view session_id) const {
    Statement q(db,
                "SELECT gate_id, answer, answered_at FROM answers WHERE session_id = ?1 "
                "ORDER BY seq");
    q.bind(1, session_id);
    std::vector<AnswerRecord> out;
    while (q.step()) out.push_back({q.text(0), q.text(1) == "yes", q.text(2)});
    return out;
  }
};

SessionStore::SessionStore(const std::filesystem::path& database) : impl_(std::make_unique<Impl>()) {
  const int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
  if (sqlite3_open_v2(database.string().c_str(), &impl_->db, flags, nullptr) != SQLITE_OK) {
    std::string message = impl_->db ? sqlite3_errmsg(impl_->db) : "out of memory";
    sqlite3_close(impl_->db);
    throw IoError("cannot open session store '" + database.string() + "': " + message);
  }
  sqlite3_busy_timeout(impl_->db, 5000);
  exec(impl_->db, "PRAGMA journal_mode=WAL;");
  exec(impl_->db, "PRAGMA synchronous=FULL;");
  exec(impl_->db, "PRAGMA foreign_keys=ON;");
  exec(impl_->db,
       "CREATE TABLE IF NOT EXISTS sessions ("
       "  id TEXT PRIMARY KEY,"
       "  model_id TEXT NOT NULL,"
       "  created_at TEXT NOT NULL);"
       "CREATE TABLE IF NOT EXISTS answers ("
       "  session_id TEXT NOT NULL REFERENCES sessions(id),"
       "  seq INTEGER NOT NULL,"
       "  gate_id TEXT NOT NULL,"
       "  answer TEXT NOT NULL CHECK (answer IN ('yes', 'no')),"
       "  answered_at TEXT NOT NULL,"
       "  PRIMARY KEY (session_id, seq),"
       "  UNIQUE (session_id, gate_id));");
}

SessionStore::~SessionStore() { sqlite3_close(impl_->db); }

void SessionStore::insert_session(const StoredSession& session) {
  std::lock_guard lock(impl_->mutex);
  exec(impl_->db, "BEGIN IMMEDIATE;");
  try {
    Statement ins(impl_->db, "INSERT INTO sessions (id, model_id, created_at) VALUES (?1, ?2, ?3)");
    ins.bind(1, session.id);
    ins.bind(2, session.model_id);
    ins.bind(3, session.created_at);
    ins.step();
    for (std::size_t i = 0; i < session.history.size(); ++i) {
      const auto& a = session.history[i];
      Statement ans(impl_->db,
                    "INSERT INTO answers (session_id, seq, gate_id, answer, answered_at) "
                    "VALUES (?1, ?2, ?3, ?4, ?5)");
      ans.bind(1, session.id);
      ans.bind(2, static_cast<long long>(i));
      ans.bind(3, a.gate_id);
      ans.bind(4, a.correct ? "yes" : "no");
      ans.bind(5, a.answered_at);
      ans.step();
    }
    exec(impl_->db, "COMMIT;");
  } catch (...) {
    exec(impl_->db, "ROLLBACK;");
    throw;
  }
}

void SessionStore::append_answer(std::string_view session_id, std::size_t sequence,
                                 const AnswerRecord& answer) {
  std::lock_guard lock(impl_->mutex);
  Statement ins(impl_->db,
                "INSERT INTO answers (session_id, seq, gate_id, answer, answered_at) "
                "VALUES (?1, ?2, ?3, ?4, ?5)");
  ins.bind(1, session_id);
  ins.bind(2, static_cast<long long>(sequence));
  ins.bind(3, answer.gate_id);
  ins.bind(4, answer.correct ? "yes" : "no");
  ins.bind(5, answer.answered_at);
  ins.step();
}

std::optional<StoredSession> SessionStore::load(std::string_view session_id) const {
  std::lock_guard lock(impl_->mutex);
  Statement q(impl_->db, "SELECT id, model_id, created_at FROM sessions WHERE id = ?1");
  q.bind(1, session_id);
  if (!q.step()) return std::nullopt;
  StoredSession s{q.text(0), q.text(1), q.text(2), {}};
  s.history = impl_->history(s.id);
  return s;
}

std::vector<StoredSession> SessionStore::load_all() const {
  std::lock_guard lock(impl_->mutex);
  Statement q(impl_->db, "SELECT id, model_id, created_at FROM sessions ORDER BY created_at, id");
  std::vector<StoredSession> out;
  while (q.step()) out.push_back({q.text(0), q.text(1), q.text(2), {}});
  for (auto& s : out) s.history = impl_->history(s.id);
  return out;
}

std::string SessionStore::journal_mode() const {
  std::lock_guard lock(impl_->mutex);
  Statement q(impl_->db, "PRAGMA journal_mode;");
  return q.step() ? q.text(0) : std::string{};
}

}  // namespace noisygate::service
