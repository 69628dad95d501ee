#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "noisygate/errors.hpp"
#include "noisygate/inference.hpp"
#include "noisygate/model.hpp"

namespace noisygate::service {

/// Unknown session, model or gate.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// The request clashes with the session state (repeated gate, finished
/// session).
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// Malformed request payload.
class BadRequestError : public Error {
 public:
  using Error::Error;
};

enum class SessionStatus { Active, Finished };

std::string_view to_string(SessionStatus status) noexcept;

struct AnswerRecord {
  std::string gate_id;
  /// True for "yes" (answered correctly).
  bool correct = false;
  /// ISO 8601 UTC.
  std::string answered_at;

  bool operator==(const AnswerRecord&) const = default;
};

struct Session {
  std::string id;
  std::string model_id;
  std::string created_at;
  std::vector<AnswerRecord> history;
  std::vector<SkillPosterior> posteriors;
  SessionStatus status = SessionStatus::Active;
  std::optional<std::string> suggested_next;
};

struct ModelSummary {
  std::string id;
  std::string name;
  std::string version;
  std::size_t skill_count = 0;
  std::size_t gate_count = 0;
};

/// Current UTC time as "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string utc_timestamp();

/// 32 hex characters from the system entropy source.
std::string random_token();

/// Evidence equivalent of an answer history.
EvidenceSet history_evidence(const AssessmentModel& model,
                             const std::vector<AnswerRecord>& history);

/// Models keyed by id. Models found in the directory at construction are
/// loaded eagerly; an id not yet known is looked up as "<dir>/<id>.json".
class ModelRegistry {
 public:
  ModelRegistry() = default;
  explicit ModelRegistry(std::filesystem::path directory);

  void add(std::string id, AssessmentModel model);
  /// Throws NotFoundError.
  std::shared_ptr<const AssessmentModel> get(std::string_view id);
  std::vector<ModelSummary> list() const;

 private:
  std::optional<std::filesystem::path> directory_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const AssessmentModel>, std::less<>> models_;
};

struct StoredSession {
  std::string id;
  std::string model_id;
  std::string created_at;
  std::vector<AnswerRecord> history;
};

/// Durable session log in SQLite (WAL journal, synchronous=FULL). Thread
/// safe.
class SessionStore {
 public:
  /// ":memory:" gives a private in-memory store.
  explicit SessionStore(const std::filesystem::path& database);
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  void insert_session(const StoredSession& session);
  /// Appends to the history; `sequence` is the 0-based answer index.
  void append_answer(std::string_view session_id, std::size_t sequence,
                     const AnswerRecord& answer);
  std::optional<StoredSession> load(std::string_view session_id) const;
  std::vector<StoredSession> load_all() const;
  std::string journal_mode() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Interactive sessions over registered models. Operations on one session
/// are serialised; different sessions proceed in parallel.
class SessionService {
 public:
  SessionService(ModelRegistry& models, SessionStore& store, InferenceOptions options = {});

  std::vector<ModelSummary> list_models() const;
  /// Throws NotFoundError.
  std::shared_ptr<const AssessmentModel> model(std::string_view model_id);

  Session create_session(std::string_view model_id);
  /// Throws NotFoundError, ConflictError or InconsistentEvidenceError; the
  /// session is unchanged on any error.
  Session post_answer(std::string_view session_id, std::string_view gate_id, bool correct);
  Session get_state(std::string_view session_id) const;

  /// Rebuilds every stored session by replaying its history and returns how
  /// many were restored. Sessions whose model or history no longer resolves
  /// are skipped with a warning.
  std::size_t restore();
  std::size_t session_count() const;

 private:
  struct Entry {
    mutable std::mutex mutex;
    Session session;
    std::shared_ptr<const AssessmentModel> model;
  };

  std::shared_ptr<Entry> find(std::string_view session_id) const;
  /// Fills posteriors, suggestion and status from `draft.history`.
  Session evaluate(const AssessmentModel& model, Session draft) const;

  ModelRegistry& models_;
  SessionStore& store_;
  InferenceOptions options_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>, std::less<>> sessions_;
};

}  // namespace noisygate::service
