#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <random>
#include <set>

#include <spdlog/spdlog.h>

#include "noisygate/format.hpp"
#include "noisygate/service.hpp"

namespace noisygate::service {

std::string_view to_string(SessionStatus status) noexcept {
  return status == SessionStatus::Active ? "active" : "finished";
}

std::string utc_timestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(ms));
  return buf.data();
}

std::string random_token() {
  static constexpr char kHex[] = "0123456789abcdef";
  std::random_device rd;
  std::string out;
  out.reserve(32);
  for (int i = 0; i < 4; ++i) {
    std::uint32_t word = rd();
    for (int j = 0; j < 8; ++j) {
      out += kHex[word & 0xF];
      word >>= 4;
    }
  }
  return out;
}

EvidenceSet history_evidence(const AssessmentModel& model,
                             const std::vector<AnswerRecord>& history) {
  EvidenceSet evidence;
  for (const auto& answer : history) {
    const NoisyGate* gate = model.find_gate(answer.gate_id);
    if (!gate) throw NotFoundError("unknown gate '" + answer.gate_id + "'");
    evidence[answer.gate_id] = outcome_for_answer(gate->kind, answer.correct);
  }
  return evidence;
}

// ---------------------------------------------------------------------------

ModelRegistry::ModelRegistry(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::error_code ec;
  if (!std::filesystem::is_directory(*directory_, ec)) {
    spdlog::warn("models directory '{}' does not exist", directory_->string());
    return;
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(*directory_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    try {
      add(path.stem().string(), load_model_file(path));
      spdlog::info("loaded model '{}' from {}", path.stem().string(), path.string());
    } catch (const Error& e) {
      spdlog::error("skipping model file {}: {}", path.string(), e.what());
    }
  }
}

void ModelRegistry::add(std::string id, AssessmentModel model) {
  std::unique_lock lock(mutex_);
  models_[std::move(id)] = std::make_shared<const AssessmentModel>(std::move(model));
}

std::shared_ptr<const AssessmentModel> ModelRegistry::get(std::string_view id) {
  {
    std::shared_lock lock(mutex_);
    if (auto it = models_.find(id); it != models_.end()) return it->second;
  }
  const bool safe_id = !id.empty() && id.find_first_of("/\\") == std::string_view::npos &&
                       id != "." && id != "..";
  if (directory_ && safe_id) {
    const auto path = *directory_ / (std::string(id) + ".json");
    std::error_code ec;
    if (std::filesystem::is_regular_file(path, ec)) {
      auto model = load_model_file(path);
      spdlog::info("loaded model '{}' on demand", id);
      std::unique_lock lock(mutex_);
      auto [it, inserted] = models_.try_emplace(
          std::string(id), std::make_shared<const AssessmentModel>(std::move(model)));
      return it->second;
    }
  }
  throw NotFoundError("unknown model '" + std::string(id) + "'");
}

std::vector<ModelSummary> ModelRegistry::list() const {
  std::shared_lock lock(mutex_);
  std::vector<ModelSummary> out;
  for (const auto& [id, model] : models_) {
    out.push_back({id, model->name, model->version, model->skills.size(), model->gates.size()});
  }
  return out;
}

// ---------------------------------------------------------------------------

SessionService::SessionService(ModelRegistry& models, SessionStore& store,
                               InferenceOptions options)
    : models_(models), store_(store), options_(options) {}

std::vector<ModelSummary> SessionService::list_models() const { return models_.list(); }

std::shared_ptr<const AssessmentModel> SessionService::model(std::string_view model_id) {
  return models_.get(model_id);
}

Session SessionService::evaluate(const AssessmentModel& model, Session draft) const {
  const EvidenceSet evidence = history_evidence(model, draft.history);
  draft.posteriors = infer_posteriors(model, evidence, options_);
  std::set<std::string, std::less<>> answered;
  for (const auto& a : draft.history) answered.insert(a.gate_id);
  draft.suggested_next.reset();
  if (answered.size() >= model.gates.size()) {
    draft.status = SessionStatus::Finished;
    return draft;
  }
  draft.status = SessionStatus::Active;
  try {
    draft.suggested_next = suggest_next_question(model, evidence, answered, options_);
  } catch (const CapacityError& e) {
    spdlog::warn("session {}: no suggestion: {}", draft.id, e.what());
  }
  return draft;
}

std::shared_ptr<SessionService::Entry> SessionService::find(std::string_view session_id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    throw NotFoundError("unknown session '" + std::string(session_id) + "'");
  }
  return it->second;
}

Session SessionService::create_session(std::string_view model_id) {
  auto model = models_.get(model_id);
  Session draft;
  draft.id = random_token();
  draft.model_id = std::string(model_id);
  draft.created_at = utc_timestamp();
  Session session = evaluate(*model, std::move(draft));

  store_.insert_session({session.id, session.model_id, session.created_at, {}});
  auto entry = std::make_shared<Entry>();
  entry->session = session;
  entry->model = std::move(model);
  {
    std::unique_lock lock(sessions_mutex_);
    sessions_.emplace(session.id, std::move(entry));
  }
  spdlog::info("session {} created on model '{}'", session.id, session.model_id);
  return session;
}

Session SessionService::post_answer(std::string_view session_id, std::string_view gate_id,
                                    bool correct) {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  const Session& current = entry->session;
  if (!entry->model->find_gate(gate_id)) {
    throw NotFoundError("model '" + current.model_id + "' has no gate '" +
                        std::string(gate_id) + "'");
  }
  if (current.status == SessionStatus::Finished) {
    throw ConflictError("session '" + current.id + "' is finished");
  }
  for (const auto& a : current.history) {
    if (a.gate_id == gate_id) {
      throw ConflictError("gate '" + std::string(gate_id) + "' already answered in session '" +
                          current.id + "'");
    }
  }

  Session draft = current;
  AnswerRecord record{std::string(gate_id), correct, utc_timestamp()};
  draft.history.push_back(record);
  Session next = evaluate(*entry->model, std::move(draft));

  store_.append_answer(current.id, current.history.size(), record);
  entry->session = std::move(next);
  spdlog::debug("session {} answered {} = {}", current.id, record.gate_id,
                correct ? "yes" : "no");
  return entry->session;
}

Session SessionService::get_state(std::string_view session_id) const {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  return entry->session;
}

std::size_t SessionService::restore() {
  std::size_t restored = 0;
  for (auto& stored : store_.load_all()) {
    try {
      auto model = models_.get(stored.model_id);
      Session draft;
      draft.id = stored.id;
      draft.model_id = stored.model_id;
      draft.created_at = stored.created_at;
      draft.history = std::move(stored.history);
      auto entry = std::make_shared<Entry>();
      entry->session = evaluate(*model, std::move(draft));
      entry->model = std::move(model);
      std::unique_lock lock(sessions_mutex_);
      sessions_[stored.id] = std::move(entry);
      ++restored;
    } catch (const Error& e) {
      spdlog::warn("session {} not restored: {}", stored.id, e.what());
    }
  }
  spdlog::info("restored {} session(s)", restored);
  return restored;
}

std::size_t SessionService::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

}  // namespace noisygate::service
