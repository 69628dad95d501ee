#include <atomic>
#include <filesystem>
#include <thread>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "noisygate/service.hpp"

namespace noisygate::service {
namespace {

class ScratchDir {
 public:
  ScratchDir() {
    path_ = std::filesystem::temp_directory_path() / ("noisygate-test-" + random_token());
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

class SessionServiceTest : public ::testing::Test {
 protected:
  SessionServiceTest() : store_(":memory:"), service_(registry_, store_) {
    registry_.add("cat", testing::cat_model());
  }

  ModelRegistry registry_;
  SessionStore store_;
  SessionService service_;
};

TEST_F(SessionServiceTest, ListsModels) {
  const auto models = service_.list_models();
  ASSERT_EQ(models.size(), 1u);
  EXPECT_EQ(models[0].id, "cat");
  EXPECT_EQ(models[0].skill_count, 6u);
  EXPECT_EQ(models[0].gate_count, 66u);
}

TEST_F(SessionServiceTest, FreshSessionHasUniformPosteriors) {
  const auto s = service_.create_session("cat");
  EXPECT_EQ(s.id.size(), 32u);
  EXPECT_EQ(s.status, SessionStatus::Active);
  ASSERT_EQ(s.posteriors.size(), 6u);
  for (const auto& p : s.posteriors) EXPECT_EQ(p.posterior_true, 0.5);
  EXPECT_TRUE(s.suggested_next.has_value());
  EXPECT_EQ(s.created_at.size(), 24u);
  EXPECT_EQ(s.created_at.back(), 'Z');
}

TEST_F(SessionServiceTest, PosteriorsAreBitIdenticalToLibrary) {
  const auto s0 = service_.create_session("cat");
  service_.post_answer(s0.id, "3.2", true);
  service_.post_answer(s0.id, "5.1", false);
  const auto s = service_.get_state(s0.id);

  const auto model = testing::cat_model();
  const EvidenceSet ev{{"3.2", Outcome::Distinguished}, {"5.1", Outcome::NonDistinguished}};
  const auto direct = infer_posteriors(model, ev);
  EXPECT_EQ(s.posteriors, direct);
  std::set<std::string, std::less<>> answered{"3.2", "5.1"};
  EXPECT_EQ(s.suggested_next, suggest_next_question(model, ev, answered));
}

TEST_F(SessionServiceTest, DuplicateAnswerIsConflictAndChangesNothing) {
  const auto s = service_.create_session("cat");
  const auto after_first = service_.post_answer(s.id, "1.1", true);
  EXPECT_THROW(service_.post_answer(s.id, "1.1", false), ConflictError);
  const auto now = service_.get_state(s.id);
  EXPECT_EQ(now.history, after_first.history);
  EXPECT_EQ(now.posteriors, after_first.posteriors);
  EXPECT_EQ(store_.load(s.id)->history.size(), 1u);
}

TEST_F(SessionServiceTest, UnknownIdsAreNotFound) {
  EXPECT_THROW(service_.create_session("nope"), NotFoundError);
  EXPECT_THROW(service_.get_state("nope"), NotFoundError);
  const auto s = service_.create_session("cat");
  EXPECT_THROW(service_.post_answer(s.id, "12.1", true), NotFoundError);
  EXPECT_THROW(service_.post_answer("nope", "1.1", true), NotFoundError);
}

TEST_F(SessionServiceTest, InconsistentAnswerIsRejectedWithGates) {
  AssessmentModel strict;
  strict.name = "strict";
  strict.skills = {{"a", "", 0.5}};
  strict.gates = {{"pass", GateKind::And, {{"a", 1.0}}, std::nullopt, ""},
                  {"fail", GateKind::And, {{"a", 1.0}}, std::nullopt, ""}};
  registry_.add("strict", strict);
  const auto s = service_.create_session("strict");
  service_.post_answer(s.id, "pass", true);
  try {
    service_.post_answer(s.id, "fail", false);
    FAIL() << "expected InconsistentEvidenceError";
  } catch (const InconsistentEvidenceError& e) {
    EXPECT_EQ(e.gates(), (std::vector<std::string>{"pass", "fail"}));
  }
  EXPECT_EQ(service_.get_state(s.id).history.size(), 1u);
  EXPECT_EQ(store_.load(s.id)->history.size(), 1u);
}

TEST_F(SessionServiceTest, FinishedSessionRejectsAnswers) {
  AssessmentModel tiny;
  tiny.name = "tiny";
  tiny.skills = {{"a", "", 0.5}};
  tiny.gates = {{"only", GateKind::Or, {{"a", 0.5}}, std::nullopt, ""}};
  registry_.add("tiny", tiny);
  const auto s = service_.create_session("tiny");
  EXPECT_EQ(s.suggested_next, "only");
  const auto done = service_.post_answer(s.id, "only", true);
  EXPECT_EQ(done.status, SessionStatus::Finished);
  EXPECT_FALSE(done.suggested_next.has_value());
  EXPECT_THROW(service_.post_answer(s.id, "only", true), ConflictError);
}

TEST_F(SessionServiceTest, ConcurrentAnswersOnOneSessionAreSerialised) {
  const auto s = service_.create_session("cat");
  std::atomic<int> accepted{0};
  std::atomic<int> conflicts{0};
  std::vector<std::thread> workers;
  for (int t = 0; t < 8; ++t) {
    workers.emplace_back([&, t] {
      for (int q = 1; q <= 4; ++q) {
        try {
          service_.post_answer(s.id, std::to_string(q) + ".1", (t + q) % 2 == 0);
          ++accepted;
        } catch (const ConflictError&) {
          ++conflicts;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(accepted.load(), 4);
  EXPECT_EQ(conflicts.load(), 28);
  const auto state = service_.get_state(s.id);
  EXPECT_EQ(state.history.size(), 4u);
  EXPECT_EQ(state.posteriors,
            infer_posteriors(testing::cat_model(), history_evidence(testing::cat_model(), state.history)));
}

TEST_F(SessionServiceTest, ConcurrentSessionsProceedIndependently) {
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(service_.create_session("cat").id);
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    workers.emplace_back([&, i] {
      for (int q = 1; q <= 6; ++q) service_.post_answer(ids[i], "2." + std::to_string(q), i % 2 == 0);
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& id : ids) EXPECT_EQ(service_.get_state(id).history.size(), 6u);
}

TEST(SessionPersistence, ReplayRestoresState) {
  ScratchDir dir;
  const auto db = dir.path() / "sessions.db";
  std::string id;
  Session before;
  {
    ModelRegistry registry;
    registry.add("cat", testing::cat_model());
    SessionStore store(db);
    EXPECT_EQ(store.journal_mode(), "wal");
    SessionService service(registry, store);
    id = service.create_session("cat").id;
    service.post_answer(id, "4.3", true);
    service.post_answer(id, "6.1", false);
    before = service.post_answer(id, "10.2", true);
  }
  ModelRegistry registry;
  registry.add("cat", testing::cat_model());
  SessionStore store(db);
  SessionService service(registry, store);
  EXPECT_EQ(service.restore(), 1u);
  const auto after = service.get_state(id);
  EXPECT_EQ(after.history, before.history);
  EXPECT_EQ(after.posteriors, before.posteriors);
  EXPECT_EQ(after.suggested_next, before.suggested_next);
  EXPECT_EQ(after.created_at, before.created_at);
}

TEST(SessionPersistence, SessionsOfMissingModelsAreSkipped) {
  ScratchDir dir;
  const auto db = dir.path() / "sessions.db";
  {
    ModelRegistry registry;
    registry.add("cat", testing::cat_model());
    SessionStore store(db);
    SessionService service(registry, store);
    service.create_session("cat");
  }
  ModelRegistry empty;
  SessionStore store(db);
  SessionService service(empty, store);
  EXPECT_EQ(service.restore(), 0u);
  EXPECT_EQ(service.session_count(), 0u);
}

TEST(ModelRegistryTest, LoadsDirectoryAndOnDemand) {
  ScratchDir dir;
  std::filesystem::copy_file(testing::data_dir() / "cat_model.json", dir.path() / "cat.json");
  ModelRegistry registry(dir.path());
  ASSERT_EQ(registry.list().size(), 1u);
  EXPECT_EQ(registry.list()[0].id, "cat");

  std::filesystem::copy_file(testing::data_dir() / "cat_model.json", dir.path() / "later.json");
  EXPECT_EQ(registry.get("later")->gates.size(), 66u);
  EXPECT_EQ(registry.list().size(), 2u);
  EXPECT_THROW(registry.get("../cat"), NotFoundError);
  EXPECT_THROW(registry.get("absent"), NotFoundError);
}

}  // namespace
}  // namespace noisygate::service
