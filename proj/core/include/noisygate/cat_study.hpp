#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "noisygate/format.hpp"
#include "noisygate/inference.hpp"
#include "noisygate/model.hpp"

namespace noisygate::cat {

inline constexpr std::size_t kSkillCount = 6;
inline constexpr int kQuestionCount = 12;
inline constexpr int kSubQuestionCount = 6;

inline constexpr std::array<std::string_view, kSkillCount> kSkillIds{
    "X1", "X2", "X3", "X4", "X5", "X6"};
inline constexpr std::array<std::string_view, kSkillCount> kSkillNames{
    "simple patterns", "complex patterns", "repetitions",
    "symmetries",      "voice",            "prediction"};

/// Elicitation levels admitted for skill strengths and for the leak.
inline constexpr std::array<double, 5> kStrengthLevels{0.0, 0.2, 0.4, 0.7, 0.9};
inline constexpr std::array<double, 4> kLeakLevels{0.0, 0.2, 0.4, 0.7};

/// Published posterior rows for the four discussed pupils, skills X1..X6.
using PosteriorRow = std::array<double, kSkillCount>;
inline constexpr std::array<PosteriorRow, 4> kReferenceRows{{
    {0.93, 0.02, 0.06, 0.19, 0.94, 0.85},
    {1.00, 0.00, 0.08, 0.90, 1.00, 0.99},
    {1.00, 1.00, 1.00, 0.39, 1.00, 1.00},
    {0.45, 0.00, 0.00, 0.15, 0.00, 0.01},
}};
inline constexpr double kReferenceTolerance = 0.01;

struct ElicitationRow {
  int question = 0;
  int sub_question = 0;
  /// False for blank rows (sub-question does not exist).
  bool defined = false;
  PosteriorRow strengths{};
  double leak = 0.0;

  bool operator==(const ElicitationRow&) const = default;
};

struct ElicitationTable {
  std::vector<ElicitationRow> rows;

  std::size_t defined_count() const noexcept;
  bool operator==(const ElicitationTable&) const = default;
};

/// Reads the elicitation CSV (question_id, sub_question_id, six strengths,
/// leak). Throws ParseError.
ElicitationTable parse_elicitation(std::string_view document);

/// Every violated table invariant as a message; empty when the table is
/// well formed.
std::vector<std::string> check_elicitation(const ElicitationTable& table);

/// Gate id for a question/sub-question pair, e.g. "7.1".
std::string gate_id(int question, int sub_question);

/// Six skills at prior 0.5 and one noisy-AND gate per defined row, with
/// zero-strength inputs dropped and a leak when the leak value is positive.
/// Throws ContractError when check_elicitation reports violations.
AssessmentModel build_model(const ElicitationTable& table);

struct StudentScore {
  std::string student_id;
  std::vector<SkillPosterior> posteriors;
  /// Set when inference failed for this student.
  std::optional<std::string> error;
  std::vector<ExcludedCell> excluded;
  std::size_t observed = 0;
};

struct Scores {
  std::vector<std::string> skill_ids;
  std::vector<StudentScore> students;

  ResultTable table() const;
};

/// Runs inference for every student in the log. Failures are recorded per
/// student and do not stop the batch.
Scores score_all_students(const AssessmentModel& model, const AnswerLog& answers,
                          const InferenceOptions& options = {});

struct ReferenceMatch {
  std::size_t reference = 0;
  /// Index into Scores::students of the assigned student.
  std::optional<std::size_t> student;
  /// Closest student by max-entry deviation, whether or not it matched.
  std::optional<std::size_t> closest;
  double closest_deviation = 0.0;
};

struct Comparison {
  std::vector<ReferenceMatch> matches;
  std::size_t matched = 0;
  double tolerance = kReferenceTolerance;
};

/// Largest per-entry absolute difference; infinity for a failed student.
double max_deviation(const StudentScore& student, const PosteriorRow& reference);

/// Assigns distinct students to reference rows, maximising the number of
/// rows matched within `tolerance` on every entry.
Comparison compare_with_reference(const Scores& scores,
                                  std::span<const PosteriorRow> references = kReferenceRows,
                                  double tolerance = kReferenceTolerance);

/// "k/n paper rows matched (±0.01)"
std::string summary_line(const Comparison& comparison);

}  // namespace noisygate::cat
