#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "noisygate/inference.hpp"
#include "noisygate/model.hpp"

namespace noisygate {

inline constexpr int kModelFormatVersion = 1;

// ---------------------------------------------------------------------------
// Model documents (JSON, see docs/format.md)

/// Parses and validates a model document. Throws ParseError with
/// Kind::Syntax (with line/column), Kind::Schema, Kind::Version or
/// Kind::Validation.
AssessmentModel parse_model(std::string_view document);

/// Deterministic, lossless: parse_model(serialize_model(m)) == m.
std::string serialize_model(const AssessmentModel& model);

// ---------------------------------------------------------------------------
// Answer logs (CSV: question_id,sub_question_id,<student ids...>)

enum class AnswerCell : unsigned char { Blank, Yes, No };

std::string_view to_string(AnswerCell cell) noexcept;

/// Normalises case and surrounding whitespace; nullopt outside the
/// yes/no/blank vocabulary.
std::optional<AnswerCell> parse_answer_cell(std::string_view text) noexcept;

struct AnswerRow {
  std::string question_id;
  /// May be empty for filler rows.
  std::string sub_question_id;
  std::vector<AnswerCell> cells;

  bool operator==(const AnswerRow&) const = default;
};

/// A row that could not be placed cell-for-cell under the header. It is kept
/// verbatim for round-tripping but never turned into evidence.
struct FlaggedRow {
  /// 1-based source line.
  std::size_t line = 0;
  /// Index among all data rows (placed and flagged) in source order.
  std::size_t position = 0;
  std::string raw;
  std::string reason;

  bool operator==(const FlaggedRow&) const = default;
};

struct AnswerLog {
  std::vector<std::string> student_ids;
  std::vector<AnswerRow> rows;
  std::vector<FlaggedRow> flagged;

  std::optional<std::size_t> student_column(std::string_view student_id) const noexcept;

  bool operator==(const AnswerLog&) const = default;
};

AnswerLog parse_answers(std::string_view document);
std::string serialize_answers(const AnswerLog& log);

/// Gate id an answer row maps to: "<question>.<sub>" or "<question>" when
/// the sub-question id is empty.
std::string answer_gate_id(const AnswerRow& row);

struct ExcludedCell {
  std::string question_id;
  std::string sub_question_id;
  std::string reason;
};

struct StudentEvidence {
  EvidenceSet evidence;
  std::vector<ExcludedCell> excluded;
};

/// One student's column as evidence: "yes" is a correct answer and "no" a
/// wrong one, translated through each gate's kind; blanks are unobserved.
/// Cells that cannot be placed on a model gate are excluded and listed.
/// Throws ContractError for an unknown student id.
StudentEvidence answers_to_evidence(const AssessmentModel& model, const AnswerLog& log,
                                    std::string_view student_id);

// ---------------------------------------------------------------------------
// Result tables (CSV: student_id,<skill ids...>)

struct ResultRow {
  std::string student_id;
  /// Empty when inference failed for the student (serialised as blanks).
  std::vector<double> values;

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  std::vector<std::string> skill_ids;
  std::vector<ResultRow> rows;

  bool operator==(const ResultTable&) const = default;
};

/// Fixed-point, locale-independent formatting with `decimals` digits.
std::string format_probability(double value, int decimals);

std::string serialize_results(const ResultTable& table, int decimals = 2);
ResultTable parse_results(std::string_view document);

/// Row of a result table from a posterior vector.
ResultRow make_result_row(std::string student_id,
                          const std::vector<SkillPosterior>& posteriors);

// ---------------------------------------------------------------------------
// File helpers; throw IoError.

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
AssessmentModel load_model_file(const std::filesystem::path& path);
AnswerLog load_answers_file(const std::filesystem::path& path);

/// Splits a CSV document into lines of fields. No quoting; '\r' is dropped.
/// Empty trailing line is ignored. Exposed for the table readers.
std::vector<std::vector<std::string>> split_csv(std::string_view document);

/// Locale-independent decimal parser accepting only a full match.
std::optional<double> parse_decimal(std::string_view text) noexcept;

}  // namespace noisygate
