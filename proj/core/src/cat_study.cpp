#include "noisygate/cat_study.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "noisygate/errors.hpp"

namespace noisygate::cat {

namespace {

constexpr double kLevelEps = 1e-9;

bool on_level(double value, std::span<const double> levels) {
  return std::any_of(levels.begin(), levels.end(),
                     [value](double l) { return std::fabs(value - l) <= kLevelEps; });
}

std::optional<int> parse_index(std::string_view text) {
  auto v = parse_decimal(text);
  if (!v || *v != std::floor(*v) || *v < 1 || *v > 1000) return std::nullopt;
  return static_cast<int>(*v);
}

std::string format_level(double v) { return format_probability(v, 2); }

}  // namespace

std::size_t ElicitationTable::defined_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const ElicitationRow& r) { return r.defined; }));
}

ElicitationTable parse_elicitation(std::string_view document) {
  const auto lines = split_csv(document);
  constexpr std::size_t kColumns = 2 + kSkillCount + 1;
  if (lines.empty() || lines[0].size() != kColumns || lines[0][0] != "question_id" ||
      lines[0][1] != "sub_question_id" || lines[0].back() != "leak") {
    throw ParseError(ParseError::Kind::Schema,
                     "elicitation table: header must be question_id,sub_question_id,<6 skills>,leak",
                     1, 1);
  }

  ElicitationTable table;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto& f = lines[ln];
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != kColumns) {
      throw ParseError(ParseError::Kind::Schema,
                       "elicitation table: line " + std::to_string(ln + 1) + " has " +
                           std::to_string(f.size()) + " fields",
                       ln + 1, 1);
    }
    ElicitationRow row;
    auto q = parse_index(f[0]);
    auto s = parse_index(f[1]);
    if (!q || !s) {
      throw ParseError(ParseError::Kind::Schema,
                       "elicitation table: line " + std::to_string(ln + 1) +
                           ": question and sub-question ids must be positive integers",
                       ln + 1, 1);
    }
    row.question = *q;
    row.sub_question = *s;
    const bool all_blank = std::all_of(f.begin() + 2, f.end(), [](const std::string& c) {
      return c.find_first_not_of(" \t") == std::string::npos;
    });
    if (!all_blank) {
      row.defined = true;
      for (std::size_t c = 2; c < kColumns; ++c) {
        auto v = parse_decimal(f[c]);
        if (!v) {
          throw ParseError(ParseError::Kind::Schema,
                           "elicitation table: line " + std::to_string(ln + 1) + ", column " +
                               std::to_string(c + 1) + ": '" + f[c] + "' is not a number",
                           ln + 1, c + 1);
        }
        if (c < 2 + kSkillCount) {
          row.strengths[c - 2] = *v;
        } else {
          row.leak = *v;
        }
      }
    }
    table.rows.push_back(row);
  }
  return table;
}

std::vector<std::string> check_elicitation(const ElicitationTable& table) {
  std::vector<std::string> problems;
  std::set<std::pair<int, int>> seen;
  std::map<int, std::set<int>> defined;

  for (const auto& row : table.rows) {
    const std::string where = "Q" + std::to_string(row.question) + "/" +
                              std::to_string(row.sub_question);
    if (row.question < 1 || row.question > kQuestionCount || row.sub_question < 1 ||
        row.sub_question > kSubQuestionCount) {
      problems.push_back(where + ": outside the 12 x 6 grid");
      continue;
    }
    if (!seen.insert({row.question, row.sub_question}).second) {
      problems.push_back(where + ": duplicate row");
      continue;
    }
    if (!row.defined) continue;
    defined[row.question].insert(row.sub_question);
    for (std::size_t k = 0; k < kSkillCount; ++k) {
      if (!on_level(row.strengths[k], kStrengthLevels)) {
        problems.push_back(where + ": strength " + format_level(row.strengths[k]) + " for " +
                           std::string(kSkillIds[k]) + " is not an elicitation level");
      }
    }
    if (!on_level(row.leak, kLeakLevels)) {
      problems.push_back(where + ": leak " + format_level(row.leak) + " is not a leak level");
    }
    if (row.question <= 2 && std::fabs(row.leak) > kLevelEps) {
      problems.push_back(where + ": tool questions must have no leak");
    }
  }

  for (int q = 1; q <= kQuestionCount; ++q) {
    for (int s = 1; s <= kSubQuestionCount; ++s) {
      if (!seen.contains({q, s})) {
        problems.push_back("Q" + std::to_string(q) + "/" + std::to_string(s) + ": missing row");
      }
    }
  }
  const std::map<int, std::set<int>> sparse{{9, {1, 3, 5}}, {12, {2, 4, 6}}};
  for (const auto& [q, expected] : sparse) {
    if (defined[q] != expected) {
      problems.push_back("Q" + std::to_string(q) + ": defined sub-questions differ from the " +
                         (q == 9 ? std::string("odd") : std::string("even")) + " ones");
    }
  }
  for (int q = 1; q <= kQuestionCount; ++q) {
    if (sparse.contains(q)) continue;
    if (defined[q].size() != static_cast<std::size_t>(kSubQuestionCount)) {
      problems.push_back("Q" + std::to_string(q) + ": expected all six sub-questions defined");
    }
  }
  return problems;
}

std::string gate_id(int question, int sub_question) {
  return std::to_string(question) + "." + std::to_string(sub_question);
}

AssessmentModel build_model(const ElicitationTable& table) {
  auto problems = check_elicitation(table);
  if (!problems.empty()) {
    std::string message = "elicitation table violates its invariants:";
    for (const auto& p : problems) message += "\n  " + p;
    throw ContractError(message);
  }

  AssessmentModel model;
  model.name = "cross-array-task";
  model.version = "1";
  for (std::size_t k = 0; k < kSkillCount; ++k) {
    model.skills.push_back({std::string(kSkillIds[k]), std::string(kSkillNames[k]), 0.5});
  }

  std::vector<const ElicitationRow*> rows;
  for (const auto& row : table.rows) {
    if (row.defined) rows.push_back(&row);
  }
  std::sort(rows.begin(), rows.end(), [](const ElicitationRow* a, const ElicitationRow* b) {
    return std::pair{a->question, a->sub_question} < std::pair{b->question, b->sub_question};
  });

  for (const auto* row : rows) {
    NoisyGate gate;
    gate.id = gate_id(row->question, row->sub_question);
    gate.kind = GateKind::And;
    gate.prompt = "Question " + std::to_string(row->question) + ", sub-question " +
                  std::to_string(row->sub_question);
    for (std::size_t k = 0; k < kSkillCount; ++k) {
      if (row->strengths[k] > 0.0) {
        gate.inputs.push_back({std::string(kSkillIds[k]), row->strengths[k]});
      }
    }
    if (row->leak > 0.0) gate.leak_strength = row->leak;
    model.gates.push_back(std::move(gate));
  }
  return model;
}

ResultTable Scores::table() const {
  ResultTable out;
  out.skill_ids = skill_ids;
  for (const auto& s : students) {
    out.rows.push_back(s.error ? ResultRow{s.student_id, {}}
                               : make_result_row(s.student_id, s.posteriors));
  }
  return out;
}

Scores score_all_students(const AssessmentModel& model, const AnswerLog& answers,
                          const InferenceOptions& options) {
  Scores scores;
  for (const auto& skill : model.skills) scores.skill_ids.push_back(skill.id);
  for (const auto& id : answers.student_ids) {
    StudentScore student;
    student.student_id = id;
    auto input = answers_to_evidence(model, answers, id);
    student.excluded = std::move(input.excluded);
    student.observed = input.evidence.size();
    try {
      student.posteriors = infer_posteriors(model, input.evidence, options);
    } catch (const Error& e) {
      student.error = e.what();
    }
    scores.students.push_back(std::move(student));
  }
  return scores;
}

double max_deviation(const StudentScore& student, const PosteriorRow& reference) {
  if (student.error || student.posteriors.size() != reference.size()) {
    return std::numeric_limits<double>::infinity();
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    worst = std::max(worst, std::fabs(student.posteriors[k].posterior_true - reference[k]));
  }
  return worst;
}

namespace {

// Exhaustive search for an assignment of distinct students to references
// that matches the most references.
void assign(const std::vector<std::vector<bool>>& ok, std::size_t ref,
            std::vector<std::optional<std::size_t>>& current, std::vector<bool>& used,
            std::size_t count, std::size_t& best_count,
            std::vector<std::optional<std::size_t>>& best) {
  if (ref == ok.size()) {
    if (count > best_count) {
      best_count = count;
      best = current;
    }
    return;
  }
  if (count + (ok.size() - ref) <= best_count) return;
  for (std::size_t s = 0; s < used.size(); ++s) {
    if (!ok[ref][s] || used[s]) continue;
    used[s] = true;
    current[ref] = s;
    assign(ok, ref + 1, current, used, count + 1, best_count, best);
    used[s] = false;
    current[ref].reset();
  }
  assign(ok, ref + 1, current, used, count, best_count, best);
}

}  // namespace

Comparison compare_with_reference(const Scores& scores, std::span<const PosteriorRow> references,
                                  double tolerance) {
  Comparison out;
  out.tolerance = tolerance;
  const std::size_t n = scores.students.size();
  std::vector<std::vector<bool>> ok(references.size(), std::vector<bool>(n, false));

  for (std::size_t r = 0; r < references.size(); ++r) {
    ReferenceMatch m;
    m.reference = r;
    m.closest_deviation = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
      const double d = max_deviation(scores.students[s], references[r]);
      ok[r][s] = d <= tolerance;
      if (d < m.closest_deviation) {
        m.closest_deviation = d;
        m.closest = s;
      }
    }
    out.matches.push_back(m);
  }

  std::vector<std::optional<std::size_t>> current(references.size());
  std::vector<std::optional<std::size_t>> best(references.size());
  std::vector<bool> used(n, false);
  std::size_t best_count = 0;
  assign(ok, 0, current, used, 0, best_count, best);
  for (std::size_t r = 0; r < references.size(); ++r) out.matches[r].student = best[r];
  out.matched = best_count;
  return out;
}

std::string summary_line(const Comparison& comparison) {
  return std::to_string(comparison.matched) + "/" + std::to_string(comparison.matches.size()) +
         " paper rows matched (±" + format_probability(comparison.tolerance, 2) + ")";
}

}  // namespace noisygate::cat
