#include "noisygate/format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "noisygate/errors.hpp"

namespace noisygate {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void schema_error(const std::string& message) {
  throw ParseError(ParseError::Kind::Schema, message);
}

void line_column(std::string_view doc, std::size_t byte, std::size_t& line,
                 std::size_t& column) {
  line = 1;
  column = 1;
  byte = std::min(byte, doc.size());
  for (std::size_t i = 0; i < byte; ++i) {
    if (doc[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
}

void check_keys(const ordered_json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      schema_error(where + ": unknown key '" + key + "'");
    }
  }
}

const ordered_json& require(const ordered_json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where + ": missing key '" + key + "'");
  return *it;
}

std::string require_string(const ordered_json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) schema_error(where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

double require_number(const ordered_json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) schema_error(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

std::vector<std::string> split_lines(std::string_view document) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= document.size()) {
    std::size_t end = document.find('\n', start);
    if (end == std::string_view::npos) end = document.size();
    std::string line(document.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

template <typename Strings>
std::string join_csv(const Strings& fields) {
  std::string out;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    out += f;
    first = false;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model documents

AssessmentModel parse_model(std::string_view document) {
  ordered_json root;
  try {
    root = ordered_json::parse(document.begin(), document.end());
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 0;
    std::size_t column = 0;
    line_column(document, e.byte == 0 ? 0 : e.byte - 1, line, column);
    throw ParseError(ParseError::Kind::Syntax,
                     "syntax error at line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + e.what(),
                     line, column);
  }

  if (!root.is_object()) schema_error("document root must be an object");
  check_keys(root, {"format_version", "name", "version", "skills", "gates"}, "model");

  const auto& version = require(root, "format_version", "model");
  if (!version.is_number_integer()) schema_error("model: 'format_version' must be an integer");
  if (version.get<long long>() != kModelFormatVersion) {
    throw ParseError(ParseError::Kind::Version,
                     "unsupported format_version " + std::to_string(version.get<long long>()) +
                         " (expected " + std::to_string(kModelFormatVersion) + ")");
  }

  AssessmentModel model;
  model.name = require_string(root, "name", "model");
  if (root.contains("version")) model.version = require_string(root, "version", "model");

  const auto& skills = require(root, "skills", "model");
  if (!skills.is_array()) schema_error("model: 'skills' must be an array");
  for (std::size_t i = 0; i < skills.size(); ++i) {
    const auto& s = skills[i];
    const std::string where = "skills[" + std::to_string(i) + "]";
    if (!s.is_object()) schema_error(where + " must be an object");
    check_keys(s, {"id", "name", "prior_true"}, where);
    SkillVariable skill;
    skill.id = require_string(s, "id", where);
    skill.name = s.contains("name") ? require_string(s, "name", where) : std::string{};
    skill.prior_true = require_number(s, "prior_true", where);
    model.skills.push_back(std::move(skill));
  }

  const auto& gates = require(root, "gates", "model");
  if (!gates.is_array()) schema_error("model: 'gates' must be an array");
  for (std::size_t g = 0; g < gates.size(); ++g) {
    const auto& obj = gates[g];
    const std::string where = "gates[" + std::to_string(g) + "]";
    if (!obj.is_object()) schema_error(where + " must be an object");
    check_keys(obj, {"id", "kind", "leak_strength", "prompt", "inputs"}, where);
    NoisyGate gate;
    gate.id = require_string(obj, "id", where);
    const std::string kind = require_string(obj, "kind", where);
    auto parsed = parse_gate_kind(kind);
    if (!parsed) schema_error(where + ": kind must be \"or\" or \"and\", got \"" + kind + "\"");
    gate.kind = *parsed;
    if (obj.contains("leak_strength")) {
      gate.leak_strength = require_number(obj, "leak_strength", where);
    }
    if (obj.contains("prompt")) gate.prompt = require_string(obj, "prompt", where);
    const auto& inputs = require(obj, "inputs", where);
    if (!inputs.is_array()) schema_error(where + ": 'inputs' must be an array");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto& in = inputs[i];
      const std::string iwhere = where + ".inputs[" + std::to_string(i) + "]";
      if (!in.is_object()) schema_error(iwhere + " must be an object");
      check_keys(in, {"skill", "strength"}, iwhere);
      gate.inputs.push_back({require_string(in, "skill", iwhere),
                             require_number(in, "strength", iwhere)});
    }
    model.gates.push_back(std::move(gate));
  }

  auto report = validate_model(model);
  if (!report.ok()) {
    throw ParseError(ParseError::Kind::Validation, "invalid model:\n" + report.to_string());
  }
  return model;
}

std::string serialize_model(const AssessmentModel& model) {
  ordered_json root;
  root["format_version"] = kModelFormatVersion;
  root["name"] = model.name;
  if (!model.version.empty()) root["version"] = model.version;
  root["skills"] = ordered_json::array();
  for (const auto& s : model.skills) {
    ordered_json skill;
    skill["id"] = s.id;
    if (!s.name.empty()) skill["name"] = s.name;
    skill["prior_true"] = s.prior_true;
    root["skills"].push_back(std::move(skill));
  }
  root["gates"] = ordered_json::array();
  for (const auto& g : model.gates) {
    ordered_json gate;
    gate["id"] = g.id;
    gate["kind"] = std::string(to_string(g.kind));
    if (g.leak_strength) gate["leak_strength"] = *g.leak_strength;
    if (!g.prompt.empty()) gate["prompt"] = g.prompt;
    gate["inputs"] = ordered_json::array();
    for (const auto& in : g.inputs) {
      ordered_json input;
      input["skill"] = in.skill_id;
      input["strength"] = in.strength;
      gate["inputs"].push_back(std::move(input));
    }
    root["gates"].push_back(std::move(gate));
  }
  return root.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Answer logs

std::string_view to_string(AnswerCell cell) noexcept {
  switch (cell) {
    case AnswerCell::Yes: return "yes";
    case AnswerCell::No: return "no";
    case AnswerCell::Blank: break;
  }
  return "";
}

std::optional<AnswerCell> parse_answer_cell(std::string_view text) noexcept {
  text = trim(text);
  if (text.empty()) return AnswerCell::Blank;
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "yes") return AnswerCell::Yes;
  if (lower == "no") return AnswerCell::No;
  return std::nullopt;
}

std::optional<std::size_t> AnswerLog::student_column(std::string_view student_id) const noexcept {
  for (std::size_t i = 0; i < student_ids.size(); ++i) {
    if (student_ids[i] == student_id) return i;
  }
  return std::nullopt;
}

AnswerLog parse_answers(std::string_view document) {
  const auto lines = split_lines(document);
  if (lines.empty()) throw ParseError(ParseError::Kind::Schema, "answer log: missing header row", 1, 1);

  const auto header = split_fields(lines[0]);
  if (header.size() < 2 || trim(header[0]) != "question_id" ||
      trim(header[1]) != "sub_question_id") {
    throw ParseError(ParseError::Kind::Schema,
                     "answer log: header must start with question_id,sub_question_id", 1, 1);
  }
  AnswerLog log;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 2; i < header.size(); ++i) {
    std::string id(trim(header[i]));
    if (id.empty()) {
      throw ParseError(ParseError::Kind::Schema, "answer log: empty student id in header", 1,
                       i + 1);
    }
    if (!seen.insert(id).second) {
      throw ParseError(ParseError::Kind::Schema, "answer log: duplicate student id '" + id + "'",
                       1, i + 1);
    }
    log.student_ids.push_back(std::move(id));
  }

  std::size_t position = 0;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto fields = split_fields(lines[ln]);
    if (fields.size() != header.size()) {
      log.flagged.push_back({ln + 1, position++, lines[ln],
                             "expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size())});
      continue;
    }
    AnswerRow row;
    row.question_id = std::string(trim(fields[0]));
    row.sub_question_id = std::string(trim(fields[1]));
    for (std::size_t c = 2; c < fields.size(); ++c) {
      auto cell = parse_answer_cell(fields[c]);
      if (!cell) {
        throw ParseError(ParseError::Kind::Schema,
                         "answer log: line " + std::to_string(ln + 1) + ", column " +
                             std::to_string(c + 1) + ": cell '" + fields[c] +
                             "' is not yes/no/blank",
                         ln + 1, c + 1);
      }
      row.cells.push_back(*cell);
    }
    log.rows.push_back(std::move(row));
    ++position;
  }
  return log;
}

std::string serialize_answers(const AnswerLog& log) {
  std::vector<std::string> header{"question_id", "sub_question_id"};
  header.insert(header.end(), log.student_ids.begin(), log.student_ids.end());
  std::string out = join_csv(header) + "\n";

  auto flagged = log.flagged.begin();
  auto row = log.rows.begin();
  const std::size_t total = log.rows.size() + log.flagged.size();
  for (std::size_t pos = 0; pos < total; ++pos) {
    if (flagged != log.flagged.end() && (flagged->position == pos || row == log.rows.end())) {
      out += flagged->raw;
      ++flagged;
    } else {
      std::vector<std::string> fields{row->question_id, row->sub_question_id};
      for (auto c : row->cells) fields.emplace_back(to_string(c));
      out += join_csv(fields);
      ++row;
    }
    out += '\n';
  }
  return out;
}

std::string answer_gate_id(const AnswerRow& row) {
  return row.sub_question_id.empty() ? row.question_id
                                     : row.question_id + "." + row.sub_question_id;
}

StudentEvidence answers_to_evidence(const AssessmentModel& model, const AnswerLog& log,
                                    std::string_view student_id) {
  auto column = log.student_column(student_id);
  if (!column) throw ContractError("unknown student id '" + std::string(student_id) + "'");

  StudentEvidence out;
  for (const auto& row : log.rows) {
    const AnswerCell cell = row.cells.at(*column);
    if (cell == AnswerCell::Blank) continue;
    const std::string gate_id = answer_gate_id(row);
    const NoisyGate* gate = model.find_gate(gate_id);
    if (!gate) {
      out.excluded.push_back({row.question_id, row.sub_question_id,
                              "no gate '" + gate_id + "' in the model"});
      continue;
    }
    if (out.evidence.contains(gate_id)) {
      out.excluded.push_back({row.question_id, row.sub_question_id,
                              "duplicate answer for gate '" + gate_id + "'"});
      continue;
    }
    out.evidence.emplace(gate_id, outcome_for_answer(gate->kind, cell == AnswerCell::Yes));
  }
  for (const auto& f : log.flagged) {
    const auto fields = split_fields(f.raw);
    const bool has_answers =
        std::any_of(fields.begin() + std::min<std::size_t>(2, fields.size()), fields.end(),
                    [](const std::string& s) { return !trim(s).empty(); });
    if (!has_answers) continue;
    out.excluded.push_back({fields.size() > 0 ? std::string(trim(fields[0])) : std::string{},
                            fields.size() > 1 ? std::string(trim(fields[1])) : std::string{},
                            "line " + std::to_string(f.line) + " cannot be placed: " + f.reason});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Result tables

std::string format_probability(double value, int decimals) {
  if (std::fabs(value) < 0.5 * std::pow(10.0, -decimals)) value = 0.0;
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, decimals);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

std::string serialize_results(const ResultTable& table, int decimals) {
  std::vector<std::string> header{"student_id"};
  header.insert(header.end(), table.skill_ids.begin(), table.skill_ids.end());
  std::string out = join_csv(header) + "\n";
  for (const auto& row : table.rows) {
    std::vector<std::string> fields{row.student_id};
    if (row.values.empty()) {
      fields.resize(header.size());
    } else {
      for (double v : row.values) fields.push_back(format_probability(v, decimals));
    }
    out += join_csv(fields) + "\n";
  }
  return out;
}

ResultTable parse_results(std::string_view document) {
  const auto lines = split_lines(document);
  if (lines.empty()) throw ParseError(ParseError::Kind::Schema, "result table: missing header", 1, 1);
  const auto header = split_fields(lines[0]);
  if (trim(header[0]) != "student_id") {
    throw ParseError(ParseError::Kind::Schema, "result table: first column must be student_id",
                     1, 1);
  }
  ResultTable table;
  for (std::size_t i = 1; i < header.size(); ++i) table.skill_ids.emplace_back(trim(header[i]));
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto fields = split_fields(lines[ln]);
    if (fields.size() != header.size()) {
      throw ParseError(ParseError::Kind::Schema,
                       "result table: line " + std::to_string(ln + 1) + " has " +
                           std::to_string(fields.size()) + " fields",
                       ln + 1, 1);
    }
    ResultRow row;
    row.student_id = std::string(trim(fields[0]));
    const bool blank = std::all_of(fields.begin() + 1, fields.end(),
                                   [](const std::string& s) { return trim(s).empty(); });
    if (!blank) {
      for (std::size_t c = 1; c < fields.size(); ++c) {
        auto v = parse_decimal(fields[c]);
        if (!v) {
          throw ParseError(ParseError::Kind::Schema,
                           "result table: line " + std::to_string(ln + 1) + ", column " +
                               std::to_string(c + 1) + ": '" + fields[c] + "' is not a number",
                           ln + 1, c + 1);
        }
        row.values.push_back(*v);
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

ResultRow make_result_row(std::string student_id, const std::vector<SkillPosterior>& posteriors) {
  ResultRow row{std::move(student_id), {}};
  row.values.reserve(posteriors.size());
  for (const auto& p : posteriors) row.values.push_back(p.posterior_true);
  return row;
}

// ---------------------------------------------------------------------------
// Files and helpers

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

AssessmentModel load_model_file(const std::filesystem::path& path) {
  return parse_model(read_file(path));
}

AnswerLog load_answers_file(const std::filesystem::path& path) {
  return parse_answers(read_file(path));
}

std::vector<std::vector<std::string>> split_csv(std::string_view document) {
  std::vector<std::vector<std::string>> out;
  for (const auto& line : split_lines(document)) out.push_back(split_fields(line));
  return out;
}

std::optional<double> parse_decimal(std::string_view text) noexcept {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

}  // namespace noisygate
