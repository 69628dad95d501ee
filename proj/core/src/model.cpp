#include "noisygate/model.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace noisygate {

namespace {

bool in_unit_interval(double p) { return p >= 0.0 && p <= 1.0; }

std::string format_value(double v) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << v;
  return out.str();
}

}  // namespace

std::string_view to_string(GateKind kind) noexcept {
  return kind == GateKind::Or ? "or" : "and";
}

std::optional<GateKind> parse_gate_kind(std::string_view text) noexcept {
  if (text == "or") return GateKind::Or;
  if (text == "and") return GateKind::And;
  return std::nullopt;
}

std::optional<std::size_t> AssessmentModel::skill_index(
    std::string_view id) const noexcept {
  for (std::size_t i = 0; i < skills.size(); ++i) {
    if (skills[i].id == id) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> AssessmentModel::gate_index(
    std::string_view id) const noexcept {
  for (std::size_t i = 0; i < gates.size(); ++i) {
    if (gates[i].id == id) return i;
  }
  return std::nullopt;
}

const NoisyGate* AssessmentModel::find_gate(std::string_view id) const noexcept {
  auto idx = gate_index(id);
  return idx ? &gates[*idx] : nullptr;
}

std::string_view to_string(ViolationCode code) noexcept {
  switch (code) {
    case ViolationCode::EmptyId: return "EMPTY_ID";
    case ViolationCode::DuplicateSkillId: return "DUPLICATE_SKILL_ID";
    case ViolationCode::DuplicateGateId: return "DUPLICATE_GATE_ID";
    case ViolationCode::UnknownSkillRef: return "UNKNOWN_SKILL_REF";
    case ViolationCode::DuplicateGateInput: return "DUPLICATE_GATE_INPUT";
    case ViolationCode::PriorOutOfRange: return "PRIOR_OUT_OF_RANGE";
    case ViolationCode::StrengthOutOfRange: return "STRENGTH_OUT_OF_RANGE";
    case ViolationCode::LeakOutOfRange: return "LEAK_OUT_OF_RANGE";
  }
  return "UNKNOWN";
}

bool ValidationReport::contains(ViolationCode code) const noexcept {
  return std::any_of(violations.begin(), violations.end(),
                     [code](const Violation& v) { return v.code == code; });
}

std::string ValidationReport::to_string() const {
  std::string out;
  for (const auto& v : violations) {
    out += noisygate::to_string(v.code);
    out += ": ";
    out += v.message;
    out += '\n';
  }
  return out;
}

ValidationReport validate_model(const AssessmentModel& model) {
  ValidationReport report;
  auto add = [&report](ViolationCode code, std::string message) {
    report.violations.push_back({code, std::move(message)});
  };

  std::unordered_set<std::string> skill_ids;
  for (std::size_t i = 0; i < model.skills.size(); ++i) {
    const auto& skill = model.skills[i];
    if (skill.id.empty()) {
      add(ViolationCode::EmptyId, "skill #" + std::to_string(i) + " has an empty id");
    } else if (!skill_ids.insert(skill.id).second) {
      add(ViolationCode::DuplicateSkillId, "skill id '" + skill.id + "' is declared twice");
    }
    if (!in_unit_interval(skill.prior_true)) {
      add(ViolationCode::PriorOutOfRange, "skill '" + skill.id + "' prior_true " +
                                              format_value(skill.prior_true) +
                                              " is outside [0,1]");
    }
  }

  std::unordered_set<std::string> gate_ids;
  for (std::size_t g = 0; g < model.gates.size(); ++g) {
    const auto& gate = model.gates[g];
    if (gate.id.empty()) {
      add(ViolationCode::EmptyId, "gate #" + std::to_string(g) + " has an empty id");
    } else if (!gate_ids.insert(gate.id).second) {
      add(ViolationCode::DuplicateGateId, "gate id '" + gate.id + "' is declared twice");
    }
    if (gate.leak_strength && !in_unit_interval(*gate.leak_strength)) {
      add(ViolationCode::LeakOutOfRange, "gate '" + gate.id + "' leak_strength " +
                                             format_value(*gate.leak_strength) +
                                             " is outside [0,1]");
    }
    std::unordered_set<std::string> seen;
    for (const auto& input : gate.inputs) {
      if (!skill_ids.contains(input.skill_id)) {
        add(ViolationCode::UnknownSkillRef,
            "gate '" + gate.id + "' references unknown skill '" + input.skill_id + "'");
      }
      if (!seen.insert(input.skill_id).second) {
        add(ViolationCode::DuplicateGateInput,
            "gate '" + gate.id + "' lists skill '" + input.skill_id + "' twice");
      }
      if (!in_unit_interval(input.strength)) {
        add(ViolationCode::StrengthOutOfRange,
            "gate '" + gate.id + "' strength " + format_value(input.strength) +
                " for skill '" + input.skill_id + "' is outside [0,1]");
      }
    }
  }
  return report;
}

double effective_pi(double prior_true, GateKind kind) noexcept {
  return kind == GateKind::Or ? prior_true : 1.0 - prior_true;
}

double effective_pi(const SkillVariable& skill, GateKind kind) noexcept {
  return effective_pi(skill.prior_true, kind);
}

double prior_true_from_pi(double pi, GateKind kind) noexcept {
  return kind == GateKind::Or ? pi : 1.0 - pi;
}

}  // namespace noisygate
