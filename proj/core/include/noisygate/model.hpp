#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace noisygate {

/// Logical function a question node applies to its (noisy) skill inputs.
enum class GateKind {
  Or,   // disjunction, distinguished state 0
  And,  // conjunction, distinguished state 1
};

/// The output state forced when every input sits in it: 0 for OR, 1 for AND.
constexpr bool distinguished_state(GateKind kind) noexcept {
  return kind == GateKind::And;
}

std::string_view to_string(GateKind kind) noexcept;
std::optional<GateKind> parse_gate_kind(std::string_view text) noexcept;

/// Boolean latent skill. State 1 means the learner possesses it.
struct SkillVariable {
  std::string id;
  std::string name;
  double prior_true = 0.5;

  bool operator==(const SkillVariable&) const = default;
};

/// One skill-to-question arc. `strength` is the elicited importance
/// 1 - lambda; a strength of 0 is the same as having no arc.
struct GateInput {
  std::string skill_id;
  double strength = 0.0;

  /// lambda: inhibition (OR) or activation (AND) probability.
  double lambda() const noexcept { return 1.0 - strength; }

  bool operator==(const GateInput&) const = default;
};

/// A question node whose CPT is a noisy OR/AND of its inputs.
struct NoisyGate {
  std::string id;
  GateKind kind = GateKind::And;
  std::vector<GateInput> inputs;
  /// 1 - lambda0 when the gate is leaky.
  std::optional<double> leak_strength;
  /// Optional display text for interactive clients.
  std::string prompt;

  bool leaky() const noexcept { return leak_strength.has_value(); }

  /// Constant multiplier the leak contributes to P(Y = distinguished).
  double leak_factor() const noexcept {
    return leak_strength ? 1.0 - *leak_strength : 1.0;
  }

  bool operator==(const NoisyGate&) const = default;
};

/// Bipartite skill -> question network. Arcs exist only through
/// NoisyGate::inputs, so no other topology is representable.
struct AssessmentModel {
  std::string name;
  std::string version;
  std::vector<SkillVariable> skills;
  std::vector<NoisyGate> gates;

  std::optional<std::size_t> skill_index(std::string_view id) const noexcept;
  std::optional<std::size_t> gate_index(std::string_view id) const noexcept;
  const NoisyGate* find_gate(std::string_view id) const noexcept;

  bool operator==(const AssessmentModel&) const = default;
};

enum class ViolationCode {
  EmptyId,
  DuplicateSkillId,
  DuplicateGateId,
  UnknownSkillRef,
  DuplicateGateInput,
  PriorOutOfRange,
  StrengthOutOfRange,
  LeakOutOfRange,
};

/// Machine-readable code, e.g. "UNKNOWN_SKILL_REF".
std::string_view to_string(ViolationCode code) noexcept;

struct Violation {
  ViolationCode code;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  bool contains(ViolationCode code) const noexcept;
  std::string to_string() const;
};

/// Collects every structural and range violation. Never throws.
ValidationReport validate_model(const AssessmentModel& model);

/// pi = P(skill in the non-distinguished state of a gate of `kind`).
/// OR: P(skill possessed); AND: P(skill missing).
double effective_pi(const SkillVariable& skill, GateKind kind) noexcept;
double effective_pi(double prior_true, GateKind kind) noexcept;

/// Inverse of effective_pi.
double prior_true_from_pi(double pi, GateKind kind) noexcept;

}  // namespace noisygate
