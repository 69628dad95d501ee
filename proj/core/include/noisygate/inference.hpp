#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "noisygate/gates.hpp"
#include "noisygate/model.hpp"

namespace noisygate {

/// Observed state of a question node relative to its gate.
enum class Outcome {
  Distinguished,     // AND: answered correctly; OR: answered wrongly
  NonDistinguished,  // AND: answered wrongly;   OR: answered correctly
};

Outcome outcome_for_answer(GateKind kind, bool correct) noexcept;
bool answer_is_correct(GateKind kind, Outcome outcome) noexcept;

/// Observed gates keyed by gate id. Absent gates are unobserved.
using EvidenceSet = std::map<std::string, Outcome, std::less<>>;

struct SkillPosterior {
  std::string skill_id;
  /// P(skill possessed | evidence).
  double posterior_true = 0.0;
  /// Distinguished observations on gates with a live arc to this skill.
  std::size_t absorbed_count = 0;
  /// Non-distinguished observations on gates with a live arc to this skill.
  std::size_t joint_count = 0;

  bool operator==(const SkillPosterior&) const = default;
};

// Single-gate closed forms. `pi` is P(X = not x^) and `lambda` = 1 - strength.

/// P(X_k = not x^ | Y = x^) = pi*lambda / (pi*lambda + 1 - pi).
/// Throws ImpossibleEvidenceError when pi == 1 and lambda == 0.
double posterior_given_distinguished(double pi, double lambda);

/// P(Y = x^) = prod_i (1 - pi_i (1 - lambda_i)) * lambda0, linear in the
/// input count. `pis[i]` belongs to `gate.inputs[i]`.
double answer_marginal(const NoisyGate& gate, std::span<const double> pis);

/// P(X_k = not x^ | Y = not x^) for input `k` of `gate`.
/// Throws ImpossibleEvidenceError when P(Y = not x^) is 0.
double posterior_given_non_distinguished(const NoisyGate& gate,
                                         std::span<const double> pis, std::size_t k);

struct InferenceOptions {
  /// Largest number of skills the joint-conditioning step may enumerate.
  std::size_t joint_skill_cap = 22;
};

/// Exact posteriors for every skill, in model order.
///
/// Distinguished observations are absorbed into the skill marginals one gate
/// at a time (skills stay independent). The remaining non-distinguished gates
/// are conditioned on jointly by enumerating only the skills they touch.
///
/// Throws ContractError for unknown gate ids, InconsistentEvidenceError when
/// the evidence has probability 0 and CapacityError when the joint step
/// would exceed `options.joint_skill_cap`.
std::vector<SkillPosterior> infer_posteriors(const AssessmentModel& model,
                                             const EvidenceSet& evidence,
                                             const InferenceOptions& options = {});

/// Folds distinguished answers on `gate_ids` into the skill priors, in the
/// given order, and returns the updated P(skill possessed) in model order.
/// Throws InconsistentEvidenceError when one of the answers is impossible.
std::vector<double> absorb_distinguished(const AssessmentModel& model,
                                         std::span<const std::string> gate_ids);

/// P(evidence) computed by the same two-phase procedure. Returns 0 for
/// impossible evidence instead of throwing.
double evidence_probability(const AssessmentModel& model, const EvidenceSet& evidence,
                            const InferenceOptions& options = {});

/// Reference implementation: full-joint enumeration over all 2^n skill
/// configurations. Throws CapacityError above `cap` skills.
std::vector<SkillPosterior> brute_force_posteriors(const AssessmentModel& model,
                                                   const EvidenceSet& evidence,
                                                   std::size_t cap = kOracleCap);

/// Sum of per-skill binary entropies (bits).
double marginal_entropy(std::span<const SkillPosterior> posteriors);

struct QuestionScore {
  std::string gate_id;
  /// P(Y = x^ | evidence).
  double p_distinguished = 0.0;
  double expected_entropy = 0.0;
};

/// Expected posterior marginal entropy after observing each candidate gate,
/// in model order. Candidates are gates not in `answered` and not in
/// `evidence`.
std::vector<QuestionScore> score_questions(const AssessmentModel& model,
                                           const EvidenceSet& evidence,
                                           const std::set<std::string, std::less<>>& answered,
                                           const InferenceOptions& options = {});

/// Gate with the smallest expected entropy; ties go to the earlier gate.
/// Throws ContractError when no candidate is left.
std::string suggest_next_question(const AssessmentModel& model, const EvidenceSet& evidence,
                                  const std::set<std::string, std::less<>>& answered,
                                  const InferenceOptions& options = {});

}  // namespace noisygate
