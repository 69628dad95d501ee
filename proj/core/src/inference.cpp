#include "noisygate/inference.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include "noisygate/errors.hpp"

namespace noisygate {

namespace {

// An arc whose lambda is below 1; arcs with lambda == 1 never change a
// likelihood and are skipped.
struct LiveArc {
  std::size_t skill;
  double lambda;
};

struct Observation {
  const NoisyGate* gate;
  std::vector<LiveArc> arcs;
  Outcome outcome;
};

Observation compile_gate(const AssessmentModel& model, const NoisyGate& gate,
                         Outcome outcome) {
  Observation obs{&gate, {}, outcome};
  for (const auto& input : gate.inputs) {
    if (input.strength <= 0.0) continue;
    auto skill = model.skill_index(input.skill_id);
    if (!skill) {
      throw ContractError("gate '" + gate.id + "' references unknown skill '" +
                          input.skill_id + "'");
    }
    obs.arcs.push_back({*skill, input.lambda()});
  }
  return obs;
}

// Replaces each parent's marginal by its posterior given Y = x^. Returns
// P(Y = x^) under the marginals before the update; 0 leaves them untouched.
double absorb_one(const Observation& obs, std::vector<double>& posterior_true) {
  const GateKind kind = obs.gate->kind;
  double p_answer = obs.gate->leak_factor();
  for (const auto& arc : obs.arcs) {
    const double pi = effective_pi(posterior_true[arc.skill], kind);
    p_answer *= pi * arc.lambda + (1.0 - pi);
  }
  if (!(p_answer > 0.0)) return 0.0;
  for (const auto& arc : obs.arcs) {
    const double pi = effective_pi(posterior_true[arc.skill], kind);
    posterior_true[arc.skill] =
        prior_true_from_pi(posterior_given_distinguished(pi, arc.lambda), kind);
  }
  return p_answer;
}

std::vector<Observation> compile_evidence(const AssessmentModel& model,
                                          const EvidenceSet& evidence) {
  for (const auto& [gate_id, outcome] : evidence) {
    if (!model.gate_index(gate_id)) {
      throw ContractError("evidence references unknown gate '" + gate_id + "'");
    }
  }
  std::vector<Observation> observations;
  for (const auto& gate : model.gates) {
    auto it = evidence.find(gate.id);
    if (it == evidence.end()) continue;
    observations.push_back(compile_gate(model, gate, it->second));
  }
  return observations;
}

struct EngineResult {
  /// P(evidence); 0 when impossible.
  double probability = 0.0;
  std::vector<double> posterior_true;
  std::vector<std::size_t> absorbed;
  std::vector<std::size_t> joint;
};

EngineResult run_engine(const AssessmentModel& model,
                        const std::vector<Observation>& observations,
                        const InferenceOptions& options) {
  const std::size_t n = model.skills.size();
  EngineResult result;
  result.posterior_true.resize(n);
  result.absorbed.assign(n, 0);
  result.joint.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) result.posterior_true[i] = model.skills[i].prior_true;

  double probability = 1.0;

  // Phase 1: absorb distinguished answers into the marginals.
  for (const auto& obs : observations) {
    if (obs.outcome != Outcome::Distinguished) continue;
    const double p_answer = absorb_one(obs, result.posterior_true);
    if (!(p_answer > 0.0)) return result;
    probability *= p_answer;
    for (const auto& arc : obs.arcs) ++result.absorbed[arc.skill];
  }

  // Phase 2: condition jointly on the non-distinguished answers, enumerating
  // only the skills they touch.
  std::vector<std::size_t> local_of(n, std::numeric_limits<std::size_t>::max());
  std::vector<std::size_t> involved;
  struct LocalGate {
    bool hat;
    double leak;
    std::vector<LiveArc> arcs;  // skill = local index
  };
  std::vector<LocalGate> remaining;
  for (const auto& obs : observations) {
    if (obs.outcome != Outcome::NonDistinguished) continue;
    LocalGate local{distinguished_state(obs.gate->kind), obs.gate->leak_factor(), {}};
    for (const auto& arc : obs.arcs) {
      if (local_of[arc.skill] == std::numeric_limits<std::size_t>::max()) {
        local_of[arc.skill] = involved.size();
        involved.push_back(arc.skill);
      }
      local.arcs.push_back({local_of[arc.skill], arc.lambda});
      ++result.joint[arc.skill];
    }
    remaining.push_back(std::move(local));
  }

  if (!remaining.empty()) {
    const std::size_t m = involved.size();
    if (m > options.joint_skill_cap) {
      throw CapacityError("joint conditioning skills", m, options.joint_skill_cap);
    }
    std::vector<double> prior(m);
    for (std::size_t j = 0; j < m; ++j) prior[j] = result.posterior_true[involved[j]];

    double normalizer = 0.0;
    std::vector<double> mass_true(m, 0.0);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
      double w = 1.0;
      for (std::size_t j = 0; j < m && w > 0.0; ++j) {
        w *= ((mask >> j) & 1U) ? prior[j] : 1.0 - prior[j];
      }
      for (const auto& g : remaining) {
        if (!(w > 0.0)) break;
        double success = g.leak;
        for (const auto& arc : g.arcs) {
          const bool state = (mask >> arc.skill) & 1U;
          if (state != g.hat) success *= arc.lambda;
        }
        w *= 1.0 - success;
      }
      if (!(w > 0.0)) continue;
      normalizer += w;
      for (std::size_t j = 0; j < m; ++j) {
        if ((mask >> j) & 1U) mass_true[j] += w;
      }
    }
    if (!(normalizer > 0.0)) return result;
    probability *= normalizer;
    for (std::size_t j = 0; j < m; ++j) {
      result.posterior_true[involved[j]] = mass_true[j] / normalizer;
    }
  }

  result.probability = probability;
  return result;
}

EvidenceSet restrict(const EvidenceSet& evidence, const std::vector<std::string>& ids) {
  EvidenceSet out;
  for (const auto& id : ids) out.emplace(id, evidence.find(id)->second);
  return out;
}

// Greedy shrink: drop each gate (in model order) whose removal keeps the
// evidence impossible. The result is irreducible.
std::vector<std::string> minimal_failing_set(const AssessmentModel& model,
                                             const EvidenceSet& evidence,
                                             const InferenceOptions& options) {
  std::vector<std::string> kept;
  for (const auto& gate : model.gates) {
    if (evidence.contains(gate.id)) kept.push_back(gate.id);
  }
  for (std::size_t i = 0; i < kept.size();) {
    std::vector<std::string> trial = kept;
    trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
    if (evidence_probability(model, restrict(evidence, trial), options) == 0.0) {
      kept = std::move(trial);
    } else {
      ++i;
    }
  }
  return kept;
}

std::string join(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

std::vector<SkillPosterior> to_posteriors(const AssessmentModel& model,
                                          const EngineResult& r) {
  std::vector<SkillPosterior> out;
  out.reserve(model.skills.size());
  for (std::size_t i = 0; i < model.skills.size(); ++i) {
    out.push_back({model.skills[i].id, r.posterior_true[i], r.absorbed[i], r.joint[i]});
  }
  return out;
}

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

}  // namespace

Outcome outcome_for_answer(GateKind kind, bool correct) noexcept {
  // A correct answer is Y = 1, which is distinguished only for AND gates.
  return correct == distinguished_state(kind) ? Outcome::Distinguished
                                              : Outcome::NonDistinguished;
}

bool answer_is_correct(GateKind kind, Outcome outcome) noexcept {
  return (outcome == Outcome::Distinguished) == distinguished_state(kind);
}

double posterior_given_distinguished(double pi, double lambda) {
  const double numerator = pi * lambda;
  const double denominator = numerator + (1.0 - pi);
  if (!(denominator > 0.0)) {
    throw ImpossibleEvidenceError(
        "distinguished answer is impossible: pi = 1 with lambda = 0");
  }
  return numerator / denominator;
}

double answer_marginal(const NoisyGate& gate, std::span<const double> pis) {
  if (pis.size() != gate.inputs.size()) {
    throw ContractError("gate '" + gate.id + "' needs one pi per input");
  }
  double p = gate.leak_factor();
  for (std::size_t i = 0; i < pis.size(); ++i) {
    p *= 1.0 - pis[i] * gate.inputs[i].strength;
  }
  return p;
}

double posterior_given_non_distinguished(const NoisyGate& gate,
                                         std::span<const double> pis, std::size_t k) {
  if (pis.size() != gate.inputs.size()) {
    throw ContractError("gate '" + gate.id + "' needs one pi per input");
  }
  if (k >= pis.size()) throw ContractError("input index out of range");

  double others = gate.leak_factor();
  for (std::size_t i = 0; i < pis.size(); ++i) {
    if (i != k) others *= 1.0 - pis[i] * gate.inputs[i].strength;
  }
  const double pi_k = pis[k];
  const double lambda_k = gate.inputs[k].lambda();
  const double denominator = 1.0 - others * (1.0 - pi_k * gate.inputs[k].strength);
  if (!(denominator > 0.0)) {
    throw ImpossibleEvidenceError("gate '" + gate.id +
                                  "': non-distinguished answer has probability 0");
  }
  return (pi_k - pi_k * lambda_k * others) / denominator;
}

std::vector<double> absorb_distinguished(const AssessmentModel& model,
                                         std::span<const std::string> gate_ids) {
  std::vector<double> posterior_true;
  posterior_true.reserve(model.skills.size());
  for (const auto& skill : model.skills) posterior_true.push_back(skill.prior_true);
  for (const auto& id : gate_ids) {
    const NoisyGate* gate = model.find_gate(id);
    if (!gate) throw ContractError("unknown gate '" + id + "'");
    if (!(absorb_one(compile_gate(model, *gate, Outcome::Distinguished), posterior_true) > 0.0)) {
      throw InconsistentEvidenceError("distinguished answer on '" + id + "' is impossible",
                                      {id});
    }
  }
  return posterior_true;
}

double evidence_probability(const AssessmentModel& model, const EvidenceSet& evidence,
                            const InferenceOptions& options) {
  return run_engine(model, compile_evidence(model, evidence), options).probability;
}

std::vector<SkillPosterior> infer_posteriors(const AssessmentModel& model,
                                             const EvidenceSet& evidence,
                                             const InferenceOptions& options) {
  const auto result = run_engine(model, compile_evidence(model, evidence), options);
  if (!(result.probability > 0.0)) {
    auto gates = minimal_failing_set(model, evidence, options);
    throw InconsistentEvidenceError("evidence has probability 0; conflicting gates: " +
                                        join(gates),
                                    std::move(gates));
  }
  return to_posteriors(model, result);
}

std::vector<SkillPosterior> brute_force_posteriors(const AssessmentModel& model,
                                                   const EvidenceSet& evidence,
                                                   std::size_t cap) {
  const std::size_t n = model.skills.size();
  if (n > cap) throw CapacityError("brute-force skills", n, cap);
  const auto observations = compile_evidence(model, evidence);

  // Positional parent indices for every observed gate, arcs of strength 0
  // included: the oracle evaluates the full parametric CPT.
  struct Term {
    const NoisyGate* gate;
    std::vector<std::size_t> parents;
    Outcome outcome;
  };
  std::vector<Term> terms;
  for (const auto& obs : observations) {
    Term t{obs.gate, {}, obs.outcome};
    for (const auto& input : obs.gate->inputs) {
      t.parents.push_back(*model.skill_index(input.skill_id));
    }
    terms.push_back(std::move(t));
  }

  double total = 0.0;
  std::vector<double> mass_true(n, 0.0);
  std::vector<bool> states;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double w = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      w *= ((mask >> i) & 1U) ? model.skills[i].prior_true : 1.0 - model.skills[i].prior_true;
    }
    for (const auto& t : terms) {
      states.assign(t.parents.size(), false);
      for (std::size_t i = 0; i < t.parents.size(); ++i) states[i] = (mask >> t.parents[i]) & 1U;
      const double success = gate_success_prob(*t.gate, states);
      w *= t.outcome == Outcome::Distinguished ? success : 1.0 - success;
    }
    total += w;
    for (std::size_t i = 0; i < n; ++i) {
      if ((mask >> i) & 1U) mass_true[i] += w;
    }
  }
  if (!(total > 0.0)) {
    std::vector<std::string> gates;
    for (const auto& t : terms) gates.push_back(t.gate->id);
    throw InconsistentEvidenceError("evidence has probability 0", std::move(gates));
  }

  std::vector<SkillPosterior> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({model.skills[i].id, mass_true[i] / total, 0, 0});
  }
  for (const auto& obs : observations) {
    for (const auto& arc : obs.arcs) {
      if (obs.outcome == Outcome::Distinguished) {
        ++out[arc.skill].absorbed_count;
      } else {
        ++out[arc.skill].joint_count;
      }
    }
  }
  return out;
}

double marginal_entropy(std::span<const SkillPosterior> posteriors) {
  double h = 0.0;
  for (const auto& p : posteriors) h += binary_entropy(p.posterior_true);
  return h;
}

std::vector<QuestionScore> score_questions(const AssessmentModel& model,
                                           const EvidenceSet& evidence,
                                           const std::set<std::string, std::less<>>& answered,
                                           const InferenceOptions& options) {
  const double p_evidence = evidence_probability(model, evidence, options);
  if (!(p_evidence > 0.0)) {
    infer_posteriors(model, evidence, options);  // throws with the failing set
  }

  std::vector<QuestionScore> scores;
  for (const auto& gate : model.gates) {
    if (answered.contains(gate.id) || evidence.contains(gate.id)) continue;

    EvidenceSet with_hat = evidence;
    with_hat[gate.id] = Outcome::Distinguished;
    EvidenceSet with_not = evidence;
    with_not[gate.id] = Outcome::NonDistinguished;

    const double joint_hat = evidence_probability(model, with_hat, options);
    const double joint_not = evidence_probability(model, with_not, options);
    const double p_hat = joint_hat / (joint_hat + joint_not);

    double expected = 0.0;
    if (joint_hat > 0.0) {
      expected += p_hat * marginal_entropy(infer_posteriors(model, with_hat, options));
    }
    if (joint_not > 0.0) {
      expected += (1.0 - p_hat) * marginal_entropy(infer_posteriors(model, with_not, options));
    }
    scores.push_back({gate.id, p_hat, expected});
  }
  return scores;
}

std::string suggest_next_question(const AssessmentModel& model, const EvidenceSet& evidence,
                                  const std::set<std::string, std::less<>>& answered,
                                  const InferenceOptions& options) {
  const auto scores = score_questions(model, evidence, answered, options);
  if (scores.empty()) throw ContractError("no unanswered question left");
  constexpr double kTie = 1e-12;
  const QuestionScore* best = &scores.front();
  for (const auto& s : scores) {
    if (s.expected_entropy < best->expected_entropy - kTie) best = &s;
  }
  return best->gate_id;
}

}  // namespace noisygate
