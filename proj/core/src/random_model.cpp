#include "noisygate/random_model.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "noisygate/gates.hpp"

namespace noisygate {

namespace {

double draw_probability(std::mt19937_64& rng, double edge_rate) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < edge_rate) return unit(rng) < 0.5 ? 0.0 : 1.0;
  return unit(rng);
}

std::size_t draw_between(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, std::max(lo, hi))(rng);
}

}  // namespace

AssessmentModel random_model(std::mt19937_64& rng, const RandomModelOptions& options) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AssessmentModel model;
  model.name = "random";
  const std::size_t n = draw_between(rng, std::max<std::size_t>(1, options.min_skills),
                                     options.max_skills);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "s" + std::to_string(i);
    model.skills.push_back({id, "skill " + std::to_string(i),
                            draw_probability(rng, options.edge_rate)});
  }

  const std::size_t m = draw_between(rng, options.min_gates, options.max_gates);
  const std::size_t cap = options.max_inputs == 0 ? n : std::min(n, options.max_inputs);
  std::vector<std::size_t> order(n);
  for (std::size_t g = 0; g < m; ++g) {
    NoisyGate gate;
    gate.id = "g" + std::to_string(g);
    gate.kind = unit(rng) < options.or_rate ? GateKind::Or : GateKind::And;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t k = draw_between(rng, 0, cap);
    for (std::size_t i = 0; i < k; ++i) {
      gate.inputs.push_back({model.skills[order[i]].id, draw_probability(rng, options.edge_rate)});
    }
    if (unit(rng) < options.leak_rate) gate.leak_strength = draw_probability(rng, options.edge_rate);
    model.gates.push_back(std::move(gate));
  }
  return model;
}

NoisyGate random_gate(std::mt19937_64& rng, std::size_t inputs, GateKind kind, bool leaky) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  NoisyGate gate;
  gate.id = "g";
  gate.kind = kind;
  for (std::size_t i = 0; i < inputs; ++i) {
    gate.inputs.push_back({"s" + std::to_string(i), draw_probability(rng, 0.05)});
  }
  if (leaky) gate.leak_strength = unit(rng);
  return gate;
}

EvidenceSet sample_evidence(std::mt19937_64& rng, const AssessmentModel& model,
                            double observe_rate) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ParentAssignment state;
  for (const auto& skill : model.skills) state[skill.id] = unit(rng) < skill.prior_true;

  EvidenceSet evidence;
  for (const auto& gate : model.gates) {
    std::vector<bool> parents;
    parents.reserve(gate.inputs.size());
    for (const auto& input : gate.inputs) parents.push_back(state.at(input.skill_id));
    const double p_hat = gate_success_prob(gate, parents);
    // Draw both numbers unconditionally so the stream does not depend on
    // which gates end up observed.
    const bool hat = unit(rng) < p_hat;
    const bool keep = unit(rng) < observe_rate;
    if (keep) evidence[gate.id] = hat ? Outcome::Distinguished : Outcome::NonDistinguished;
  }
  return evidence;
}

}  // namespace noisygate
