#include "noisygate/gates.hpp"

#include <algorithm>
#include <cstdint>

#include "noisygate/errors.hpp"

namespace noisygate {

namespace {

std::vector<bool> positional_states(const NoisyGate& gate,
                                    const ParentAssignment& assignment) {
  if (assignment.size() != gate.inputs.size()) {
    throw ContractError("assignment for gate '" + gate.id + "' has " +
                        std::to_string(assignment.size()) + " entries, expected " +
                        std::to_string(gate.inputs.size()));
  }
  std::vector<bool> states;
  states.reserve(gate.inputs.size());
  for (const auto& input : gate.inputs) {
    auto it = assignment.find(input.skill_id);
    if (it == assignment.end()) {
      throw ContractError("assignment for gate '" + gate.id + "' misses skill '" +
                          input.skill_id + "'");
    }
    states.push_back(it->second);
  }
  return states;
}

}  // namespace

double gate_success_prob(const NoisyGate& gate, const std::vector<bool>& states) {
  if (states.size() != gate.inputs.size()) {
    throw ContractError("gate '" + gate.id + "' expects " +
                        std::to_string(gate.inputs.size()) + " input states");
  }
  const bool hat = distinguished_state(gate.kind);
  double p = gate.leak_factor();
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] != hat) p *= gate.inputs[i].lambda();
  }
  return p;
}

double gate_success_prob(const NoisyGate& gate, const ParentAssignment& assignment) {
  return gate_success_prob(gate, positional_states(gate, assignment));
}

bool deterministic_output(GateKind kind, const std::vector<bool>& auxiliary_states) {
  if (kind == GateKind::Or) {
    return std::any_of(auxiliary_states.begin(), auxiliary_states.end(),
                       [](bool s) { return s; });
  }
  return std::all_of(auxiliary_states.begin(), auxiliary_states.end(),
                     [](bool s) { return s; });
}

ExplicitGateNetwork construct_explicit_network(const NoisyGate& gate) {
  ExplicitGateNetwork net;
  net.kind = gate.kind;
  net.auxiliaries.reserve(gate.inputs.size());
  for (const auto& input : gate.inputs) {
    net.auxiliaries.push_back({input.skill_id, 1.0, input.lambda()});
  }
  if (gate.leak_strength) net.leak_p_distinguished = 1.0 - *gate.leak_strength;
  return net;
}

double marginalize_explicit(const ExplicitGateNetwork& network,
                            const ParentAssignment& assignment, std::size_t cap) {
  const std::size_t m = network.auxiliary_count();
  if (m > cap) throw CapacityError("explicit network auxiliaries", m, cap);
  if (assignment.size() != network.auxiliaries.size()) {
    throw ContractError("assignment does not cover the network inputs");
  }

  const bool hat = distinguished_state(network.kind);
  std::vector<bool> parent(network.auxiliaries.size());
  for (std::size_t i = 0; i < network.auxiliaries.size(); ++i) {
    auto it = assignment.find(network.auxiliaries[i].parent_id);
    if (it == assignment.end()) {
      throw ContractError("assignment misses skill '" +
                          network.auxiliaries[i].parent_id + "'");
    }
    parent[i] = it->second;
  }

  double total = 0.0;
  std::vector<bool> aux(m);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    double p = 1.0;
    for (std::size_t i = 0; i < m; ++i) aux[i] = (mask >> i) & 1U;
    for (std::size_t i = 0; i < network.auxiliaries.size() && p > 0.0; ++i) {
      const auto& a = network.auxiliaries[i];
      const double p_hat = parent[i] == hat ? a.p_distinguished_given_distinguished
                                            : a.p_distinguished_given_not;
      p *= aux[i] == hat ? p_hat : 1.0 - p_hat;
    }
    if (network.leak_p_distinguished) {
      const double p_hat = *network.leak_p_distinguished;
      p *= aux[m - 1] == hat ? p_hat : 1.0 - p_hat;
    }
    if (p > 0.0 && deterministic_output(network.kind, aux) == hat) total += p;
  }
  return total;
}

double ConditionalTable::p_true(std::size_t row) const {
  const auto& r = rows.at(row);
  return distinguished_state(kind) ? r.p_distinguished : r.p_non_distinguished;
}

ConditionalTable materialize_cpt(const NoisyGate& gate, std::size_t cap) {
  const std::size_t n = gate.inputs.size();
  if (n > cap) throw CapacityError("CPT parents", n, cap);

  ConditionalTable table;
  table.kind = gate.kind;
  for (const auto& input : gate.inputs) table.parent_ids.push_back(input.skill_id);
  table.rows.reserve(std::size_t{1} << n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    CptRow row;
    row.parents.resize(n);
    for (std::size_t i = 0; i < n; ++i) row.parents[i] = (mask >> i) & 1U;
    row.p_distinguished = gate_success_prob(gate, row.parents);
    row.p_non_distinguished = 1.0 - row.p_distinguished;
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace noisygate
