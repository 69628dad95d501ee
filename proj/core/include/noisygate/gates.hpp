#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "noisygate/model.hpp"

namespace noisygate {

/// Size cap shared by every exponential enumeration used as an oracle.
inline constexpr std::size_t kOracleCap = 20;

/// Boolean state of each gate input, keyed by skill id.
using ParentAssignment = std::map<std::string, bool, std::less<>>;

/// P(Y = distinguished | x) for the parametric noisy gate:
///   prod_i [x_i == x^ ? 1 : lambda_i] * lambda0.
/// Throws ContractError unless the assignment keys equal the input ids.
double gate_success_prob(const NoisyGate& gate, const ParentAssignment& assignment);

/// Positional variant: `states[i]` is the state of `gate.inputs[i]`.
double gate_success_prob(const NoisyGate& gate, const std::vector<bool>& states);

/// X'_i of the explicit formulation: a copy of its parent that may flip from
/// the non-distinguished state to the distinguished one.
struct AuxiliaryVariable {
  /// Parent skill id; empty for the leak auxiliary.
  std::string parent_id;
  /// P(X' = x^ | X = x^). Always 1.
  double p_distinguished_given_distinguished = 1.0;
  /// P(X' = x^ | X = not x^) = lambda.
  double p_distinguished_given_not = 0.0;
};

/// Noisy gate unrolled into auxiliaries plus a deterministic OR/AND.
struct ExplicitGateNetwork {
  GateKind kind = GateKind::And;
  std::vector<AuxiliaryVariable> auxiliaries;
  /// P(X'_0 = x^) = lambda0 when leaky. The leak's virtual parent is clamped
  /// to the non-distinguished state, so this is its only table.
  std::optional<double> leak_p_distinguished;

  std::size_t auxiliary_count() const noexcept {
    return auxiliaries.size() + (leak_p_distinguished ? 1 : 0);
  }
};

/// Deterministic output of the gate function over auxiliary states:
/// disjunction for OR, conjunction for AND.
bool deterministic_output(GateKind kind, const std::vector<bool>& auxiliary_states);

ExplicitGateNetwork construct_explicit_network(const NoisyGate& gate);

/// P(Y = x^ | x) by summing over every auxiliary configuration.
/// Throws CapacityError above `cap` auxiliaries.
double marginalize_explicit(const ExplicitGateNetwork& network,
                            const ParentAssignment& assignment,
                            std::size_t cap = kOracleCap);

struct CptRow {
  /// Parent states in input order.
  std::vector<bool> parents;
  double p_distinguished = 0.0;
  double p_non_distinguished = 0.0;
};

/// Full table P(Y | parents); 2^n rows with row r encoding input i in bit i.
struct ConditionalTable {
  GateKind kind = GateKind::And;
  std::vector<std::string> parent_ids;
  std::vector<CptRow> rows;

  /// P(Y = 1 | row parents), independent of the distinguished state.
  double p_true(std::size_t row) const;
};

/// Throws CapacityError above `cap` inputs.
ConditionalTable materialize_cpt(const NoisyGate& gate, std::size_t cap = kOracleCap);

}  // namespace noisygate
