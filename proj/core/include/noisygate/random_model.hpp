#pragma once

#include <cstddef>
#include <random>

#include "noisygate/inference.hpp"
#include "noisygate/model.hpp"

namespace noisygate {

struct RandomModelOptions {
  std::size_t min_skills = 1;
  std::size_t max_skills = 8;
  std::size_t min_gates = 1;
  std::size_t max_gates = 10;
  /// Upper bound on inputs per gate; 0 means up to every skill.
  std::size_t max_inputs = 0;
  /// Probability a gate gets a leak.
  double leak_rate = 0.5;
  /// Probability a gate is OR rather than AND.
  double or_rate = 0.5;
  /// Probability a drawn probability snaps to an exact 0 or 1.
  double edge_rate = 0.05;
};

/// Seeded generator for valid models. Strengths and priors are drawn
/// uniformly, with occasional exact 0/1 values.
AssessmentModel random_model(std::mt19937_64& rng, const RandomModelOptions& options = {});

/// A single gate over skills "s0".."s{n-1}" with every skill as input.
NoisyGate random_gate(std::mt19937_64& rng, std::size_t inputs, GateKind kind, bool leaky);

/// Draws skills from their priors and gate outcomes from their CPTs, then
/// keeps each gate with probability `observe_rate`. The result always has
/// positive probability under the model.
EvidenceSet sample_evidence(std::mt19937_64& rng, const AssessmentModel& model,
                            double observe_rate = 0.6);

}  // namespace noisygate
