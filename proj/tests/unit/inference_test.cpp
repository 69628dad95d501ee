#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <tuple>

#include <gtest/gtest.h>

#include "noisygate/errors.hpp"
#include "noisygate/gates.hpp"
#include "noisygate/inference.hpp"
#include "noisygate/random_model.hpp"
#include "property.hpp"

namespace noisygate {
namespace {

NoisyGate make_gate(std::string id, GateKind kind,
                    std::vector<std::pair<std::string, double>> inputs,
                    std::optional<double> leak = std::nullopt) {
  NoisyGate g;
  g.id = std::move(id);
  g.kind = kind;
  for (auto& [skill, s] : inputs) g.inputs.push_back({skill, s});
  g.leak_strength = leak;
  return g;
}

AssessmentModel model_of(std::vector<SkillVariable> skills, std::vector<NoisyGate> gates) {
  AssessmentModel m;
  m.name = "test";
  m.skills = std::move(skills);
  m.gates = std::move(gates);
  return m;
}

// Joint enumeration written independently of the library: P(X = not-x^ | Y)
// for input k of a gate whose inputs have the given pis and lambdas.
double enumerate_posterior(const std::vector<double>& pi, const std::vector<double>& lambda,
                           double lambda0, std::size_t k, bool y_distinguished) {
  const std::size_t n = pi.size();
  double evidence = 0.0;
  double joint = 0.0;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    // bit set = input in its non-distinguished state
    double w = 1.0;
    double p_hat = lambda0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool off = (mask >> i) & 1U;
      w *= off ? pi[i] : 1.0 - pi[i];
      if (off) p_hat *= lambda[i];
    }
    const double like = y_distinguished ? p_hat : 1.0 - p_hat;
    evidence += w * like;
    if ((mask >> k) & 1U) joint += w * like;
  }
  return joint / evidence;
}

double enumerate_marginal(const std::vector<double>& pi, const std::vector<double>& lambda) {
  double total = 0.0;
  const std::size_t n = pi.size();
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    double w = 1.0;
    double p_hat = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool off = (mask >> i) & 1U;
      w *= off ? pi[i] : 1.0 - pi[i];
      if (off) p_hat *= lambda[i];
    }
    total += w * p_hat;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Closed forms

TEST(PosteriorGivenDistinguished, IrrelevantArcKeepsPrior) {
  EXPECT_DOUBLE_EQ(posterior_given_distinguished(0.5, 1.0), 0.5);
}

TEST(PosteriorGivenDistinguished, DeterministicArcExcludesAbsence) {
  EXPECT_EQ(posterior_given_distinguished(0.5, 0.0), 0.0);
}

TEST(PosteriorGivenDistinguished, SingleSkillOracle) {
  const double derived = enumerate_posterior({0.5}, {0.2}, 1.0, 0, true);
  EXPECT_NEAR(derived, 0.16666666666666666, 1e-15);
  EXPECT_NEAR(posterior_given_distinguished(0.5, 0.2), 0.16666666666666666, 1e-15);
}

TEST(PosteriorGivenDistinguished, ImpossibleEvidence) {
  EXPECT_THROW(posterior_given_distinguished(1.0, 0.0), ImpossibleEvidenceError);
}

TEST(AnswerMarginal, SingleInputOracle) {
  EXPECT_NEAR(enumerate_marginal({0.5}, {0.2}), 0.6, 1e-15);
  const auto g = make_gate("g", GateKind::And, {{"a", 0.8}});
  const std::vector<double> pis{0.5};
  EXPECT_NEAR(answer_marginal(g, pis), 0.6, 1e-15);
}

TEST(AnswerMarginal, TwoInputOracle) {
  EXPECT_NEAR(enumerate_marginal({0.5, 0.5}, {0.2, 0.4}), 0.42, 1e-15);
  const auto g = make_gate("g", GateKind::Or, {{"a", 0.8}, {"b", 0.6}});
  const std::vector<double> pis{0.5, 0.5};
  EXPECT_NEAR(answer_marginal(g, pis), 0.42, 1e-15);
}

TEST(AnswerMarginal, ZeroStrengthGateIsLeakOnly) {
  const auto plain = make_gate("g", GateKind::And, {{"a", 0.0}, {"b", 0.0}});
  const auto leaky = make_gate("g", GateKind::And, {{"a", 0.0}, {"b", 0.0}}, 0.3);
  const std::vector<double> pis{0.4, 0.9};
  EXPECT_EQ(answer_marginal(plain, pis), 1.0);
  EXPECT_NEAR(answer_marginal(leaky, pis), 0.7, 1e-15);
}

TEST(PosteriorGivenNonDistinguished, SingleInputIsCertain) {
  const auto g = make_gate("g", GateKind::And, {{"a", 0.8}});
  const std::vector<double> pis{0.5};
  EXPECT_NEAR(posterior_given_non_distinguished(g, pis, 0), 1.0, 1e-15);
}

TEST(PosteriorGivenNonDistinguished, TwoInputOracle) {
  const double derived = enumerate_posterior({0.5, 0.5}, {0.2, 0.4}, 1.0, 0, false);
  EXPECT_NEAR(derived, 0.43 / 0.58, 1e-15);
  EXPECT_NEAR(derived, 0.74138, 1e-5);
  const auto g = make_gate("g", GateKind::And, {{"a", 0.8}, {"b", 0.6}});
  const std::vector<double> pis{0.5, 0.5};
  EXPECT_NEAR(posterior_given_non_distinguished(g, pis, 0), 0.43 / 0.58, 1e-15);
}

TEST(PosteriorGivenNonDistinguished, IrrelevantInputKeepsPrior) {
  const auto g = make_gate("g", GateKind::Or, {{"a", 0.0}, {"b", 0.6}}, 0.2);
  const std::vector<double> pis{0.37, 0.5};
  EXPECT_NEAR(posterior_given_non_distinguished(g, pis, 0), 0.37, 1e-15);
}

TEST(PosteriorGivenNonDistinguished, ImpossibleEvidence) {
  // Non-leaky, every input already certain in the distinguished state.
  const auto g = make_gate("g", GateKind::And, {{"a", 0.8}});
  const std::vector<double> pis{0.0};
  EXPECT_THROW(posterior_given_non_distinguished(g, pis, 0), ImpossibleEvidenceError);
}

// ---------------------------------------------------------------------------
// Engine

TEST(InferPosteriors, EmptyEvidenceReturnsPriors) {
  const auto m = model_of({{"a", "", 0.2}, {"b", "", 0.9}},
                          {make_gate("g", GateKind::And, {{"a", 0.5}, {"b", 0.5}})});
  const auto post = infer_posteriors(m, {});
  ASSERT_EQ(post.size(), 2u);
  EXPECT_EQ(post[0].posterior_true, 0.2);
  EXPECT_EQ(post[1].posterior_true, 0.9);
  EXPECT_EQ(post[0].absorbed_count + post[0].joint_count, 0u);
}

TEST(InferPosteriors, SingleDistinguishedGateMatchesClosedForm) {
  for (GateKind kind : {GateKind::And, GateKind::Or}) {
    const auto m = model_of({{"a", "", 0.3}, {"b", "", 0.6}},
                            {make_gate("g", kind, {{"a", 0.7}, {"b", 0.4}}, 0.1)});
    const auto post = infer_posteriors(m, {{"g", Outcome::Distinguished}});
    for (std::size_t i = 0; i < 2; ++i) {
      const double pi = effective_pi(m.skills[i], kind);
      const double expected = prior_true_from_pi(
          posterior_given_distinguished(pi, m.gates[0].inputs[i].lambda()), kind);
      EXPECT_NEAR(post[i].posterior_true, expected, 1e-15);
      EXPECT_EQ(post[i].absorbed_count, 1u);
    }
  }
}

TEST(InferPosteriors, SingleNonDistinguishedGateMatchesClosedForm) {
  const auto m = model_of({{"a", "", 0.3}, {"b", "", 0.6}, {"c", "", 0.5}},
                          {make_gate("g", GateKind::And, {{"a", 0.7}, {"b", 0.4}}, 0.1)});
  const auto post = infer_posteriors(m, {{"g", Outcome::NonDistinguished}});
  const std::vector<double> pis{0.7, 0.4};
  for (std::size_t k = 0; k < 2; ++k) {
    const double expected =
        1.0 - posterior_given_non_distinguished(m.gates[0], pis, k);
    EXPECT_NEAR(post[k].posterior_true, expected, 1e-14);
    EXPECT_EQ(post[k].joint_count, 1u);
  }
  EXPECT_EQ(post[2].posterior_true, 0.5);
}

TEST(InferPosteriors, AgreesWithBruteForceOnMixedEvidence) {
  const auto m = model_of(
      {{"a", "", 0.3}, {"b", "", 0.6}, {"c", "", 0.5}, {"d", "", 0.8}},
      {make_gate("g1", GateKind::And, {{"a", 0.7}, {"b", 0.4}}, 0.1),
       make_gate("g2", GateKind::Or, {{"b", 0.9}, {"c", 0.2}}),
       make_gate("g3", GateKind::And, {{"c", 0.5}, {"d", 0.5}}, 0.3),
       make_gate("g4", GateKind::Or, {{"a", 0.6}, {"d", 0.1}}, 0.05)});
  const EvidenceSet ev{{"g1", Outcome::NonDistinguished},
                       {"g2", Outcome::Distinguished},
                       {"g3", Outcome::Distinguished},
                       {"g4", Outcome::NonDistinguished}};
  const auto fast = infer_posteriors(m, ev);
  const auto slow = brute_force_posteriors(m, ev);
  for (std::size_t i = 0; i < fast.size(); ++i) {
    EXPECT_NEAR(fast[i].posterior_true, slow[i].posterior_true, 1e-12);
    EXPECT_EQ(fast[i].absorbed_count, slow[i].absorbed_count);
    EXPECT_EQ(fast[i].joint_count, slow[i].joint_count);
  }
}

TEST(InferPosteriors, UnknownGateIsContractError) {
  const auto m = model_of({{"a", "", 0.5}}, {make_gate("g", GateKind::And, {{"a", 0.5}})});
  EXPECT_THROW(infer_posteriors(m, {{"nope", Outcome::Distinguished}}), ContractError);
}

TEST(InferPosteriors, InconsistentEvidenceReportsMinimalSet) {
  const auto m = model_of({{"a", "", 0.5}, {"b", "", 0.5}},
                          {make_gate("noise", GateKind::Or, {{"b", 0.5}}),
                           make_gate("pass", GateKind::And, {{"a", 1.0}}),
                           make_gate("fail", GateKind::And, {{"a", 1.0}})});
  // "pass" correct forces a = 1; "fail" wrong then needs a = 0.
  const EvidenceSet ev{{"noise", Outcome::NonDistinguished},
                       {"pass", Outcome::Distinguished},
                       {"fail", Outcome::NonDistinguished}};
  try {
    infer_posteriors(m, ev);
    FAIL() << "expected InconsistentEvidenceError";
  } catch (const InconsistentEvidenceError& e) {
    EXPECT_EQ(e.gates(), (std::vector<std::string>{"pass", "fail"}));
  }
  EXPECT_EQ(evidence_probability(m, ev), 0.0);
  EXPECT_THROW(brute_force_posteriors(m, ev), InconsistentEvidenceError);
}

TEST(InferPosteriors, DegeneratePriorTriggersInconsistency) {
  const auto m = model_of({{"a", "", 0.0}}, {make_gate("g", GateKind::And, {{"a", 1.0}})});
  try {
    infer_posteriors(m, {{"g", Outcome::Distinguished}});
    FAIL() << "expected InconsistentEvidenceError";
  } catch (const InconsistentEvidenceError& e) {
    EXPECT_EQ(e.gates(), std::vector<std::string>{"g"});
  }
}

TEST(InferPosteriors, JointStepRespectsCap) {
  std::vector<SkillVariable> skills;
  std::vector<std::pair<std::string, double>> inputs;
  for (int i = 0; i < 6; ++i) {
    skills.push_back({"s" + std::to_string(i), "", 0.5});
    inputs.push_back({"s" + std::to_string(i), 0.5});
  }
  const auto m = model_of(skills, {make_gate("g", GateKind::And, inputs)});
  InferenceOptions options;
  options.joint_skill_cap = 5;
  EXPECT_THROW(infer_posteriors(m, {{"g", Outcome::NonDistinguished}}, options), CapacityError);
  EXPECT_NO_THROW(infer_posteriors(m, {{"g", Outcome::Distinguished}}, options));
}

TEST(BruteForce, RefusesAboveCap) {
  std::vector<SkillVariable> skills;
  for (int i = 0; i < 21; ++i) skills.push_back({"s" + std::to_string(i), "", 0.5});
  const auto m = model_of(skills, {});
  EXPECT_THROW(brute_force_posteriors(m, {}), CapacityError);
}

TEST(AbsorbDistinguished, FoldsInOrder) {
  const auto m = model_of({{"a", "", 0.5}, {"b", "", 0.5}},
                          {make_gate("g1", GateKind::And, {{"a", 0.8}}),
                           make_gate("g2", GateKind::Or, {{"a", 0.5}, {"b", 0.5}})});
  const std::vector<std::string> ids{"g1", "g2"};
  const auto priors = absorb_distinguished(m, ids);
  const auto post = infer_posteriors(
      m, {{"g1", Outcome::Distinguished}, {"g2", Outcome::Distinguished}});
  EXPECT_NEAR(priors[0], post[0].posterior_true, 1e-15);
  EXPECT_NEAR(priors[1], post[1].posterior_true, 1e-15);
}

TEST(Scaling, TenThousandInputGateStaysLinear) {
  NoisyGate g;
  g.id = "wide";
  g.kind = GateKind::And;
  g.leak_strength = 0.1;
  std::vector<double> pis;
  for (int i = 0; i < 10000; ++i) {
    g.inputs.push_back({"s" + std::to_string(i), (i % 10) / 10.0});
    pis.push_back(0.5);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const double p = answer_marginal(g, pis);
  const double q = posterior_given_non_distinguished(g, pis, 17);
  const auto elapsed = std::chrono::steady_clock::now() - t0;
  EXPECT_GE(p, 0.0);
  EXPECT_GE(q, 0.5);
  const double millis = std::chrono::duration<double, std::milli>(elapsed).count();
  EXPECT_LT(millis, 10.0);
  EXPECT_THROW(materialize_cpt(g), CapacityError);
}

// ---------------------------------------------------------------------------
// Next-question suggestion

TEST(Suggest, OnlyCandidate) {
  const auto m = model_of({{"a", "", 0.5}}, {make_gate("g1", GateKind::And, {{"a", 0.5}}),
                                              make_gate("g2", GateKind::And, {{"a", 0.9}})});
  EXPECT_EQ(suggest_next_question(m, {}, {"g1"}), "g2");
  EXPECT_EQ(suggest_next_question(m, {{"g2", Outcome::Distinguished}}, {}), "g1");
}

TEST(Suggest, NoCandidateIsContractError) {
  const auto m = model_of({{"a", "", 0.5}}, {make_gate("g1", GateKind::And, {{"a", 0.5}})});
  EXPECT_THROW(suggest_next_question(m, {}, {"g1"}), ContractError);
}

TEST(Suggest, UninformativeGateNeverPreferred) {
  for (bool flat_first : {true, false}) {
    auto flat = make_gate("flat", GateKind::And, {{"a", 0.0}});
    auto sharp = make_gate("sharp", GateKind::And, {{"a", 1.0}});
    const auto m = flat_first ? model_of({{"a", "", 0.5}}, {flat, sharp})
                              : model_of({{"a", "", 0.5}}, {sharp, flat});
    EXPECT_EQ(suggest_next_question(m, {}, {}), "sharp");
  }
}

TEST(Suggest, TiesGoToDeclarationOrder) {
  const auto m = model_of({{"a", "", 0.5}, {"b", "", 0.5}},
                          {make_gate("first", GateKind::And, {{"a", 0.6}}),
                           make_gate("second", GateKind::And, {{"b", 0.6}})});
  EXPECT_EQ(suggest_next_question(m, {}, {}), "first");
}

// Expected entropy recomputed from scratch: full-joint enumeration for the
// outcome probability and brute-force posteriors under each outcome.
TEST(Suggest, ThreeGateToyMatchesExhaustiveComputation) {
  const auto m = model_of({{"a", "", 0.6}, {"b", "", 0.3}},
                          {make_gate("g1", GateKind::And, {{"a", 0.9}, {"b", 0.2}}, 0.1),
                           make_gate("g2", GateKind::Or, {{"a", 0.4}, {"b", 0.8}}),
                           make_gate("g3", GateKind::And, {{"b", 0.7}}, 0.2)});
  const EvidenceSet base{{"g3", Outcome::NonDistinguished}};

  auto joint_probability = [&](const EvidenceSet& ev) {
    double total = 0.0;
    for (int mask = 0; mask < 4; ++mask) {
      const bool a = mask & 1;
      const bool b = mask & 2;
      double w = (a ? 0.6 : 0.4) * (b ? 0.3 : 0.7);
      for (const auto& [id, outcome] : ev) {
        const auto& g = *m.find_gate(id);
        ParentAssignment pa;
        for (const auto& in : g.inputs) pa[in.skill_id] = in.skill_id == "a" ? a : b;
        const double hat = gate_success_prob(g, pa);
        w *= outcome == Outcome::Distinguished ? hat : 1.0 - hat;
      }
      total += w;
    }
    return total;
  };
  auto entropy = [](const std::vector<SkillPosterior>& post) {
    double h = 0.0;
    for (const auto& p : post) {
      const double q = p.posterior_true;
      if (q > 0 && q < 1) h -= q * std::log2(q) + (1 - q) * std::log2(1 - q);
    }
    return h;
  };

  const double p_base = joint_probability(base);
  std::string best;
  double best_h = std::numeric_limits<double>::infinity();
  std::map<std::string, double> expected;
  for (const char* id : {"g1", "g2"}) {
    EvidenceSet hat = base;
    hat[id] = Outcome::Distinguished;
    EvidenceSet non = base;
    non[id] = Outcome::NonDistinguished;
    const double p_hat = joint_probability(hat) / p_base;
    const double h = p_hat * entropy(brute_force_posteriors(m, hat)) +
                     (1 - p_hat) * entropy(brute_force_posteriors(m, non));
    expected[id] = h;
    if (h < best_h - 1e-12) {
      best_h = h;
      best = id;
    }
  }

  const auto scores = score_questions(m, base, {});
  ASSERT_EQ(scores.size(), 2u);
  for (const auto& s : scores) {
    EXPECT_NEAR(s.expected_entropy, expected[s.gate_id], 1e-10) << s.gate_id;
  }
  EXPECT_EQ(suggest_next_question(m, base, {}), best);
}

// ---------------------------------------------------------------------------
// Properties

struct EngineCase {
  AssessmentModel model;
  EvidenceSet evidence;
};

EngineCase draw_engine_case(std::mt19937_64& rng) {
  RandomModelOptions options;
  options.max_skills = 8;
  options.max_gates = 10;
  auto model = random_model(rng, options);
  auto evidence = sample_evidence(rng, model);
  return {std::move(model), std::move(evidence)};
}

TEST(InferenceProperties, EngineMatchesOracle) {
  testing::for_all("infer_posteriors == brute_force_posteriors", 31, 400, draw_engine_case,
                   [](const EngineCase& c) -> std::optional<std::string> {
                     const auto fast = infer_posteriors(c.model, c.evidence);
                     const auto slow = brute_force_posteriors(c.model, c.evidence);
                     for (std::size_t i = 0; i < fast.size(); ++i) {
                       if (auto f = testing::near(fast[i].skill_id, fast[i].posterior_true,
                                                  slow[i].posterior_true, 1e-10)) {
                         return f;
                       }
                     }
                     return std::nullopt;
                   });
}

TEST(InferenceProperties, AbsorptionOrderDoesNotMatter) {
  testing::for_all(
      "distinguished updates commute", 32, 300,
      [](std::mt19937_64& rng) {
        auto c = draw_engine_case(rng);
        std::vector<std::string> ids;
        for (const auto& [id, o] : c.evidence) {
          if (o == Outcome::Distinguished) ids.push_back(id);
        }
        auto shuffled = ids;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        return std::tuple{c.model, ids, shuffled};
      },
      [](const auto& t) -> std::optional<std::string> {
        const auto& [model, ids, shuffled] = t;
        const auto a = absorb_distinguished(model, ids);
        const auto b = absorb_distinguished(model, shuffled);
        for (std::size_t i = 0; i < a.size(); ++i) {
          if (auto f = testing::near("skill " + std::to_string(i), a[i], b[i], 1e-12)) return f;
        }
        return std::nullopt;
      });
}

TEST(InferenceProperties, IrrelevantGateLeavesSkillUnchanged) {
  testing::for_all(
      "strength-0 arc carries no information", 33, 300,
      [](std::mt19937_64& rng) {
        RandomModelOptions options;
        options.min_skills = 2;
        options.min_gates = options.max_gates = 1;
        auto model = random_model(rng, options);
        model.gates[0].inputs.push_back({model.skills[0].id, 0.0});
        std::erase_if(model.gates[0].inputs, [&](const GateInput& in) {
          return in.skill_id == model.skills[0].id && in.strength != 0.0;
        });
        const auto outcome =
            std::bernoulli_distribution(0.5)(rng) ? Outcome::Distinguished : Outcome::NonDistinguished;
        return std::pair{model, EvidenceSet{{model.gates[0].id, outcome}}};
      },
      [](const auto& c) -> std::optional<std::string> {
        if (evidence_probability(c.first, c.second) == 0.0) return std::nullopt;
        const auto post = infer_posteriors(c.first, c.second);
        return testing::near("skill 0", post[0].posterior_true, c.first.skills[0].prior_true, 1e-15);
      });
}

TEST(InferenceProperties, SuggestionScoresAreEntropies) {
  testing::for_all(
      "expected entropy stays within [0, n]", 34, 100,
      [](std::mt19937_64& rng) {
        RandomModelOptions options;
        options.max_skills = 5;
        options.max_gates = 5;
        auto model = random_model(rng, options);
        auto evidence = sample_evidence(rng, model, 0.3);
        return EngineCase{model, evidence};
      },
      [](const EngineCase& c) -> std::optional<std::string> {
        for (const auto& s : score_questions(c.model, c.evidence, {})) {
          if (!(s.expected_entropy >= -1e-12 &&
                s.expected_entropy <= static_cast<double>(c.model.skills.size()) + 1e-12)) {
            return s.gate_id + " scored " + std::to_string(s.expected_entropy);
          }
          if (!(s.p_distinguished >= 0.0 && s.p_distinguished <= 1.0 + 1e-12)) {
            return s.gate_id + " outcome probability " + std::to_string(s.p_distinguished);
          }
        }
        return std::nullopt;
      });
}

}  // namespace
}  // namespace noisygate
