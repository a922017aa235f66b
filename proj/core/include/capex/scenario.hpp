#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capex/learn_loop.hpp"
#include "capex/refinement.hpp"
#include "capex/scoring.hpp"
#include "capex/subject_sim.hpp"

namespace capex {

struct ScenarioDefaults {
  double r_threshold = 0.3;
  std::uint32_t n_min = 5;
  double threshold = 0.5;
  bool promoted_controllable = true;
};

// A simulated experiment: the true subject, what the learner starts with, and
// how its capability is judged.
struct Scenario {
  std::string name;
  std::string description;
  SubjectSpec subject;
  NetworkStructure learner_structure;
  std::vector<std::string> query_vars;  // empty: every controllable situation variable
  double prior = 1.0;
  std::vector<VariableSpec> attributes;  // candidates, role attribute
  std::map<std::string, std::vector<std::string>, std::less<>> attribute_targets;
  std::optional<ReferenceSpec> reference;
  ScenarioDefaults defaults;
  // Set when the truth is drawn from Dirichlet(concentration) per trial.
  std::optional<double> random_truth;
};

Scenario parse_scenario(const nlohmann::json& j);

// A bundled scenario name or a path to a scenario file.
Scenario load_scenario(const std::string& name_or_path);

std::vector<std::string> bundled_scenario_names();
const nlohmann::json& bundled_scenario_json(std::string_view name);

LearnerState initial_learner(const Scenario& scenario);
AttributeStats initial_attribute_stats(const Scenario& scenario, std::uint32_t n_min);
RefinementConfig default_refinement(const Scenario& scenario);

struct TrialConfig {
  QueryMode mode = QueryMode::kActive;
  std::size_t iters = 0;
  std::uint64_t seed = 0;
  RefinementConfig refinement;
  bool refine = true;
  std::optional<double> random_truth;  // overrides the scenario's setting
};

struct TrialResult {
  LearnResult run;
  SubjectSpec subject;      // the truth actually used
  std::vector<double> kl;   // kl_to_truth before the first and after every experiment
};

// One seeded simulated run. The subject's outcome stream and any random truth
// depend only on the seed, so active and passive runs share them.
TrialResult run_trial(const Scenario& scenario, const TrialConfig& config);

}  // namespace capex
