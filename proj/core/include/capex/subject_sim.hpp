#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "capex/learn_loop.hpp"
#include "capex/network.hpp"
#include "capex/random.hpp"

namespace capex {

// Overrides the outcome distribution whenever `guard` matches, e.g. a ball of
// the wrong size is never detected and so never kicked.
struct HiddenRule {
  Instantiation guard;
  std::map<std::string, std::vector<double>, std::less<>> override_dist;  // outcome -> dist

  friend bool operator==(const HiddenRule&, const HiddenRule&) = default;
};

// Ground truth for a simulated subject, over the true variable set (which may
// contain variables the learner does not know about yet).
struct SubjectSpec {
  std::vector<VariableSpec> variables;
  std::map<std::string, std::vector<std::string>, std::less<>> parents;
  // outcome -> probability rows in mixed-radix order over its true parents
  std::map<std::string, std::vector<std::vector<double>>, std::less<>> truth;
  double noise_rate = 0.0;
  std::vector<HiddenRule> hidden_rules;
  Instantiation fixed;  // environment values nobody chooses
  std::uint64_t seed = 0;

  void validate() const;
  const VariableSpec& variable(std::string_view name) const;
  const VariableSpec* find(std::string_view name) const;
  std::vector<VariableSpec> parent_specs(std::string_view outcome) const;
  std::vector<std::string> outcome_names() const;

  // What the subject actually samples from: a matching hidden rule's
  // override, else (1 - noise) * truth row + noise * uniform.
  // `full` must bind the true parents of `outcome` and every guard variable.
  std::vector<double> effective_distribution(std::string_view outcome,
                                             const Instantiation& full) const;

  friend bool operator==(const SubjectSpec&, const SubjectSpec&) = default;
};

// One draw of every outcome variable. Hidden rules take precedence over noise.
Instantiation sample_outcome(const SubjectSpec& spec, const Instantiation& situation,
                             const Instantiation& attributes, Rng& rng);

// Uniform average over true situations of KL(effective truth || learned mean),
// summed over outcome variables. A learned model that lacks a true parent is
// compared row by row against every true row it aggregates. Throws
// ConfigError when the learned model uses a variable the truth does not have.
double eval_kl(const ModelState& learned, const SubjectSpec& spec);

// Smallest eval_kl any parameterisation of `structure` can reach: each
// learned row set to the mean of the effective truth rows it aggregates.
double best_achievable_kl(const NetworkStructure& structure, const SubjectSpec& spec);

// Replaces every truth row with a Dirichlet(concentration) draw.
SubjectSpec randomize_truth(SubjectSpec spec, Rng& rng, double concentration = 1.0);

class SimulatedSubject : public Subject {
 public:
  explicit SimulatedSubject(SubjectSpec spec);

  ExperimentResult experiment(const Instantiation& query, const Instantiation& attributes,
                              std::span<const VariableSpec> environment) override;

  const SubjectSpec& spec() const { return spec_; }

 private:
  SubjectSpec spec_;
  Rng rng_;
};

}  // namespace capex
