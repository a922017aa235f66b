#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "capex/active_learner.hpp"
#include "capex/variables.hpp"

namespace capex {

struct RefinementConfig {
  double r_threshold = 0.3;
  std::uint32_t n_min = 5;
  bool promoted_controllable = true;

  void validate() const;
};

using Counts = std::vector<std::uint64_t>;

// Co-occurrence counts observed in one situation.
struct SituationCounts {
  Instantiation situation;
  std::uint64_t observations = 0;
  // outcome variable -> count per outcome value
  std::map<std::string, Counts, std::less<>> outcome_counts;
  // attribute -> attribute value index -> outcome variable -> count per outcome value
  std::map<std::string, std::vector<std::map<std::string, Counts, std::less<>>>, std::less<>> cells;
  // attribute -> count per attribute value
  std::map<std::string, Counts, std::less<>> attribute_counts;

  friend bool operator==(const SituationCounts&, const SituationCounts&) = default;
};

// Empirical statistics backing the attribute-dependence test. Attributes are
// drawn independently of the situation, so the global attribute marginals
// stand in for the per-situation ones.
struct AttributeStats {
  std::vector<VariableSpec> attributes;  // candidates not yet in the network
  std::vector<VariableSpec> outcomes;
  // attribute -> outcome variables it may influence
  std::map<std::string, std::vector<std::string>, std::less<>> targets;
  std::map<std::string, SituationCounts, std::less<>> situations;  // keyed by Instantiation::key()
  std::map<std::string, Counts, std::less<>> attr_marginals;
  std::uint32_t n_min = 5;

  const VariableSpec* find_attribute(std::string_view name) const;
  const SituationCounts* find_situation(const Instantiation& situation) const;
  std::vector<Instantiation> observed_situations() const;

  friend bool operator==(const AttributeStats&, const AttributeStats&) = default;
};

// `targets` may be empty, meaning every attribute can affect every outcome.
AttributeStats make_attribute_stats(std::vector<VariableSpec> attributes,
                                    std::vector<VariableSpec> outcomes, std::uint32_t n_min,
                                    std::map<std::string, std::vector<std::string>, std::less<>>
                                        targets = {});

// Adds one record. `attributes` must bind every tracked attribute and
// `outcome` every outcome variable; throws OutOfDomain/MissingBinding.
AttributeStats update_attribute_stats(AttributeStats stats, const Instantiation& situation,
                                      const Instantiation& attributes,
                                      const Instantiation& outcome);

// Attribute values seen at least n_min times in the situation, domain order.
std::vector<std::string> domain_valid(const AttributeStats& stats, std::string_view attr,
                                      const Instantiation& situation);

// Plug-in estimate of I(o; A | situation) restricted to the valid attribute
// values, with the global attribute marginal (renormalised over those values)
// weighting the conditional entropies. Clamped at 0. Empty when the situation
// was never observed.
std::optional<double> mutual_information_estimate(const AttributeStats& stats,
                                                  std::string_view outcome_var,
                                                  std::string_view attr,
                                                  const Instantiation& situation);

// I / min(H(o | situation), H(A)), in [0, 1]; 0 when the denominator is 0
// or the situation is unobserved.
double coefficient_of_mi(const AttributeStats& stats, std::string_view outcome_var,
                         std::string_view attr, const Instantiation& situation);

// Attributes whose coefficient exceeds config.r_threshold in at least one of
// the given situations. Uses config.n_min for value validity.
std::set<std::string> identify_dependence(const AttributeStats& stats,
                                          std::string_view outcome_var,
                                          std::span<const Instantiation> situations_observed,
                                          const RefinementConfig& config);

// outcome variable -> attributes to add as its parents
using Promotions = std::map<std::string, std::set<std::string>, std::less<>>;

struct RefinedModel {
  LearnerState learner;
  AttributeStats stats;
  std::vector<std::string> added;  // newly promoted, in promotion order
};

// Promotes attributes to context variables and parents of the dependent
// outcomes. Affected CPTs restart at the prior; history is kept but not
// replayed; promoted attributes leave the candidate statistics.
// Throws ConfigError for unknown or already-present attributes.
RefinedModel modify_model(LearnerState state, AttributeStats stats, const Promotions& promoted,
                          const RefinementConfig& config);

}  // namespace capex
