#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capex/variables.hpp"

namespace capex {

// Bipartite capability network: context and command variables point into
// outcome variables. Attributes are tracked outside the network until they
// are promoted.
struct NetworkStructure {
  std::vector<VariableSpec> nodes;
  // outcome variable -> ordered parent (situation variable) names
  std::map<std::string, std::vector<std::string>, std::less<>> parents;

  // Throws InvalidVariable/ConfigError when an invariant is broken:
  // attribute nodes, non-situation parents, duplicate parents, an orphan
  // context/command variable, or an outcome without a parent entry.
  void validate() const;

  const VariableSpec* find(std::string_view name) const;
  const VariableSpec& variable(std::string_view name) const;
  bool has(std::string_view name) const { return find(name) != nullptr; }

  std::vector<VariableSpec> with_role(Role role) const;
  // Context and command variables, in node order.
  std::vector<VariableSpec> situation_variables() const;
  std::vector<std::string> outcome_names() const;
  const std::vector<std::string>& parents_of(std::string_view outcome) const;
  std::vector<VariableSpec> parent_specs(std::string_view outcome) const;
  std::size_t row_count(std::string_view outcome) const;

  friend bool operator==(const NetworkStructure&, const NetworkStructure&) = default;
};

// Dirichlet pseudo-counts for every parent configuration of one outcome.
struct DirichletCPT {
  std::string outcome_var;
  std::vector<std::vector<double>> rows;

  static DirichletCPT uniform(std::string outcome_var, std::size_t row_count,
                              std::size_t cardinality, double prior = 1.0);

  void validate(std::size_t expected_rows, std::size_t cardinality) const;
  std::span<const double> row(std::size_t situation_idx) const;

  friend bool operator==(const DirichletCPT&, const DirichletCPT&) = default;
};

struct ModelState {
  NetworkStructure structure;
  std::map<std::string, DirichletCPT, std::less<>> cpts;
  // Per outcome variable, a weight per CPT row summing to one.
  std::map<std::string, std::vector<double>, std::less<>> situation_weights;
  // Symmetric pseudo-count used whenever a CPT is (re)initialised.
  double prior = 1.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
  const DirichletCPT& cpt(std::string_view outcome) const;
  const std::vector<double>& weights(std::string_view outcome) const;

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

// Validates the structure and builds CPTs at a symmetric Dirichlet prior with
// uniform situation weights.
ModelState make_prior_model(NetworkStructure structure, double prior = 1.0);

// Replaces the CPT and weights of `outcome` with a fresh prior (model.prior)
// sized for the current structure.
void reset_outcome_prior(ModelState& model, std::string_view outcome);

// Mixed-radix index of the parent configuration of `outcome` in `situation`.
// Throws MissingBinding when a parent is unbound.
std::size_t situation_index(const NetworkStructure& structure, std::string_view outcome,
                            const Instantiation& situation);

// Parent instantiation for row `situation_idx` of `outcome`.
Instantiation situation_at(const NetworkStructure& structure, std::string_view outcome,
                           std::size_t situation_idx);

// Adds one pseudo-count at (situation_idx, outcome_value). Pure: the argument
// is taken by value, so pass an rvalue to avoid the copy.
DirichletCPT posterior_update(DirichletCPT cpt, std::size_t situation_idx,
                              std::size_t outcome_value);

// alpha / alpha0 for one row.
std::vector<double> posterior_mean(const DirichletCPT& cpt, std::size_t situation_idx);

}  // namespace capex
