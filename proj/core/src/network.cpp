#include "capex/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "capex/errors.hpp"

namespace capex {

void NetworkStructure::validate() const {
  std::set<std::string_view> names;
  for (const auto& v : nodes) {
    v.validate();
    if (v.role == Role::kAttribute) {
      throw InvalidVariable("attribute '" + v.name + "' cannot be a network node");
    }
    if (!names.insert(v.name).second) {
      throw InvalidVariable("duplicate variable '" + v.name + "'");
    }
  }
  std::set<std::string_view> used_as_parent;
  for (const auto& v : nodes) {
    if (v.role != Role::kOutcome) continue;
    auto it = parents.find(v.name);
    if (it == parents.end()) {
      throw ConfigError("outcome variable '" + v.name + "' has no parent list");
    }
    std::set<std::string_view> seen;
    for (const auto& p : it->second) {
      const VariableSpec* spec = find(p);
      if (spec == nullptr) throw ConfigError("unknown parent '" + p + "' of '" + v.name + "'");
      if (!spec->is_situation()) {
        throw ConfigError("parent '" + p + "' of '" + v.name + "' is not a situation variable");
      }
      if (!seen.insert(p).second) {
        throw ConfigError("duplicate parent '" + p + "' of '" + v.name + "'");
      }
      used_as_parent.insert(p);
    }
  }
  for (const auto& [outcome, _] : parents) {
    const VariableSpec* spec = find(outcome);
    if (spec == nullptr || spec->role != Role::kOutcome) {
      throw ConfigError("parent list given for non-outcome '" + outcome + "'");
    }
  }
  for (const auto& v : nodes) {
    if (v.is_situation() && !used_as_parent.contains(v.name)) {
      throw ConfigError("situation variable '" + v.name + "' is not a parent of any outcome");
    }
  }
  if (std::none_of(nodes.begin(), nodes.end(),
                   [](const VariableSpec& v) { return v.role == Role::kOutcome; })) {
    throw ConfigError("network has no outcome variable");
  }
}

const VariableSpec* NetworkStructure::find(std::string_view name) const {
  for (const auto& v : nodes) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

const VariableSpec& NetworkStructure::variable(std::string_view name) const {
  if (const auto* v = find(name)) return *v;
  throw MissingBinding("variable '" + std::string(name) + "' is not in the network");
}

std::vector<VariableSpec> NetworkStructure::with_role(Role role) const {
  std::vector<VariableSpec> out;
  std::copy_if(nodes.begin(), nodes.end(), std::back_inserter(out),
               [role](const VariableSpec& v) { return v.role == role; });
  return out;
}

std::vector<VariableSpec> NetworkStructure::situation_variables() const {
  std::vector<VariableSpec> out;
  std::copy_if(nodes.begin(), nodes.end(), std::back_inserter(out),
               [](const VariableSpec& v) { return v.is_situation(); });
  return out;
}

std::vector<std::string> NetworkStructure::outcome_names() const {
  std::vector<std::string> out;
  for (const auto& v : nodes) {
    if (v.role == Role::kOutcome) out.push_back(v.name);
  }
  return out;
}

const std::vector<std::string>& NetworkStructure::parents_of(std::string_view outcome) const {
  auto it = parents.find(outcome);
  if (it == parents.end()) {
    throw MissingBinding("'" + std::string(outcome) + "' is not an outcome variable");
  }
  return it->second;
}

std::vector<VariableSpec> NetworkStructure::parent_specs(std::string_view outcome) const {
  std::vector<VariableSpec> out;
  for (const auto& p : parents_of(outcome)) out.push_back(variable(p));
  return out;
}

std::size_t NetworkStructure::row_count(std::string_view outcome) const {
  std::size_t n = 1;
  for (const auto& p : parents_of(outcome)) n *= variable(p).cardinality();
  return n;
}

DirichletCPT DirichletCPT::uniform(std::string outcome_var, std::size_t row_count,
                                   std::size_t cardinality, double prior) {
  if (!(prior > 0.0) || !std::isfinite(prior)) {
    throw OutOfDomain("Dirichlet prior must be positive and finite");
  }
  DirichletCPT cpt;
  cpt.outcome_var = std::move(outcome_var);
  cpt.rows.assign(row_count, std::vector<double>(cardinality, prior));
  return cpt;
}

void DirichletCPT::validate(std::size_t expected_rows, std::size_t cardinality) const {
  if (rows.size() != expected_rows) {
    throw ConfigError("CPT for '" + outcome_var + "' has " + std::to_string(rows.size()) +
                      " rows, expected " + std::to_string(expected_rows));
  }
  for (const auto& row : rows) {
    if (row.size() != cardinality) {
      throw ConfigError("CPT row for '" + outcome_var + "' has the wrong length");
    }
    double total = 0.0;
    for (double a : row) {
      if (!(a > 0.0) || !std::isfinite(a)) {
        throw OutOfDomain("CPT for '" + outcome_var + "' has a nonpositive pseudo-count");
      }
      total += a;
    }
    if (!std::isfinite(total)) throw OutOfDomain("CPT row sum is not finite");
  }
}

std::span<const double> DirichletCPT::row(std::size_t situation_idx) const {
  if (situation_idx >= rows.size()) {
    throw OutOfDomain("situation index " + std::to_string(situation_idx) + " out of range");
  }
  return rows[situation_idx];
}

void ModelState::validate() const {
  structure.validate();
  const auto outcomes = structure.outcome_names();
  if (cpts.size() != outcomes.size() || situation_weights.size() != outcomes.size()) {
    throw ConfigError("model must hold exactly one CPT and weight vector per outcome");
  }
  for (const auto& o : outcomes) {
    const std::size_t rows = structure.row_count(o);
    auto it = cpts.find(o);
    if (it == cpts.end()) throw ConfigError("missing CPT for outcome '" + o + "'");
    if (it->second.outcome_var != o) throw ConfigError("CPT keyed under the wrong outcome");
    it->second.validate(rows, structure.variable(o).cardinality());
    const auto& w = weights(o);
    if (w.size() != rows) throw ConfigError("situation weights for '" + o + "' have wrong size");
    double total = 0.0;
    for (double x : w) {
      if (!(x >= 0.0)) throw OutOfDomain("negative situation weight");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw OutOfDomain("situation weights for '" + o + "' do not sum to 1");
    }
  }
}

const DirichletCPT& ModelState::cpt(std::string_view outcome) const {
  auto it = cpts.find(outcome);
  if (it == cpts.end()) throw MissingBinding("no CPT for '" + std::string(outcome) + "'");
  return it->second;
}

const std::vector<double>& ModelState::weights(std::string_view outcome) const {
  auto it = situation_weights.find(outcome);
  if (it == situation_weights.end()) {
    throw MissingBinding("no situation weights for '" + std::string(outcome) + "'");
  }
  return it->second;
}

void reset_outcome_prior(ModelState& model, std::string_view outcome) {
  const double prior = model.prior;
  const std::size_t rows = model.structure.row_count(outcome);
  const std::size_t k = model.structure.variable(outcome).cardinality();
  model.cpts.insert_or_assign(std::string(outcome),
                              DirichletCPT::uniform(std::string(outcome), rows, k, prior));
  model.situation_weights.insert_or_assign(std::string(outcome),
                                           std::vector<double>(rows, 1.0 / double(rows)));
}

ModelState make_prior_model(NetworkStructure structure, double prior) {
  structure.validate();
  ModelState model;
  model.structure = std::move(structure);
  model.prior = prior;
  for (const auto& o : model.structure.outcome_names()) reset_outcome_prior(model, o);
  return model;
}

std::size_t situation_index(const NetworkStructure& structure, std::string_view outcome,
                            const Instantiation& situation) {
  std::size_t index = 0;
  for (const auto& p : structure.parents_of(outcome)) {
    const VariableSpec& spec = structure.variable(p);
    index = index * spec.cardinality() + spec.index_of(situation.at(p));
  }
  return index;
}

Instantiation situation_at(const NetworkStructure& structure, std::string_view outcome,
                           std::size_t situation_idx) {
  return instantiation_at(structure.parent_specs(outcome), situation_idx);
}

DirichletCPT posterior_update(DirichletCPT cpt, std::size_t situation_idx,
                              std::size_t outcome_value) {
  if (situation_idx >= cpt.rows.size()) {
    throw OutOfDomain("situation index " + std::to_string(situation_idx) + " out of range");
  }
  auto& row = cpt.rows[situation_idx];
  if (outcome_value >= row.size()) {
    throw OutOfDomain("outcome index " + std::to_string(outcome_value) + " out of range");
  }
  row[outcome_value] += 1.0;
  return cpt;
}

std::vector<double> posterior_mean(const DirichletCPT& cpt, std::size_t situation_idx) {
  auto row = cpt.row(situation_idx);
  const double a0 = std::accumulate(row.begin(), row.end(), 0.0);
  std::vector<double> mean(row.size());
  std::transform(row.begin(), row.end(), mean.begin(), [a0](double a) { return a / a0; });
  return mean;
}

}  // namespace capex
