#include "capex/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "capex/divergence.hpp"
#include "capex/errors.hpp"

namespace capex {

void RefinementConfig::validate() const {
  if (!(r_threshold > 0.0 && r_threshold <= 1.0)) {
    throw ConfigError("r_threshold must lie in (0, 1]");
  }
  if (n_min < 1) throw ConfigError("n_min must be at least 1");
}

const VariableSpec* AttributeStats::find_attribute(std::string_view name) const {
  for (const auto& a : attributes) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const SituationCounts* AttributeStats::find_situation(const Instantiation& situation) const {
  auto it = situations.find(situation.key());
  return it == situations.end() ? nullptr : &it->second;
}

std::vector<Instantiation> AttributeStats::observed_situations() const {
  std::vector<Instantiation> out;
  out.reserve(situations.size());
  for (const auto& [_, s] : situations) out.push_back(s.situation);
  return out;
}

AttributeStats make_attribute_stats(std::vector<VariableSpec> attributes,
                                    std::vector<VariableSpec> outcomes, std::uint32_t n_min,
                                    std::map<std::string, std::vector<std::string>, std::less<>>
                                        targets) {
  if (n_min < 1) throw ConfigError("n_min must be at least 1");
  AttributeStats stats;
  stats.n_min = n_min;
  for (auto& a : attributes) {
    a.role = Role::kAttribute;
    a.validate();
    stats.attr_marginals[a.name].assign(a.cardinality(), 0);
    auto it = targets.find(a.name);
    if (it == targets.end()) {
      std::vector<std::string> all;
      for (const auto& o : outcomes) all.push_back(o.name);
      stats.targets[a.name] = std::move(all);
    } else {
      for (const auto& o : it->second) {
        if (std::none_of(outcomes.begin(), outcomes.end(),
                         [&](const VariableSpec& v) { return v.name == o; })) {
          throw ConfigError("attribute '" + a.name + "' targets unknown outcome '" + o + "'");
        }
      }
      stats.targets[a.name] = it->second;
    }
  }
  stats.attributes = std::move(attributes);
  stats.outcomes = std::move(outcomes);
  return stats;
}

AttributeStats update_attribute_stats(AttributeStats stats, const Instantiation& situation,
                                      const Instantiation& attributes,
                                      const Instantiation& outcome) {
  // Validate everything before touching any count.
  std::vector<std::size_t> attr_idx;
  for (const auto& a : stats.attributes) attr_idx.push_back(a.index_of(attributes.at(a.name)));
  std::vector<std::size_t> out_idx;
  for (const auto& o : stats.outcomes) out_idx.push_back(o.index_of(outcome.at(o.name)));

  auto [it, inserted] = stats.situations.try_emplace(situation.key());
  SituationCounts& sc = it->second;
  if (inserted) {
    sc.situation = situation;
    for (const auto& o : stats.outcomes) sc.outcome_counts[o.name].assign(o.cardinality(), 0);
  }
  sc.observations += 1;
  for (std::size_t i = 0; i < stats.outcomes.size(); ++i) {
    sc.outcome_counts[stats.outcomes[i].name][out_idx[i]] += 1;
  }
  for (std::size_t a = 0; a < stats.attributes.size(); ++a) {
    const VariableSpec& spec = stats.attributes[a];
    auto& per_value = sc.cells[spec.name];
    auto& attr_counts = sc.attribute_counts[spec.name];
    if (per_value.empty()) {
      per_value.resize(spec.cardinality());
      attr_counts.assign(spec.cardinality(), 0);
    }
    attr_counts[attr_idx[a]] += 1;
    stats.attr_marginals[spec.name][attr_idx[a]] += 1;
    auto& by_outcome = per_value[attr_idx[a]];
    for (std::size_t i = 0; i < stats.outcomes.size(); ++i) {
      auto& cell = by_outcome[stats.outcomes[i].name];
      if (cell.empty()) cell.assign(stats.outcomes[i].cardinality(), 0);
      cell[out_idx[i]] += 1;
    }
  }
  return stats;
}

namespace {

double counts_entropy(const Counts& c) {
  std::vector<double> d(c.begin(), c.end());
  return entropy_of_counts(d);
}

std::vector<std::size_t> valid_indices(const SituationCounts& sc, std::string_view attr,
                                       std::size_t cardinality, std::uint32_t n_min) {
  std::vector<std::size_t> out;
  auto it = sc.attribute_counts.find(attr);
  if (it == sc.attribute_counts.end()) return out;
  for (std::size_t v = 0; v < cardinality; ++v) {
    if (it->second[v] >= n_min) out.push_back(v);
  }
  return out;
}

struct MiTerms {
  double mi = 0.0;
  double outcome_entropy = 0.0;
};

MiTerms mi_terms(const AttributeStats& stats, const SituationCounts& sc,
                 std::string_view outcome_var, const VariableSpec& attr, std::uint32_t n_min) {
  MiTerms t;
  const auto valid = valid_indices(sc, attr.name, attr.cardinality(), n_min);
  if (valid.empty()) return t;
  const auto& per_value = sc.cells.at(attr.name);
  const auto& marginal = stats.attr_marginals.at(attr.name);

  if (std::none_of(stats.outcomes.begin(), stats.outcomes.end(),
                   [&](const VariableSpec& o) { return o.name == outcome_var; })) {
    throw MissingBinding("'" + std::string(outcome_var) + "' is not a tracked outcome");
  }

  Counts pooled;
  double weight_total = 0.0;
  for (std::size_t v : valid) {
    const auto& cell = per_value[v].find(outcome_var)->second;
    if (pooled.empty()) pooled.assign(cell.size(), 0);
    for (std::size_t j = 0; j < cell.size(); ++j) pooled[j] += cell[j];
    weight_total += double(marginal[v]);
  }
  t.outcome_entropy = counts_entropy(pooled);
  double conditional = 0.0;
  for (std::size_t v : valid) {
    const auto& cell = per_value[v].find(outcome_var)->second;
    conditional += counts_entropy(cell) * (double(marginal[v]) / weight_total);
  }
  t.mi = std::max(0.0, t.outcome_entropy - conditional);
  return t;
}

const VariableSpec& require_attribute(const AttributeStats& stats, std::string_view attr) {
  const VariableSpec* spec = stats.find_attribute(attr);
  if (spec == nullptr) throw ConfigError("unknown attribute '" + std::string(attr) + "'");
  return *spec;
}

double coefficient(const AttributeStats& stats, const SituationCounts& sc,
                   std::string_view outcome_var, const VariableSpec& attr, std::uint32_t n_min) {
  const MiTerms t = mi_terms(stats, sc, outcome_var, attr, n_min);
  const auto& marginal = stats.attr_marginals.at(attr.name);
  const double attr_entropy = counts_entropy(marginal);
  const double denom = std::min(t.outcome_entropy, attr_entropy);
  if (!(denom > 0.0)) return 0.0;
  return std::clamp(t.mi / denom, 0.0, 1.0);
}

}  // namespace

std::vector<std::string> domain_valid(const AttributeStats& stats, std::string_view attr,
                                      const Instantiation& situation) {
  const VariableSpec* spec = stats.find_attribute(attr);
  const SituationCounts* sc = stats.find_situation(situation);
  std::vector<std::string> out;
  if (spec == nullptr || sc == nullptr) return out;
  for (std::size_t v : valid_indices(*sc, attr, spec->cardinality(), stats.n_min)) {
    out.push_back(spec->domain[v]);
  }
  return out;
}

std::optional<double> mutual_information_estimate(const AttributeStats& stats,
                                                  std::string_view outcome_var,
                                                  std::string_view attr,
                                                  const Instantiation& situation) {
  const VariableSpec& spec = require_attribute(stats, attr);
  const SituationCounts* sc = stats.find_situation(situation);
  if (sc == nullptr) return std::nullopt;
  return mi_terms(stats, *sc, outcome_var, spec, stats.n_min).mi;
}

double coefficient_of_mi(const AttributeStats& stats, std::string_view outcome_var,
                         std::string_view attr, const Instantiation& situation) {
  const VariableSpec& spec = require_attribute(stats, attr);
  const SituationCounts* sc = stats.find_situation(situation);
  if (sc == nullptr) return 0.0;
  return coefficient(stats, *sc, outcome_var, spec, stats.n_min);
}

std::set<std::string> identify_dependence(const AttributeStats& stats,
                                          std::string_view outcome_var,
                                          std::span<const Instantiation> situations_observed,
                                          const RefinementConfig& config) {
  std::set<std::string> out;
  for (const auto& attr : stats.attributes) {
    const auto& targets = stats.targets.at(attr.name);
    if (std::find(targets.begin(), targets.end(), outcome_var) == targets.end()) continue;
    for (const auto& situation : situations_observed) {
      const SituationCounts* sc = stats.find_situation(situation);
      if (sc == nullptr) continue;
      if (coefficient(stats, *sc, outcome_var, attr, config.n_min) > config.r_threshold) {
        out.insert(attr.name);
        break;
      }
    }
  }
  return out;
}

RefinedModel modify_model(LearnerState state, AttributeStats stats, const Promotions& promoted,
                          const RefinementConfig& config) {
  RefinedModel result;
  auto& structure = state.model.structure;

  // attribute -> outcomes it joins, preserving attribute declaration order
  std::vector<std::pair<std::string, std::vector<std::string>>> plan;
  for (const auto& attr : stats.attributes) {
    std::vector<std::string> outcomes;
    for (const auto& [outcome, attrs] : promoted) {
      if (attrs.contains(attr.name)) outcomes.push_back(outcome);
    }
    if (!outcomes.empty()) plan.emplace_back(attr.name, std::move(outcomes));
  }
  for (const auto& [outcome, attrs] : promoted) {
    structure.parents_of(outcome);
    for (const auto& a : attrs) {
      if (structure.has(a)) throw ConfigError("'" + a + "' is already a network variable");
      if (stats.find_attribute(a) == nullptr) throw ConfigError("unknown attribute '" + a + "'");
    }
  }

  std::set<std::string> reset;
  for (const auto& [attr, outcomes] : plan) {
    VariableSpec spec = *stats.find_attribute(attr);
    spec.role = Role::kContext;
    spec.controllable = config.promoted_controllable;
    structure.nodes.push_back(spec);
    for (const auto& o : outcomes) {
      structure.parents.find(o)->second.push_back(attr);
      reset.insert(o);
    }
    if (config.promoted_controllable) {
      state.query_vars.push_back(attr);
    } else {
      state.uncontrolled_counts[attr].assign(spec.cardinality(), 0.0);
      state.uncontrolled_dist[attr].assign(spec.cardinality(), 1.0 / double(spec.cardinality()));
    }
    result.added.push_back(attr);
  }
  for (const auto& o : reset) reset_outcome_prior(state.model, o);

  if (!result.added.empty()) {
    std::erase_if(stats.attributes, [&](const VariableSpec& v) {
      return std::find(result.added.begin(), result.added.end(), v.name) != result.added.end();
    });
    for (const auto& a : result.added) {
      stats.targets.erase(a);
      stats.attr_marginals.erase(a);
      for (auto& [_, sc] : stats.situations) {
        sc.cells.erase(a);
        sc.attribute_counts.erase(a);
      }
    }
    state.model.structure.validate();
  }
  result.learner = std::move(state);
  result.stats = std::move(stats);
  return result;
}

}  // namespace capex
