#include "capex/subject_sim.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "capex/divergence.hpp"
#include "capex/errors.hpp"

namespace capex {

namespace {

bool guard_matches(const Instantiation& guard, const Instantiation& full) {
  for (const auto& [name, value] : guard) {
    if (full.at(name) != value) return false;
  }
  return true;
}

bool guards_overlap(const Instantiation& a, const Instantiation& b) {
  for (const auto& [name, value] : a) {
    if (auto other = b.get(name); other && *other != value) return false;
  }
  return true;
}

}  // namespace

const VariableSpec* SubjectSpec::find(std::string_view name) const {
  for (const auto& v : variables) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

const VariableSpec& SubjectSpec::variable(std::string_view name) const {
  if (const auto* v = find(name)) return *v;
  throw ConfigError("subject has no variable '" + std::string(name) + "'");
}

std::vector<VariableSpec> SubjectSpec::parent_specs(std::string_view outcome) const {
  auto it = parents.find(outcome);
  if (it == parents.end()) {
    throw ConfigError("subject has no parent list for '" + std::string(outcome) + "'");
  }
  std::vector<VariableSpec> out;
  for (const auto& p : it->second) out.push_back(variable(p));
  return out;
}

std::vector<std::string> SubjectSpec::outcome_names() const {
  std::vector<std::string> out;
  for (const auto& v : variables) {
    if (v.role == Role::kOutcome) out.push_back(v.name);
  }
  return out;
}

void SubjectSpec::validate() const {
  std::set<std::string_view> names;
  for (const auto& v : variables) {
    v.validate();
    if (!names.insert(v.name).second) throw ConfigError("duplicate variable '" + v.name + "'");
  }
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) {
    throw ConfigError("noise_rate must lie in [0, 1]");
  }
  for (const auto& o : outcome_names()) {
    const auto ps = parent_specs(o);
    for (const auto& p : ps) {
      if (p.role == Role::kOutcome) throw ConfigError("outcome '" + p.name + "' used as parent");
    }
    auto it = truth.find(o);
    if (it == truth.end()) throw ConfigError("no truth table for outcome '" + o + "'");
    if (it->second.size() != joint_cardinality(ps)) {
      throw ConfigError("truth table for '" + o + "' has the wrong number of rows");
    }
    for (const auto& row : it->second) {
      if (row.size() != variable(o).cardinality()) {
        throw ConfigError("truth row for '" + o + "' has the wrong length");
      }
      validate_probability(row);
    }
  }
  for (std::size_t i = 0; i < hidden_rules.size(); ++i) {
    const auto& rule = hidden_rules[i];
    if (rule.guard.empty()) throw ConfigError("hidden rule with an empty guard");
    for (const auto& [name, value] : rule.guard) variable(name).index_of(value);
    for (const auto& [outcome, dist] : rule.override_dist) {
      const auto& spec = variable(outcome);
      if (spec.role != Role::kOutcome) throw ConfigError("override of non-outcome '" + outcome + "'");
      if (dist.size() != spec.cardinality()) {
        throw ConfigError("override for '" + outcome + "' has the wrong length");
      }
      validate_probability(dist);
      const auto& ps = parents.at(outcome);
      for (const auto& [name, _] : rule.guard) {
        if (std::find(ps.begin(), ps.end(), name) == ps.end()) {
          throw ConfigError("guard variable '" + name + "' is not a true parent of '" + outcome +
                            "'");
        }
      }
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (guards_overlap(rule.guard, hidden_rules[j].guard)) {
        throw ConfigError("hidden rule guards are not mutually exclusive");
      }
    }
  }
  for (const auto& [name, value] : fixed) variable(name).index_of(value);
}

std::vector<double> SubjectSpec::effective_distribution(std::string_view outcome,
                                                        const Instantiation& full) const {
  for (const auto& rule : hidden_rules) {
    auto it = rule.override_dist.find(outcome);
    if (it != rule.override_dist.end() && guard_matches(rule.guard, full)) return it->second;
  }
  const auto ps = parent_specs(outcome);
  const auto& row = truth.find(outcome)->second[mixed_radix_index(ps, full)];
  std::vector<double> dist(row.size());
  const double uniform = 1.0 / double(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    dist[j] = (1.0 - noise_rate) * row[j] + noise_rate * uniform;
  }
  return dist;
}

Instantiation sample_outcome(const SubjectSpec& spec, const Instantiation& situation,
                             const Instantiation& attributes, Rng& rng) {
  const Instantiation full = situation.merged(attributes);
  Instantiation outcome;
  for (const auto& o : spec.outcome_names()) {
    const auto& var = spec.variable(o);
    for (const auto& p : spec.parents.at(o)) {
      if (!full.contains(p)) throw MissingBinding("true variable '" + p + "' is not bound");
    }
    const HiddenRule* matched = nullptr;
    for (const auto& rule : spec.hidden_rules) {
      if (rule.override_dist.contains(o) && guard_matches(rule.guard, full)) {
        matched = &rule;
        break;
      }
    }
    std::size_t j;
    if (matched != nullptr) {
      j = sample_categorical(rng, matched->override_dist.find(o)->second);
    } else if (uniform_real(rng) < spec.noise_rate) {
      j = uniform_index(rng, var.cardinality());
    } else {
      const auto& rows = spec.truth.find(o)->second;
      j = sample_categorical(rng, rows[mixed_radix_index(spec.parent_specs(o), full)]);
    }
    outcome.set(o, var.domain[j]);
  }
  return outcome;
}

namespace {

// Variables the comparison must range over for one outcome: true parents
// first, then any extra learned parents (which the truth ignores).
std::vector<VariableSpec> comparison_vars(const NetworkStructure& structure,
                                          const SubjectSpec& spec, const std::string& outcome) {
  auto vars = spec.parent_specs(outcome);
  for (const auto& p : structure.parents_of(outcome)) {
    const VariableSpec* truth_var = spec.find(p);
    if (truth_var == nullptr) {
      throw ConfigError("learned variable '" + p + "' does not exist in the truth");
    }
    if (std::none_of(vars.begin(), vars.end(), [&](const VariableSpec& v) { return v.name == p; })) {
      vars.push_back(*truth_var);
    }
  }
  return vars;
}

void check_learned_variables(const NetworkStructure& structure, const SubjectSpec& spec) {
  for (const auto& v : structure.nodes) {
    const VariableSpec* t = spec.find(v.name);
    if (t == nullptr) throw ConfigError("learned variable '" + v.name + "' is absent from truth");
    if (t->domain != v.domain) {
      throw ConfigError("learned variable '" + v.name + "' disagrees with the truth domain");
    }
  }
}

}  // namespace

double eval_kl(const ModelState& learned, const SubjectSpec& spec) {
  const auto& structure = learned.structure;
  check_learned_variables(structure, spec);
  double total = 0.0;
  for (const auto& o : spec.outcome_names()) {
    if (!structure.has(o)) throw ConfigError("learned model lacks outcome '" + o + "'");
    const auto vars = comparison_vars(structure, spec, o);
    const auto& cpt = learned.cpt(o);
    const std::size_t n = joint_cardinality(vars);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Instantiation s = instantiation_at(vars, i);
      const auto p = spec.effective_distribution(o, s);
      sum += kl_divergence(p, posterior_mean(cpt, situation_index(structure, o, s)));
    }
    total += sum / double(n);
  }
  return total;
}

double best_achievable_kl(const NetworkStructure& structure, const SubjectSpec& spec) {
  check_learned_variables(structure, spec);
  double total = 0.0;
  for (const auto& o : spec.outcome_names()) {
    const auto vars = comparison_vars(structure, spec, o);
    const std::size_t n = joint_cardinality(vars);
    const std::size_t k = spec.variable(o).cardinality();
    std::vector<std::vector<double>> truth_rows(n);
    std::vector<std::size_t> learned_row(n);
    std::map<std::size_t, std::vector<double>> pooled;
    std::map<std::size_t, double> members;
    for (std::size_t i = 0; i < n; ++i) {
      const Instantiation s = instantiation_at(vars, i);
      truth_rows[i] = spec.effective_distribution(o, s);
      learned_row[i] = situation_index(structure, o, s);
      auto& acc = pooled[learned_row[i]];
      if (acc.empty()) acc.assign(k, 0.0);
      for (std::size_t j = 0; j < k; ++j) acc[j] += truth_rows[i][j];
      members[learned_row[i]] += 1.0;
    }
    // KL(p || q) averaged over a group is minimised by q = mean of the p's.
    for (auto& [row, acc] : pooled) {
      for (auto& x : acc) x /= members[row];
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += kl_divergence(truth_rows[i], pooled[learned_row[i]]);
    total += sum / double(n);
  }
  return total;
}

SubjectSpec randomize_truth(SubjectSpec spec, Rng& rng, double concentration) {
  if (!(concentration > 0.0)) throw ConfigError("Dirichlet concentration must be positive");
  std::gamma_distribution<double> gamma(concentration, 1.0);
  for (auto& [_, rows] : spec.truth) {
    for (auto& row : rows) {
      double total = 0.0;
      for (auto& x : row) {
        x = gamma(rng);
        total += x;
      }
      for (auto& x : row) x /= total;
    }
  }
  return spec;
}

SimulatedSubject::SimulatedSubject(SubjectSpec spec)
    : spec_(std::move(spec)), rng_(make_stream(spec_.seed, Stream::kSubject)) {
  spec_.validate();
}

ExperimentResult SimulatedSubject::experiment(const Instantiation& query,
                                              const Instantiation& attributes,
                                              std::span<const VariableSpec> environment) {
  ExperimentResult result;
  result.situation = query;
  for (const auto& v : environment) {
    if (auto f = spec_.fixed.get(v.name)) {
      result.situation.set(v.name, *f);
    } else {
      result.situation.set(v.name, v.domain[uniform_index(rng_, v.cardinality())]);
    }
  }
  Instantiation full = result.situation.merged(attributes);
  for (const auto& [name, value] : spec_.fixed) {
    if (!full.contains(name)) full.set(name, value);
  }
  // True variables nobody set are drawn uniformly, in declaration order.
  for (const auto& v : spec_.variables) {
    if (v.role != Role::kOutcome && !full.contains(v.name)) {
      full.set(v.name, v.domain[uniform_index(rng_, v.cardinality())]);
    }
  }
  result.outcome = sample_outcome(spec_, full, {}, rng_);
  return result;
}

}  // namespace capex
