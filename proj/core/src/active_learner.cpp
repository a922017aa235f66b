#include "capex/active_learner.hpp"

#include <algorithm>
#include <numeric>

#include "capex/divergence.hpp"
#include "capex/errors.hpp"

namespace capex {

namespace {

bool contains(const std::vector<std::string>& names, std::string_view name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

void refresh_uncontrolled_dist(LearnerState& state) {
  for (auto& [name, counts] : state.uncontrolled_counts) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    auto& dist = state.uncontrolled_dist[name];
    dist.assign(counts.size(), 1.0 / double(counts.size()));
    if (total > 0.0) {
      std::transform(counts.begin(), counts.end(), dist.begin(),
                     [total](double c) { return c / total; });
    }
  }
}

}  // namespace

void LearnerState::validate() const {
  model.validate();
  for (const auto& q : query_vars) {
    const VariableSpec& spec = model.structure.variable(q);
    if (!spec.is_situation()) throw ConfigError("query variable '" + q + "' is not a situation");
  }
  for (const auto& v : model.structure.nodes) {
    if (v.role == Role::kCommand && !contains(query_vars, v.name)) {
      throw ConfigError("command '" + v.name + "' must be a query variable");
    }
  }
  const auto uncontrolled = uncontrolled_specs();
  if (uncontrolled_dist.size() != uncontrolled.size()) {
    throw ConfigError("uncontrolled distribution must cover exactly the non-query situation");
  }
  for (const auto& v : uncontrolled) {
    auto it = uncontrolled_dist.find(v.name);
    if (it == uncontrolled_dist.end()) {
      throw ConfigError("no environment distribution for '" + v.name + "'");
    }
    if (it->second.size() != v.cardinality()) {
      throw ConfigError("environment distribution for '" + v.name + "' has wrong size");
    }
    validate_probability(it->second);
  }
}

std::vector<VariableSpec> LearnerState::query_specs() const {
  std::vector<VariableSpec> out;
  for (const auto& q : query_vars) out.push_back(model.structure.variable(q));
  return out;
}

std::vector<VariableSpec> LearnerState::uncontrolled_specs() const {
  std::vector<VariableSpec> out;
  for (const auto& v : model.structure.nodes) {
    if (v.is_situation() && !contains(query_vars, v.name)) out.push_back(v);
  }
  return out;
}

LearnerState make_learner(ModelState model) {
  std::vector<std::string> q;
  for (const auto& v : model.structure.nodes) {
    if (v.is_situation() && v.controllable) q.push_back(v.name);
  }
  return make_learner(std::move(model), std::move(q));
}

LearnerState make_learner(ModelState model, std::vector<std::string> query_vars) {
  LearnerState state;
  state.model = std::move(model);
  state.query_vars = std::move(query_vars);
  for (const auto& v : state.uncontrolled_specs()) {
    state.uncontrolled_counts[v.name].assign(v.cardinality(), 0.0);
  }
  refresh_uncontrolled_dist(state);
  state.validate();
  return state;
}

double model_error(const ModelState& model) {
  double total = 0.0;
  for (const auto& [outcome, cpt] : model.cpts) {
    const auto& w = model.weights(outcome);
    for (std::size_t s = 0; s < cpt.rows.size(); ++s) {
      if (w[s] == 0.0) continue;
      total += w[s] * dirichlet_expected_kl(cpt.rows[s]);
    }
  }
  return total;
}

double model_error(const LearnerState& state) { return model_error(state.model); }

namespace {

struct OutcomeTerms {
  std::string name;
  const VariableSpec* spec = nullptr;
  std::vector<double> predictive;  // alpha_j / alpha0
  std::vector<double> gain;        // w(s) * (delta(alpha) - delta(alpha + e_j))
  double expected_gain = 0.0;      // sum_j predictive_j * gain_j
};

OutcomeTerms outcome_terms(const ModelState& model, const std::string& outcome,
                           const Instantiation& situation) {
  OutcomeTerms t;
  t.name = outcome;
  t.spec = &model.structure.variable(outcome);
  const std::size_t s = situation_index(model.structure, outcome, situation);
  auto row = model.cpt(outcome).row(s);
  const double w = model.weights(outcome)[s];
  const double a0 = std::accumulate(row.begin(), row.end(), 0.0);
  const double before = dirichlet_expected_kl(row);
  std::vector<double> bumped(row.begin(), row.end());
  t.predictive.resize(row.size());
  t.gain.resize(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    t.predictive[j] = row[j] / a0;
    bumped[j] += 1.0;
    t.gain[j] = w * (before - dirichlet_expected_kl(bumped));
    bumped[j] = row[j];
    t.expected_gain += t.predictive[j] * t.gain[j];
  }
  return t;
}

QueryEvaluation evaluate_query(const LearnerState& state, const Instantiation& query,
                               const std::vector<VariableSpec>& uncontrolled,
                               double current_error) {
  const auto& model = state.model;
  const auto outcomes = model.structure.outcome_names();

  QueryEvaluation eval;
  eval.query = query;
  eval.model_error = current_error;

  // Per outcome key: P(o = j) and E[gain of all outcomes ; o = j].
  std::map<std::string, double> prob;
  std::map<std::string, double> joint_gain;
  double reduction = 0.0;

  for (const auto& u : enumerate_instantiations(uncontrolled)) {
    double pu = 1.0;
    for (const auto& v : uncontrolled) {
      pu *= state.uncontrolled_dist.at(v.name)[v.index_of(u.at(v.name))];
    }
    if (pu == 0.0) continue;
    const Instantiation situation = query.merged(u);

    std::vector<OutcomeTerms> terms;
    double all_gain = 0.0;
    for (const auto& o : outcomes) {
      terms.push_back(outcome_terms(model, o, situation));
      all_gain += terms.back().expected_gain;
    }
    reduction += pu * all_gain;

    for (const auto& t : terms) {
      const double others = all_gain - t.expected_gain;
      for (std::size_t j = 0; j < t.predictive.size(); ++j) {
        const std::string key = t.name + "=" + t.spec->domain[j];
        const double pj = pu * t.predictive[j];
        prob[key] += pj;
        joint_gain[key] += pj * (t.gain[j] + others);
      }
    }
  }

  // The expected reduction is nonnegative; only rounding can push it below 0.
  eval.epe = current_error - std::max(0.0, reduction);
  for (const auto& [key, p] : prob) {
    eval.predictive_by_outcome[key] = p;
    eval.posterior_risk_by_outcome[key] = p > 0.0 ? current_error - joint_gain[key] / p
                                                  : current_error;
  }
  return eval;
}

void check_query(const LearnerState& state, const Instantiation& query) {
  const auto specs = state.query_specs();
  validate_instantiation(query, specs, /*require_all=*/true);
}

}  // namespace

QueryEvaluation expected_posterior_error(const LearnerState& state, const Instantiation& query) {
  check_query(state, query);
  return evaluate_query(state, query, state.uncontrolled_specs(), model_error(state.model));
}

std::vector<QueryEvaluation> evaluate_queries(const LearnerState& state) {
  const double current = model_error(state.model);
  const auto uncontrolled = state.uncontrolled_specs();
  std::vector<QueryEvaluation> out;
  for (const auto& q : enumerate_instantiations(state.query_specs())) {
    out.push_back(evaluate_query(state, q, uncontrolled, current));
  }
  return out;
}

Instantiation best_query(const LearnerState& state) {
  const auto evals = evaluate_queries(state);
  const auto best = std::min_element(
      evals.begin(), evals.end(),
      [](const QueryEvaluation& a, const QueryEvaluation& b) { return a.epe < b.epe; });
  return best->query;
}

Instantiation passive_query(const LearnerState& state, Rng& rng) {
  const auto specs = state.query_specs();
  return instantiation_at(specs, uniform_index(rng, joint_cardinality(specs)));
}

LearnerState record_observation(LearnerState state, const Instantiation& situation,
                                const Instantiation& outcome, const Instantiation& attributes) {
  const auto& structure = state.model.structure;
  validate_instantiation(situation, structure.situation_variables(), /*require_all=*/true);
  validate_instantiation(outcome, structure.with_role(Role::kOutcome), /*require_all=*/true);

  for (const auto& o : structure.outcome_names()) {
    const std::size_t s = situation_index(structure, o, situation);
    const std::size_t j = structure.variable(o).index_of(outcome.at(o));
    auto it = state.model.cpts.find(o);
    it->second = posterior_update(std::move(it->second), s, j);
  }
  for (auto& [name, counts] : state.uncontrolled_counts) {
    counts[structure.variable(name).index_of(situation.at(name))] += 1.0;
  }
  refresh_uncontrolled_dist(state);
  state.history.push_back({situation, outcome, attributes});
  return state;
}

}  // namespace capex
