#pragma once

#include <map>
#include <string>
#include <vector>

#include "capex/network.hpp"
#include "capex/random.hpp"
#include "capex/variables.hpp"

namespace capex {

struct ObservationRecord {
  Instantiation situation;
  Instantiation outcome;
  Instantiation attributes;

  friend bool operator==(const ObservationRecord&, const ObservationRecord&) = default;
};

// The learner's belief plus the bookkeeping needed to choose experiments.
//
// query_vars is the controllable subset Q of the situation variables; every
// command must be in it. Situation variables outside Q are set by the
// environment, and uncontrolled_dist is the learner's running estimate of how
// (uniform until observed, then empirical frequencies).
struct LearnerState {
  ModelState model;
  std::vector<std::string> query_vars;
  std::map<std::string, std::vector<double>, std::less<>> uncontrolled_dist;
  std::map<std::string, std::vector<double>, std::less<>> uncontrolled_counts;
  std::vector<ObservationRecord> history;

  void validate() const;
  std::vector<VariableSpec> query_specs() const;
  std::vector<VariableSpec> uncontrolled_specs() const;

  friend bool operator==(const LearnerState&, const LearnerState&) = default;
};

// Q defaults to every controllable situation variable.
LearnerState make_learner(ModelState model);
LearnerState make_learner(ModelState model, std::vector<std::string> query_vars);

struct QueryEvaluation {
  Instantiation query;
  double epe = 0.0;
  double model_error = 0.0;
  // Keyed "Outcome=value": expected model error after the experiment given
  // that outcome value, and the predictive probability of that value.
  std::map<std::string, double> posterior_risk_by_outcome;
  std::map<std::string, double> predictive_by_outcome;
};

// sum over outcome variables and rows of weight(row) * dirichlet_expected_kl(row).
double model_error(const ModelState& model);
double model_error(const LearnerState& state);

// Expected model error after running `query`, averaging over the
// environment-set variables and the Dirichlet predictive of each outcome.
// Throws MissingBinding unless `query` binds exactly the query variables.
QueryEvaluation expected_posterior_error(const LearnerState& state, const Instantiation& query);

// Every query in enumeration order.
std::vector<QueryEvaluation> evaluate_queries(const LearnerState& state);

// argmin of EPE; ties go to the first query in enumeration order.
Instantiation best_query(const LearnerState& state);

// Uniform draw over the query space.
Instantiation passive_query(const LearnerState& state, Rng& rng);

// Bayesian update of the row selected by `situation` in every outcome CPT,
// plus history and environment-frequency bookkeeping. `situation` must bind
// every situation variable and `outcome` every outcome variable.
LearnerState record_observation(LearnerState state, const Instantiation& situation,
                                const Instantiation& outcome,
                                const Instantiation& attributes = {});

}  // namespace capex
