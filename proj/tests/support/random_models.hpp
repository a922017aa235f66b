#pragma once

// Small random learner states for property tests and the brute-force EPE
// comparison.

#include <random>
#include <string>
#include <vector>

#include "capex/active_learner.hpp"
#include "oracles.hpp"

namespace testmodels {

struct Shape {
  std::vector<capex::Role> roles;    // one per binary situation variable
  std::vector<bool> in_query;        // contexts only; commands are always queried
  std::size_t outcome_card = 2;
};

// Every shape with 1..3 binary situation variables, each a command, a
// queried context or an environment context, and an outcome of 2..4 values.
// Shapes with an empty query set are skipped.
inline std::vector<Shape> all_shapes() {
  std::vector<Shape> out;
  for (std::size_t n = 1; n <= 3; ++n) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= 3;
    for (std::size_t code = 0; code < combos; ++code) {
      Shape s;
      std::size_t c = code;
      bool any_query = false;
      for (std::size_t i = 0; i < n; ++i, c /= 3) {
        const std::size_t kind = c % 3;
        s.roles.push_back(kind == 0 ? capex::Role::kCommand : capex::Role::kContext);
        s.in_query.push_back(kind != 2);
        any_query = any_query || kind != 2;
      }
      if (!any_query) continue;
      for (std::size_t k = 2; k <= 4; ++k) {
        s.outcome_card = k;
        out.push_back(s);
      }
    }
  }
  return out;
}

inline capex::LearnerState fresh_state(const Shape& shape) {
  using namespace capex;
  NetworkStructure st;
  std::vector<std::string> parents, query;
  for (std::size_t i = 0; i < shape.roles.size(); ++i) {
    const std::string name = "S" + std::to_string(i);
    st.nodes.push_back({name, {"a", "b"}, shape.roles[i], shape.in_query[i]});
    parents.push_back(name);
    if (shape.in_query[i]) query.push_back(name);
  }
  std::vector<std::string> dom;
  for (std::size_t j = 0; j < shape.outcome_card; ++j) dom.push_back("o" + std::to_string(j));
  st.nodes.push_back({"O", dom, Role::kOutcome, false});
  st.parents["O"] = parents;
  return make_learner(make_prior_model(std::move(st)), query);
}

// Random pseudo-counts, situation weights and environment distribution.
inline capex::LearnerState random_state(const Shape& shape, std::mt19937_64& rng) {
  auto s = fresh_state(shape);
  std::uniform_real_distribution<double> a(0.5, 6.0);
  std::uniform_real_distribution<double> w(0.05, 1.0);
  for (auto& row : s.model.cpts.at("O").rows) {
    for (auto& x : row) x = a(rng);
  }
  for (auto& x : s.model.situation_weights.at("O")) x = w(rng);
  s.model.situation_weights.at("O") = oracle::normalise(s.model.situation_weights.at("O"));
  for (auto& [name, dist] : s.uncontrolled_dist) {
    for (auto& x : dist) x = w(rng);
    dist = oracle::normalise(dist);
  }
  return s;
}

}  // namespace testmodels
