#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "capex/active_learner.hpp"
#include "capex/divergence.hpp"
#include "capex/errors.hpp"
#include "oracles.hpp"
#include "random_models.hpp"

using namespace capex;

namespace {

NetworkStructure ballkick() {
  NetworkStructure s;
  s.nodes = {{"Position", {"LeftSide", "Middle", "RightSide"}, Role::kCommand, true},
             {"KDc", {"Left", "Mid", "Right"}, Role::kCommand, true},
             {"KDo", {"Left", "Mid", "Right", "None"}, Role::kOutcome, false}};
  s.parents["KDo"] = {"Position", "KDc"};
  return s;
}

// One binary command X selecting one of two rows of a binary outcome.
LearnerState two_row(std::vector<double> row_a, std::vector<double> row_b) {
  NetworkStructure s;
  s.nodes = {{"X", {"a", "b"}, Role::kCommand, true}, {"O", {"u", "v"}, Role::kOutcome, false}};
  s.parents["O"] = {"X"};
  auto m = make_prior_model(std::move(s));
  m.cpts.at("O").rows = {std::move(row_a), std::move(row_b)};
  return make_learner(std::move(m));
}

const double kFreshBallkick = std::log(4.0) - 13.0 / 12.0;

}  // namespace

TEST_SUITE("active_learner") {
  TEST_CASE("model error of the fresh ballkick model") {
    auto s = make_learner(make_prior_model(ballkick()));
    CHECK(std::abs(model_error(s) - kFreshBallkick) < 1e-12);
    CHECK(kFreshBallkick == doctest::Approx(0.30296).epsilon(1e-4));
  }

  TEST_CASE("model error examples") {
    auto s = make_learner(make_prior_model(ballkick(), 100.0));
    CHECK(model_error(s) < 0.004);
    auto t = two_row({1, 1}, {3, 1});
    const double expect =
        (dirichlet_expected_kl(std::vector<double>{1, 1}) + dirichlet_expected_kl(std::vector<double>{3, 1})) / 2;
    CHECK(std::abs(model_error(t) - expect) < 1e-12);
    CHECK(std::abs(model_error(t) - oracle::model_error(t.model)) < 1e-12);
  }

  TEST_CASE("EPE of the fresh ballkick model") {
    auto s = make_learner(make_prior_model(ballkick()));
    const double d2111 = dirichlet_expected_kl(std::vector<double>{2, 1, 1, 1});
    CHECK(d2111 == doctest::Approx(0.24885).epsilon(1e-4));
    const double expect = kFreshBallkick - (kFreshBallkick - d2111) / 9.0;
    for (const auto& q : enumerate_instantiations(s.query_specs())) {
      const auto e = expected_posterior_error(s, q);
      CHECK(std::abs(e.epe - expect) < 1e-12);
      CHECK(std::abs(e.epe - oracle::epe(s, q)) < 1e-12);
    }
    CHECK(expect == doctest::Approx(0.29695).epsilon(1e-4));
  }

  TEST_CASE("per-outcome breakdown is consistent with the EPE") {
    auto s = make_learner(make_prior_model(ballkick()));
    s = record_observation(s, {{"Position", "Middle"}, {"KDc", "Mid"}}, {{"KDo", "Mid"}});
    const auto e = expected_posterior_error(s, {{"Position", "Middle"}, {"KDc", "Mid"}});
    double p = 0.0, mix = 0.0;
    for (const auto& [key, prob] : e.predictive_by_outcome) {
      p += prob;
      mix += prob * e.posterior_risk_by_outcome.at(key);
    }
    CHECK(p == doctest::Approx(1.0));
    CHECK(mix == doctest::Approx(e.epe).epsilon(1e-12));
    CHECK(e.predictive_by_outcome.at("KDo=Mid") == doctest::Approx(0.4));
  }

  TEST_CASE("saturated model gains nothing") {
    auto s = make_learner(make_prior_model(ballkick(), 1e7));
    const auto q = best_query(s);
    CHECK(expected_posterior_error(s, q).epe == doctest::Approx(model_error(s)).epsilon(1e-9));
  }

  TEST_CASE("uncertain rows are preferred") {
    auto s = two_row({10, 10}, {1, 1});
    CHECK(best_query(s) == Instantiation{{"X", "b"}});
    CHECK(expected_posterior_error(s, {{"X", "b"}}).epe < expected_posterior_error(s, {{"X", "a"}}).epe);
    auto t = two_row({1, 1}, {10, 10});
    CHECK(best_query(t) == Instantiation{{"X", "a"}});
  }

  TEST_CASE("fresh symmetric model picks the first query") {
    auto s = make_learner(make_prior_model(ballkick()));
    CHECK(best_query(s) == enumerate_instantiations(s.query_specs()).front());
  }

  TEST_CASE("a concentrated situation is avoided") {
    auto s = make_learner(make_prior_model(ballkick()));
    s.model.cpts.at("KDo").rows[0] = {10, 10, 10, 10};
    const auto q = best_query(s);
    CHECK(situation_index(s.model.structure, "KDo", q) != 0);
  }

  TEST_CASE("environment variables stay out of the query") {
    NetworkStructure st;
    st.nodes = {{"X", {"a", "b"}, Role::kContext, false},
                {"C", {"go", "stop"}, Role::kCommand, true},
                {"O", {"u", "v"}, Role::kOutcome, false}};
    st.parents["O"] = {"X", "C"};
    auto s = make_learner(make_prior_model(std::move(st)));
    CHECK(s.query_vars == std::vector<std::string>{"C"});
    Rng rng(1);
    const auto q = passive_query(s, rng);
    CHECK(q.size() == 1);
  }

  TEST_CASE("EPE matches brute force and never exceeds the model error") {
    std::mt19937_64 rng(101);
    const auto shapes = testmodels::all_shapes();
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      auto s = testmodels::random_state(shapes[i], rng);
      const double me = model_error(s);
      for (const auto& q : enumerate_instantiations(s.query_specs())) {
        const double e = expected_posterior_error(s, q).epe;
        REQUIRE(std::abs(e - oracle::epe(s, q)) < 1e-10);
        REQUIRE(e <= me + 1e-15);
      }
    }
  }

  TEST_CASE("best query ignores a common scale on the weights") {
    std::mt19937_64 rng(103);
    const auto shapes = testmodels::all_shapes();
    for (std::size_t i = 0; i < shapes.size(); i += 3) {
      auto s = testmodels::random_state(shapes[i], rng);
      auto scaled = s;
      for (auto& w : scaled.model.situation_weights.at("O")) w *= 7.5;
      CHECK(best_query(scaled) == best_query(s));
    }
  }

  TEST_CASE("observation order does not matter") {
    auto base = make_learner(make_prior_model(ballkick()));
    std::vector<std::pair<Instantiation, Instantiation>> obs;
    std::mt19937_64 rng(107);
    const auto sits = enumerate_instantiations(base.model.structure.situation_variables());
    const auto& dom = base.model.structure.variable("KDo").domain;
    for (int i = 0; i < 30; ++i) {
      obs.emplace_back(sits[rng() % sits.size()], Instantiation{{"KDo", dom[rng() % dom.size()]}});
    }
    auto run = [&](const auto& seq) {
      auto s = base;
      for (const auto& [sit, out] : seq) s = record_observation(std::move(s), sit, out);
      return s.model;
    };
    const auto reference = run(obs);
    for (int k = 0; k < 5; ++k) {
      std::shuffle(obs.begin(), obs.end(), rng);
      CHECK(run(obs) == reference);
    }
  }

  TEST_CASE("record observation") {
    auto s = make_learner(make_prior_model(ballkick()));
    const double before = model_error(s);
    auto t = record_observation(s, {{"Position", "Middle"}, {"KDc", "Left"}}, {{"KDo", "Right"}});
    const auto& rows = t.model.cpt("KDo").rows;
    int changed = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] != s.model.cpt("KDo").rows[r]) {
        ++changed;
        CHECK(rows[r] == std::vector<double>{1, 1, 2, 1});
      }
    }
    CHECK(changed == 1);
    CHECK(model_error(t) < before);
    CHECK(t.history.size() == 1);
    CHECK_THROWS(record_observation(s, {{"Position", "Middle"}}, {{"KDo", "Right"}}));
    CHECK_THROWS(record_observation(s, {{"Position", "Middle"}, {"KDc", "Left"}}, {{"KDo", "Up"}}));
  }

  TEST_CASE("repeated observations move the mean to the observed value") {
    auto s = make_learner(make_prior_model(ballkick()));
    const Instantiation sit{{"Position", "LeftSide"}, {"KDc", "Right"}};
    for (int n = 1; n <= 4; ++n) {
      s = record_observation(std::move(s), sit, {{"KDo", "None"}});
      const auto mean = posterior_mean(s.model.cpt("KDo"), situation_index(s.model.structure, "KDo", sit));
      if (n >= 4) CHECK(std::max_element(mean.begin(), mean.end()) - mean.begin() == 3);
    }
  }

  TEST_CASE("model error drops after any single observation") {
    std::mt19937_64 rng(109);
    for (const auto& shape : testmodels::all_shapes()) {
      auto s = testmodels::fresh_state(shape);
      const auto sits = enumerate_instantiations(s.model.structure.situation_variables());
      const auto& sit = sits[rng() % sits.size()];
      const auto& dom = s.model.structure.variable("O").domain;
      auto t = record_observation(s, sit, {{"O", dom[rng() % dom.size()]}});
      CHECK(model_error(t) < model_error(s));
    }
  }

  TEST_CASE("passive draws are uniform") {
    auto s = make_learner(make_prior_model(ballkick()));
    Rng a(5), b(5);
    for (int i = 0; i < 20; ++i) CHECK(passive_query(s, a) == passive_query(s, b));
    Rng rng(9);
    std::map<std::string, int> freq;
    for (int i = 0; i < 9000; ++i) ++freq[passive_query(s, rng).key()];
    CHECK(freq.size() == 9);
    for (const auto& [k, n] : freq) {
      CHECK(n >= 900);
      CHECK(n <= 1100);
    }
  }

  TEST_CASE("environment distribution tracks observed frequencies") {
    NetworkStructure st;
    st.nodes = {{"E", {"x", "y"}, Role::kContext, false},
                {"C", {"go", "stop"}, Role::kCommand, true},
                {"O", {"u", "v"}, Role::kOutcome, false}};
    st.parents["O"] = {"E", "C"};
    auto s = make_learner(make_prior_model(std::move(st)));
    CHECK(s.uncontrolled_dist.at("E") == std::vector<double>{0.5, 0.5});
    s = record_observation(s, {{"E", "y"}, {"C", "go"}}, {{"O", "u"}});
    s = record_observation(s, {{"E", "y"}, {"C", "go"}}, {{"O", "u"}});
    s = record_observation(s, {{"E", "x"}, {"C", "go"}}, {{"O", "u"}});
    CHECK(s.uncontrolled_dist.at("E")[1] == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS(make_learner(s.model, {"E"}));
  }
}
