#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "capex/errors.hpp"
#include "capex/network.hpp"

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

}  // namespace

TEST_SUITE("network") {
  TEST_CASE("structure validation") {
    CHECK_NOTHROW(ballkick().validate());

    auto orphan = ballkick();
    orphan.nodes.push_back({"Turf", {"Grass", "Sand"}, Role::kContext, false});
    CHECK_THROWS(orphan.validate());

    auto attr = ballkick();
    attr.nodes.push_back({"Color", {"Y", "O"}, Role::kAttribute, false});
    CHECK_THROWS(attr.validate());

    auto dup = ballkick();
    dup.parents["KDo"] = {"Position", "Position"};
    CHECK_THROWS(dup.validate());

    auto bad_parent = ballkick();
    bad_parent.parents["KDo"] = {"Position", "KDo"};
    CHECK_THROWS(bad_parent.validate());

    auto no_parents = ballkick();
    no_parents.parents.clear();
    CHECK_THROWS(no_parents.validate());
  }

  TEST_CASE("prior model") {
    auto m = make_prior_model(ballkick());
    CHECK(m.structure.row_count("KDo") == 9);
    const auto& cpt = m.cpt("KDo");
    REQUIRE(cpt.rows.size() == 9);
    for (const auto& row : cpt.rows) CHECK(row == std::vector<double>(4, 1.0));
    const auto& w = m.weights("KDo");
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0));
    CHECK_NOTHROW(m.validate());
    CHECK_THROWS(make_prior_model(ballkick(), 0.0));
  }

  TEST_CASE("situation index") {
    auto s = ballkick();
    CHECK(situation_index(s, "KDo", {{"Position", "LeftSide"}, {"KDc", "Left"}}) == 0);
    CHECK(situation_index(s, "KDo", {{"Position", "RightSide"}, {"KDc", "Right"}}) == 8);
    CHECK(situation_index(s, "KDo", {{"Position", "Middle"}, {"KDc", "Right"}}) == 5);
    CHECK_THROWS_AS(situation_index(s, "KDo", {{"Position", "Middle"}}), MissingBinding);
    for (std::size_t i = 0; i < 9; ++i) CHECK(situation_index(s, "KDo", situation_at(s, "KDo", i)) == i);
  }

  TEST_CASE("posterior update") {
    auto cpt = DirichletCPT::uniform("KDo", 9, 4);
    auto updated = posterior_update(cpt, 3, 2);
    CHECK(updated.rows[3] == std::vector<double>{1, 1, 2, 1});
    for (std::size_t r = 0; r < 9; ++r) {
      if (r != 3) CHECK(updated.rows[r] == cpt.rows[r]);
    }
    const double before = std::accumulate(cpt.rows[3].begin(), cpt.rows[3].end(), 0.0);
    const double after = std::accumulate(updated.rows[3].begin(), updated.rows[3].end(), 0.0);
    CHECK(after == before + 1.0);
    CHECK_THROWS_AS(posterior_update(cpt, 9, 0), OutOfDomain);
    CHECK_THROWS_AS(posterior_update(cpt, 0, 4), OutOfDomain);
  }

  TEST_CASE("ten updates of one value") {
    auto cpt = DirichletCPT::uniform("O", 1, 2);
    for (int i = 0; i < 10; ++i) cpt = posterior_update(std::move(cpt), 0, 0);
    CHECK(cpt.rows[0] == std::vector<double>{11, 1});
    auto mean = posterior_mean(cpt, 0);
    CHECK(mean[0] == doctest::Approx(11.0 / 12.0));
    CHECK(mean[1] == doctest::Approx(1.0 / 12.0));
  }

  TEST_CASE("posterior mean") {
    auto cpt = DirichletCPT::uniform("O", 1, 4);
    CHECK(posterior_mean(cpt, 0) == std::vector<double>(4, 0.25));
    cpt.rows[0] = {3, 1};
    CHECK(posterior_mean(cpt, 0) == std::vector<double>{0.75, 0.25});
  }

  TEST_CASE("posterior mean matches the Dirichlet sample mean") {
    const std::vector<double> a{2.5, 0.7, 4.0};
    DirichletCPT cpt{"O", {a}};
    const auto mean = posterior_mean(cpt, 0);
    std::mt19937_64 rng(41);
    std::vector<std::gamma_distribution<double>> g;
    for (double x : a) g.emplace_back(x, 1.0);
    const int n = 1000000;
    std::vector<double> s(3, 0.0), s2(3, 0.0);
    for (int i = 0; i < n; ++i) {
      double t[3], tot = 0.0;
      for (int j = 0; j < 3; ++j) tot += t[j] = g[j](rng);
      for (int j = 0; j < 3; ++j) {
        s[j] += t[j] / tot;
        s2[j] += (t[j] / tot) * (t[j] / tot);
      }
    }
    for (int j = 0; j < 3; ++j) {
      const double m = s[j] / n;
      const double se = std::sqrt((s2[j] / n - m * m) / n);
      CHECK(std::abs(m - mean[j]) <= 3.0 * se);
    }
  }

  TEST_CASE("reset restores the prior") {
    auto m = make_prior_model(ballkick(), 2.0);
    m.cpts.at("KDo") = posterior_update(m.cpts.at("KDo"), 0, 0);
    reset_outcome_prior(m, "KDo");
    for (const auto& row : m.cpt("KDo").rows) CHECK(row == std::vector<double>(4, 2.0));
  }
}
