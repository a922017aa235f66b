#include <doctest.h>

#include <random>

#include "capex/errors.hpp"
#include "capex/variables.hpp"

using namespace capex;

namespace {

VariableSpec var(std::string name, std::vector<std::string> domain, Role role = Role::kContext) {
  VariableSpec v{std::move(name), std::move(domain), role, true};
  return v;
}

std::vector<VariableSpec> ballkick_situation() {
  return {var("Position", {"LeftSide", "Middle", "RightSide"}, Role::kCommand),
          var("KDc", {"Left", "Mid", "Right"}, Role::kCommand)};
}

}  // namespace

TEST_SUITE("variables") {
  TEST_CASE("validate rejects bad domains") {
    CHECK_THROWS_AS(var("X", {}).validate(), InvalidVariable);
    CHECK_THROWS_AS(var("X", {"a"}).validate(), InvalidVariable);
    CHECK_THROWS_AS(var("X", {"a", "a"}).validate(), InvalidVariable);
    VariableSpec cmd = var("C", {"a", "b"}, Role::kCommand);
    cmd.controllable = false;
    CHECK_THROWS_AS(cmd.validate(), InvalidVariable);
    CHECK_NOTHROW(var("X", {"a", "b"}).validate());
  }

  TEST_CASE("index_of and find") {
    auto v = var("X", {"a", "b", "c"});
    CHECK(v.index_of("c") == 2);
    CHECK_FALSE(v.find("z").has_value());
    CHECK_THROWS_AS(v.index_of("z"), OutOfDomain);
  }

  TEST_CASE("enumeration sizes") {
    std::vector<VariableSpec> one{var("X", {"a", "b"})};
    auto all = enumerate_instantiations(one);
    REQUIRE(all.size() == 2);
    CHECK(all[0] == Instantiation{{"X", "a"}});
    CHECK(all[1] == Instantiation{{"X", "b"}});

    CHECK(enumerate_instantiations(ballkick_situation()).size() == 9);

    std::vector<VariableSpec> pickup{var("Shape", {"Ball", "Box", "Cylinder"}),
                                     var("Size", {"Small", "Large"}),
                                     var("Weight", {"Light", "Heavy"})};
    CHECK(enumerate_instantiations(pickup).size() == 12);
    CHECK(joint_cardinality(pickup) == 12);
  }

  TEST_CASE("last variable varies fastest") {
    auto all = enumerate_instantiations(ballkick_situation());
    CHECK(all[1].at("Position") == "LeftSide");
    CHECK(all[1].at("KDc") == "Mid");
    CHECK(all[3].at("Position") == "Middle");
    CHECK(all[3].at("KDc") == "Left");
  }

  TEST_CASE("mixed radix index") {
    auto vars = ballkick_situation();
    auto all = enumerate_instantiations(vars);
    CHECK(mixed_radix_index(vars, all.front()) == 0);
    CHECK(mixed_radix_index(vars, all.back()) == 8);
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(mixed_radix_index(vars, all[i]) == i);
      CHECK(instantiation_at(vars, i) == all[i]);
    }
    CHECK_THROWS_AS(mixed_radix_index(vars, Instantiation{{"Position", "Middle"}}), MissingBinding);
  }

  TEST_CASE("index bijection on random variable lists") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<VariableSpec> vars;
      const int n = 1 + int(rng() % 4);
      for (int k = 0; k < n; ++k) {
        std::vector<std::string> dom;
        const int card = 2 + int(rng() % 3);
        for (int d = 0; d < card; ++d) dom.push_back("v" + std::to_string(d));
        vars.push_back(var("V" + std::to_string(k), dom));
      }
      const auto total = joint_cardinality(vars);
      for (std::size_t i = 0; i < total; ++i) {
        REQUIRE(mixed_radix_index(vars, instantiation_at(vars, i)) == i);
      }
    }
  }

  TEST_CASE("instantiation helpers") {
    Instantiation a{{"B", "y"}, {"A", "x"}};
    CHECK(a.key() == "A=x;B=y");
    CHECK(Instantiation::parse_key(a.key()) == a);
    CHECK(Instantiation::parse_key("") == Instantiation{});
    CHECK(a.merged(Instantiation{{"A", "z"}}).at("A") == "z");
    std::vector<std::string> names{"A"};
    CHECK(a.restricted_to(names) == Instantiation{{"A", "x"}});
    CHECK_THROWS_AS(a.at("C"), MissingBinding);
  }

  TEST_CASE("validate_instantiation") {
    auto vars = ballkick_situation();
    CHECK_NOTHROW(validate_instantiation(Instantiation{{"KDc", "Mid"}}, vars, false));
    CHECK_THROWS(validate_instantiation(Instantiation{{"KDc", "Mid"}}, vars, true));
    CHECK_THROWS(validate_instantiation(Instantiation{{"KDc", "Up"}}, vars, false));
    CHECK_THROWS(validate_instantiation(Instantiation{{"Nope", "Mid"}}, vars, false));
  }

  TEST_CASE("role names round trip") {
    for (Role r : {Role::kContext, Role::kCommand, Role::kOutcome, Role::kAttribute}) {
      CHECK(role_from_string(to_string(r)) == r);
    }
  }
}
