#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "capex/errors.hpp"
#include "capex/json_io.hpp"
#include "capex/scenario.hpp"

using namespace capex;

namespace {

template <class T>
T round_trip(const T& value) {
  return json::parse(json(value).dump()).get<T>();
}

}  // namespace

TEST_SUITE("json_io") {
  TEST_CASE("model state round trip is exact") {
    const auto sc = load_scenario("ballkick_missing_size");
    TrialConfig cfg;
    cfg.iters = 150;
    cfg.seed = 2;
    cfg.refinement = default_refinement(sc);
    const auto r = run_trial(sc, cfg);
    CHECK(round_trip(r.run.learner.model) == r.run.learner.model);
    CHECK(round_trip(r.run.learner) == r.run.learner);
    CHECK(round_trip(r.run.stats) == r.run.stats);
    for (const auto& rec : r.run.trace) CHECK(round_trip(rec) == rec);
  }

  TEST_CASE("model json schema") {
    const auto m = make_prior_model(initial_learner(load_scenario("ballkick_basic")).model.structure);
    const json j = m;
    for (const char* key : {"variables", "parents", "cpt_rows", "situation_weights", "prior", "rng_seed"}) {
      CHECK(j.contains(key));
    }
    CHECK(j["cpt_rows"]["KDo"].size() == 9);
  }

  TEST_CASE("pseudo-counts may be decimal strings") {
    json j = make_prior_model(initial_learner(load_scenario("ballkick_basic")).model.structure);
    j["cpt_rows"]["KDo"][0] = {"0.1", "2.5", "1", "1"};
    const auto m = j.get<ModelState>();
    CHECK(m.cpt("KDo").rows[0] == std::vector<double>{0.1, 2.5, 1, 1});
  }

  TEST_CASE("malformed models are rejected") {
    json j = make_prior_model(initial_learner(load_scenario("ballkick_basic")).model.structure);
    j["cpt_rows"]["KDo"].erase(0);
    CHECK_THROWS(j.get<ModelState>());
    json k = make_prior_model(initial_learner(load_scenario("ballkick_basic")).model.structure);
    k["cpt_rows"]["KDo"][0][0] = -1.0;
    CHECK_THROWS(k.get<ModelState>());
  }

  TEST_CASE("reference forms") {
    const auto a = json::parse(R"({"KDo": {"rule": "equals_command", "command": "KDc"}})").get<ReferenceSpec>();
    CHECK(a.outcomes.at("KDo").kind == ReferenceRule::Kind::kEqualsCommand);
    const auto b = json::parse(R"({"Pick": {"rule": "point_mass", "value": "Success"}})").get<ReferenceSpec>();
    CHECK(b.outcomes.at("Pick").value == "Success");
    const auto c = json::parse(R"({"Pick": {"table": {"Arm=Left": [1, 0], "Arm=Right": [0.5, 0.5]}}})")
                       .get<ReferenceSpec>();
    CHECK(c.outcomes.at("Pick").table.at("Arm=Right") == std::vector<double>{0.5, 0.5});
    for (const auto& r : {a, b, c}) CHECK(round_trip(r) == r);
    CHECK_THROWS(json::parse(R"({"Pick": {"rule": "whatever"}})").get<ReferenceSpec>());
  }

  TEST_CASE("format_double is shortest round trip") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
      const double x = u(rng);
      CHECK(std::stod(format_double(x)) == x);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(3.0) == "3");
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  }

  TEST_CASE("trace csv") {
    const auto sc = load_scenario("ballkick_basic");
    TrialConfig cfg;
    cfg.iters = 5;
    cfg.seed = 1;
    const auto r = run_trial(sc, cfg);
    const auto csv = trace_csv(r.run.trace);
    CHECK(csv.rfind(trace_csv_header(), 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv) lines += ch == '\n';
    CHECK(lines == 6);
    CHECK(trace_csv({}) == trace_csv_header() + "\n");
    CHECK(trace_csv_header() ==
          "iteration,mode,query,situation,attributes,outcome,model_error,kl_to_truth,promoted_vars");
    const auto jsonl = trace_jsonl(r.run.trace);
    std::size_t n = 0;
    std::istringstream in(jsonl);
    for (std::string line; std::getline(in, line);) {
      CHECK(json::parse(line).get<TraceRecord>() == r.run.trace[n]);
      ++n;
    }
    CHECK(n == 5);
  }

  TEST_CASE("atomic writes") {
    const auto dir = std::filesystem::temp_directory_path() / "capex_json_io_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto file = dir / "out.json";
    write_file_atomic(file, "{\"a\": 1}");
    CHECK(read_json_file(file)["a"] == 1);
    write_file_atomic(file, "{\"a\": 2}");
    CHECK(read_json_file(file)["a"] == 2);
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
    CHECK(entries == 1);
    CHECK_THROWS_AS(read_json_file(dir / "missing.json"), ConfigError);
    std::ofstream(dir / "broken.json") << "{nope";
    CHECK_THROWS_AS(read_json_file(dir / "broken.json"), ConfigError);
    CHECK_THROWS(write_file_atomic(dir / "no" / "such" / "dir.json", "x"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("rng state round trip") {
    Rng rng(99);
    for (int i = 0; i < 10; ++i) rng();
    auto copy = deserialize_rng(serialize_rng(rng));
    for (int i = 0; i < 10; ++i) CHECK(copy() == rng());
    CHECK_THROWS(deserialize_rng("not an engine"));
  }
}
