#include <benchmark/benchmark.h>

#include <random>

#include "capex/active_learner.hpp"
#include "capex/divergence.hpp"
#include "capex/learn_loop.hpp"
#include "capex/scenario.hpp"
#include "capex/subject_sim.hpp"

using namespace capex;

namespace {

void BM_DirichletExpectedKl(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.5, 10.0);
  std::vector<double> a(std::size_t(state.range(0)));
  for (auto& x : a) x = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(dirichlet_expected_kl(a));
}
BENCHMARK(BM_DirichletExpectedKl)->Arg(2)->Arg(4)->Arg(8);

// 54 rows: Position x KDc x BallSize x Turf over a four-valued outcome.
void BM_BestQuery54(benchmark::State& state) {
  NetworkStructure st;
  st.nodes = {{"Position", {"LeftSide", "Middle", "RightSide"}, Role::kCommand, true},
              {"KDc", {"Left", "Mid", "Right"}, Role::kCommand, true},
              {"BallSize", {"Small", "Large"}, Role::kContext, true},
              {"Turf", {"Grass", "Synthetic", "Sand"}, Role::kContext, true},
              {"KDo", {"Left", "Mid", "Right", "None"}, Role::kOutcome, false}};
  st.parents["KDo"] = {"Position", "KDc", "BallSize", "Turf"};
  auto learner = make_learner(make_prior_model(st));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1.0, 20.0);
  for (auto& row : learner.model.cpts.at("KDo").rows) {
    for (auto& x : row) x = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(best_query(learner));
}
BENCHMARK(BM_BestQuery54);

// One propose/experiment/observe turn on the two-missing-variable scenario.
void BM_LearnStep(benchmark::State& state) {
  const auto sc = load_scenario("ballkick_missing_two");
  LearnConfig cfg;
  cfg.refinement = default_refinement(sc);
  cfg.seed = 1;
  Experimenter engine(initial_learner(sc), initial_attribute_stats(sc, cfg.refinement.n_min), cfg);
  auto spec = sc.subject;
  spec.seed = 1;
  SimulatedSubject subject(spec);
  for (auto _ : state) {
    const auto p = engine.propose();
    const auto r = subject.experiment(p.query, p.attributes, engine.learner().uncontrolled_specs());
    benchmark::DoNotOptimize(engine.observe(p, r.situation, r.outcome, p.attributes));
  }
}
BENCHMARK(BM_LearnStep)->Iterations(500);

}  // namespace

BENCHMARK_MAIN();
