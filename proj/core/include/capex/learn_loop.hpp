#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "capex/active_learner.hpp"
#include "capex/random.hpp"
#include "capex/refinement.hpp"

namespace capex {

enum class QueryMode { kActive, kPassive };

std::string_view to_string(QueryMode mode);
QueryMode query_mode_from_string(std::string_view text);

struct ExperimentResult {
  Instantiation situation;  // query plus environment-set situation variables
  Instantiation outcome;
};

// Anything that can run one experiment: a simulator, a robot bridge, or a
// scripted replay.
class Subject {
 public:
  virtual ~Subject() = default;
  // `environment` lists the learner's situation variables outside the query;
  // the subject must report a value for each of them.
  virtual ExperimentResult experiment(const Instantiation& query, const Instantiation& attributes,
                                      std::span<const VariableSpec> environment) = 0;
};

struct LearnConfig {
  std::size_t max_iter = 0;
  QueryMode mode = QueryMode::kActive;
  std::uint64_t seed = 0;
  RefinementConfig refinement;
  bool refine = true;  // false gives the fixed-structure baseline
};

struct Proposal {
  std::size_t iteration = 0;  // 1-based index of the experiment being proposed
  Instantiation query;
  Instantiation attributes;  // requested attribute settings
  double epe = 0.0;
  double model_error = 0.0;
};

struct TraceRecord {
  std::size_t iteration = 0;
  QueryMode mode = QueryMode::kActive;
  Instantiation query;
  Instantiation situation;
  Instantiation attributes;
  Instantiation outcome;
  double model_error = 0.0;
  std::optional<double> kl_to_truth;
  std::vector<std::string> promoted;
  std::optional<std::string> error;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// One step of the learn loop at a time: propose an experiment, then fold its
// result back in (posterior update, attribute statistics, dependence test,
// promotion). Used directly by interactive sessions and wrapped by
// learn_model for batch runs, so both produce identical states.
class Experimenter {
 public:
  Experimenter(LearnerState learner, AttributeStats stats, LearnConfig config);

  Proposal propose();
  TraceRecord observe(const Proposal& proposal, const Instantiation& situation,
                      const Instantiation& outcome, const Instantiation& attributes);

  const LearnerState& learner() const { return learner_; }
  const AttributeStats& stats() const { return stats_; }
  const LearnConfig& config() const { return config_; }
  std::size_t iteration() const { return iteration_; }

  // Engine state, exposed for persistence.
  const Rng& query_rng() const { return query_rng_; }
  const Rng& attribute_rng() const { return attribute_rng_; }
  static Experimenter restore(LearnerState learner, AttributeStats stats, LearnConfig config,
                              std::size_t iteration, Rng query_rng, Rng attribute_rng);

 private:
  LearnerState learner_;
  AttributeStats stats_;
  LearnConfig config_;
  std::size_t iteration_ = 0;
  Rng query_rng_;
  Rng attribute_rng_;
};

struct LearnResult {
  LearnerState learner;
  AttributeStats stats;
  std::vector<TraceRecord> trace;
  std::optional<double> initial_kl;
};

using ModelEvaluator = std::function<double(const ModelState&)>;

// Runs exactly config.max_iter experiments against `subject` unless the
// subject fails, in which case the trace ends with an error record.
LearnResult learn_model(Subject& subject, LearnerState learner, AttributeStats stats,
                        const LearnConfig& config, const ModelEvaluator& evaluator = {});

}  // namespace capex
