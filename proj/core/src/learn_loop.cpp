#include "capex/learn_loop.hpp"

#include "capex/errors.hpp"

namespace capex {

std::string_view to_string(QueryMode mode) {
  return mode == QueryMode::kActive ? "active" : "passive";
}

QueryMode query_mode_from_string(std::string_view text) {
  if (text == "active") return QueryMode::kActive;
  if (text == "passive") return QueryMode::kPassive;
  throw ConfigError("mode must be 'active' or 'passive', got '" + std::string(text) + "'");
}

Experimenter::Experimenter(LearnerState learner, AttributeStats stats, LearnConfig config)
    : learner_(std::move(learner)),
      stats_(std::move(stats)),
      config_(config),
      query_rng_(make_stream(config.seed, Stream::kQuery)),
      attribute_rng_(make_stream(config.seed, Stream::kAttributes)) {
  config_.refinement.validate();
  learner_.validate();
}

Experimenter Experimenter::restore(LearnerState learner, AttributeStats stats,
                                   LearnConfig config, std::size_t iteration, Rng query_rng,
                                   Rng attribute_rng) {
  Experimenter e(std::move(learner), std::move(stats), config);
  e.iteration_ = iteration;
  e.query_rng_ = std::move(query_rng);
  e.attribute_rng_ = std::move(attribute_rng);
  return e;
}

Proposal Experimenter::propose() {
  Proposal p;
  p.iteration = iteration_ + 1;
  if (config_.mode == QueryMode::kActive) {
    const auto evals = evaluate_queries(learner_);
    const QueryEvaluation* best = &evals.front();
    for (const auto& e : evals) {
      if (e.epe < best->epe) best = &e;
    }
    p.query = best->query;
    p.epe = best->epe;
    p.model_error = best->model_error;
  } else {
    p.query = passive_query(learner_, query_rng_);
    const auto eval = expected_posterior_error(learner_, p.query);
    p.epe = eval.epe;
    p.model_error = eval.model_error;
  }
  for (const auto& attr : stats_.attributes) {
    p.attributes.set(attr.name, attr.domain[uniform_index(attribute_rng_, attr.cardinality())]);
  }
  return p;
}

TraceRecord Experimenter::observe(const Proposal& proposal, const Instantiation& situation,
                                  const Instantiation& outcome, const Instantiation& attributes) {
  for (const auto& [name, value] : proposal.query) {
    if (situation.at(name) != value) {
      throw ConfigError("reported situation overrides query variable '" + name + "'");
    }
  }
  // Validate everything up front so the moves below cannot lose state.
  const auto& structure = learner_.model.structure;
  validate_instantiation(situation, structure.situation_variables(), /*require_all=*/true);
  validate_instantiation(outcome, structure.with_role(Role::kOutcome), /*require_all=*/true);
  for (const auto& a : stats_.attributes) a.index_of(attributes.at(a.name));

  LearnerState next = record_observation(std::move(learner_), situation, outcome, attributes);
  AttributeStats next_stats = std::move(stats_);
  if (!next_stats.attributes.empty()) {
    next_stats = update_attribute_stats(std::move(next_stats), situation, attributes, outcome);
  }

  TraceRecord rec;
  rec.iteration = proposal.iteration;
  rec.mode = config_.mode;
  rec.query = proposal.query;
  rec.situation = situation;
  rec.attributes = attributes;
  rec.outcome = outcome;

  if (config_.refine && !next_stats.attributes.empty()) {
    const auto observed = next_stats.observed_situations();
    Promotions promotions;
    for (const auto& o : next.model.structure.outcome_names()) {
      auto found = identify_dependence(next_stats, o, observed, config_.refinement);
      if (!found.empty()) promotions[o] = std::move(found);
    }
    if (!promotions.empty()) {
      auto refined = modify_model(std::move(next), std::move(next_stats), promotions,
                                  config_.refinement);
      next = std::move(refined.learner);
      next_stats = std::move(refined.stats);
      rec.promoted = std::move(refined.added);
    }
  }

  learner_ = std::move(next);
  stats_ = std::move(next_stats);
  iteration_ = proposal.iteration;
  rec.model_error = model_error(learner_);
  return rec;
}

LearnResult learn_model(Subject& subject, LearnerState learner, AttributeStats stats,
                        const LearnConfig& config, const ModelEvaluator& evaluator) {
  Experimenter engine(std::move(learner), std::move(stats), config);
  LearnResult result;
  if (evaluator) result.initial_kl = evaluator(engine.learner().model);

  for (std::size_t i = 0; i < config.max_iter; ++i) {
    const Proposal proposal = engine.propose();
    ExperimentResult observed;
    try {
      observed = subject.experiment(proposal.query, proposal.attributes,
                                    engine.learner().uncontrolled_specs());
    } catch (const std::exception& e) {
      TraceRecord failure;
      failure.iteration = proposal.iteration;
      failure.mode = config.mode;
      failure.query = proposal.query;
      failure.attributes = proposal.attributes;
      failure.model_error = model_error(engine.learner());
      failure.error = e.what();
      result.trace.push_back(std::move(failure));
      break;
    }
    TraceRecord rec =
        engine.observe(proposal, observed.situation, observed.outcome, proposal.attributes);
    if (evaluator) rec.kl_to_truth = evaluator(engine.learner().model);
    result.trace.push_back(std::move(rec));
  }
  result.learner = engine.learner();
  result.stats = engine.stats();
  return result;
}

}  // namespace capex
