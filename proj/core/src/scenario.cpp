#include "capex/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "capex/errors.hpp"
#include "capex/json_io.hpp"

namespace capex {

namespace detail {
struct BundledScenario {
  const char* name;
  const char* text;
};
// Generated at build time from core/scenarios/*.json.
extern const BundledScenario kBundledScenarios[];
extern const std::size_t kBundledScenarioCount;
}  // namespace detail

namespace {

bool matches(const Instantiation& when, const Instantiation& full) {
  for (const auto& [name, value] : when) {
    if (full.at(name) != value) return false;
  }
  return true;
}

// A distribution expression over `outcome`, evaluated in `full`:
//   [p...] | "uniform" | {"uniform_over": [...]} | {"point_mass": v} |
//   {"follow_command": var}
std::vector<double> eval_dist(const json& expr, const VariableSpec& outcome,
                              const Instantiation& full) {
  const std::size_t k = outcome.cardinality();
  std::vector<double> dist(k, 0.0);
  if (expr.is_array()) return expr.get<std::vector<double>>();
  if (expr.is_string() && expr.get<std::string>() == "uniform") {
    dist.assign(k, 1.0 / double(k));
    return dist;
  }
  if (!expr.is_object() || expr.size() != 1) {
    throw ConfigError("bad distribution expression for '" + outcome.name + "': " + expr.dump());
  }
  if (expr.contains("uniform_over")) {
    const auto values = expr.at("uniform_over").get<std::vector<std::string>>();
    if (values.empty()) throw ConfigError("uniform_over needs at least one value");
    for (const auto& v : values) dist[outcome.index_of(v)] += 1.0 / double(values.size());
    return dist;
  }
  if (expr.contains("point_mass")) {
    dist[outcome.index_of(expr.at("point_mass").get<std::string>())] = 1.0;
    return dist;
  }
  if (expr.contains("follow_command")) {
    const std::string& commanded = full.at(expr.at("follow_command").get<std::string>());
    dist[outcome.index_of(commanded)] = 1.0;
    return dist;
  }
  throw ConfigError("bad distribution expression for '" + outcome.name + "': " + expr.dump());
}

// Expands a truth description into mixed-radix rows over `parents`.
std::vector<std::vector<double>> expand_truth(const json& spec, const VariableSpec& outcome,
                                              const std::vector<VariableSpec>& parents) {
  const auto situations = enumerate_instantiations(parents);
  std::vector<std::vector<double>> rows;
  if (spec.is_object() && spec.contains("rows")) return spec.at("rows").get<decltype(rows)>();
  if (spec.is_array() && !spec.empty() && spec.front().is_array()) return spec.get<decltype(rows)>();
  if (spec.is_object() && spec.contains("random_dirichlet")) {
    // Placeholder rows; run_trial redraws them.
    rows.assign(situations.size(), std::vector<double>(outcome.cardinality(),
                                                        1.0 / double(outcome.cardinality())));
    return rows;
  }
  for (const auto& s : situations) {
    if (spec.is_object() && spec.contains("cases")) {
      const json* chosen = spec.contains("default") ? &spec.at("default") : nullptr;
      for (const auto& c : spec.at("cases")) {
        if (matches(c.at("when").get<Instantiation>(), s)) {
          chosen = &c.at("then");
          break;
        }
      }
      if (chosen == nullptr) {
        throw ConfigError("no case covers '" + s.key() + "' for '" + outcome.name + "'");
      }
      rows.push_back(eval_dist(*chosen, outcome, s));
    } else {
      rows.push_back(eval_dist(spec, outcome, s));
    }
  }
  return rows;
}

std::vector<std::string> names_of(const json& j) { return j.get<std::vector<std::string>>(); }

}  // namespace

Scenario parse_scenario(const json& j) {
  try {
    Scenario sc;
    sc.name = j.value("name", std::string("unnamed"));
    sc.description = j.value("description", std::string());

    std::set<std::string> hidden;
    for (const auto& v : j.at("variables")) {
      VariableSpec spec = v.get<VariableSpec>();
      if (v.value("hidden", false)) hidden.insert(spec.name);
      sc.subject.variables.push_back(std::move(spec));
    }
    sc.subject.parents = j.at("parents").get<std::map<std::string, std::vector<std::string>, std::less<>>>();
    sc.subject.noise_rate = j.value("noise_rate", 0.0);

    const json& truth = j.at("truth_cpt");
    for (const auto& o : sc.subject.outcome_names()) {
      if (!truth.contains(o)) throw ConfigError("truth_cpt lacks outcome '" + o + "'");
      const json& t = truth.at(o);
      if (t.is_object() && t.contains("random_dirichlet")) {
        sc.random_truth = t.at("random_dirichlet").get<double>();
        if (!(*sc.random_truth > 0.0)) throw ConfigError("random_dirichlet must be positive");
      }
      sc.subject.truth[o] = expand_truth(t, sc.subject.variable(o), sc.subject.parent_specs(o));
    }
    for (const auto& r : j.value("hidden_rules", json::array())) {
      HiddenRule rule;
      rule.guard = r.at("guard").get<Instantiation>();
      for (const auto& [o, expr] : r.at("override").items()) {
        rule.override_dist[o] = eval_dist(expr, sc.subject.variable(o), rule.guard);
      }
      sc.subject.hidden_rules.push_back(std::move(rule));
    }
    sc.subject.fixed = j.value("fixed", Instantiation{});
    sc.subject.validate();

    const json& init = j.at("learner_initial");
    for (const auto& name : names_of(init.at("variables"))) {
      if (hidden.contains(name)) throw ConfigError("learner variable '" + name + "' is hidden");
      const auto& v = sc.subject.variable(name);
      if (v.role == Role::kAttribute) {
        throw ConfigError("attribute '" + name + "' cannot be an initial network node");
      }
      sc.learner_structure.nodes.push_back(v);
    }
    sc.learner_structure.parents =
        init.at("parents").get<std::map<std::string, std::vector<std::string>, std::less<>>>();
    sc.learner_structure.validate();
    sc.prior = init.value("prior", 1.0);
    if (!(sc.prior > 0.0)) throw ConfigError("prior must be positive");
    if (init.contains("query_vars")) sc.query_vars = names_of(init.at("query_vars"));

    std::vector<std::string> attrs;
    if (init.contains("attributes")) {
      attrs = names_of(init.at("attributes"));
    } else {
      for (const auto& v : sc.subject.variables) {
        if (v.role != Role::kOutcome && !sc.learner_structure.has(v.name)) attrs.push_back(v.name);
      }
    }
    for (const auto& name : attrs) {
      if (sc.learner_structure.has(name)) {
        throw ConfigError("attribute '" + name + "' is already a network node");
      }
      VariableSpec a = sc.subject.variable(name);
      if (a.role == Role::kOutcome) throw ConfigError("outcome '" + name + "' used as attribute");
      a.role = Role::kAttribute;
      a.controllable = false;
      sc.attributes.push_back(std::move(a));
    }
    if (init.contains("attribute_targets")) {
      sc.attribute_targets = init.at("attribute_targets")
                                 .get<std::map<std::string, std::vector<std::string>, std::less<>>>();
    }

    if (j.contains("reference")) {
      sc.reference = j.at("reference").get<ReferenceSpec>();
      sc.reference->validate(sc.learner_structure);
    }
    if (j.contains("defaults")) {
      const json& d = j.at("defaults");
      sc.defaults.r_threshold = d.value("r_threshold", sc.defaults.r_threshold);
      sc.defaults.n_min = d.value("n_min", sc.defaults.n_min);
      sc.defaults.threshold = d.value("threshold", sc.defaults.threshold);
      sc.defaults.promoted_controllable =
          d.value("promoted_controllable", sc.defaults.promoted_controllable);
    }
    default_refinement(sc).validate();
    // Catch structural mistakes now rather than on the first experiment.
    initial_learner(sc);
    initial_attribute_stats(sc, sc.defaults.n_min);
    return sc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
}

std::vector<std::string> bundled_scenario_names() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < detail::kBundledScenarioCount; ++i) {
    out.emplace_back(detail::kBundledScenarios[i].name);
  }
  return out;
}

const json& bundled_scenario_json(std::string_view name) {
  static const std::map<std::string, json, std::less<>> parsed = [] {
    std::map<std::string, json, std::less<>> m;
    for (std::size_t i = 0; i < detail::kBundledScenarioCount; ++i) {
      m.emplace(detail::kBundledScenarios[i].name, json::parse(detail::kBundledScenarios[i].text));
    }
    return m;
  }();
  auto it = parsed.find(name);
  if (it == parsed.end()) throw ConfigError("no bundled scenario '" + std::string(name) + "'");
  return it->second;
}

Scenario load_scenario(const std::string& name_or_path) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(name_or_path, ec)) {
    return parse_scenario(read_json_file(name_or_path));
  }
  const auto names = bundled_scenario_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    return parse_scenario(bundled_scenario_json(name_or_path));
  }
  throw ConfigError("'" + name_or_path + "' is neither a scenario file nor a bundled scenario");
}

LearnerState initial_learner(const Scenario& scenario) {
  ModelState model = make_prior_model(scenario.learner_structure, scenario.prior);
  if (scenario.query_vars.empty()) return make_learner(std::move(model));
  return make_learner(std::move(model), scenario.query_vars);
}

AttributeStats initial_attribute_stats(const Scenario& scenario, std::uint32_t n_min) {
  return make_attribute_stats(scenario.attributes,
                              scenario.learner_structure.with_role(Role::kOutcome), n_min,
                              scenario.attribute_targets);
}

RefinementConfig default_refinement(const Scenario& scenario) {
  RefinementConfig c;
  c.r_threshold = scenario.defaults.r_threshold;
  c.n_min = scenario.defaults.n_min;
  c.promoted_controllable = scenario.defaults.promoted_controllable;
  return c;
}

TrialResult run_trial(const Scenario& scenario, const TrialConfig& config) {
  TrialResult out;
  out.subject = scenario.subject;
  out.subject.seed = config.seed;
  if (auto c = config.random_truth ? config.random_truth : scenario.random_truth) {
    Rng truth_rng = make_stream(config.seed, Stream::kTruth);
    out.subject = randomize_truth(std::move(out.subject), truth_rng, *c);
  }
  SimulatedSubject subject(out.subject);

  LearnerState learner = initial_learner(scenario);
  learner.model.rng_seed = config.seed;
  LearnConfig lc;
  lc.max_iter = config.iters;
  lc.mode = config.mode;
  lc.seed = config.seed;
  lc.refinement = config.refinement;
  lc.refine = config.refine;

  const SubjectSpec& truth = subject.spec();
  out.run = learn_model(subject, std::move(learner),
                        initial_attribute_stats(scenario, config.refinement.n_min), lc,
                        [&truth](const ModelState& m) { return eval_kl(m, truth); });
  out.kl.push_back(*out.run.initial_kl);
  for (const auto& rec : out.run.trace) {
    if (rec.kl_to_truth) out.kl.push_back(*rec.kl_to_truth);
  }
  return out;
}

}  // namespace capex
