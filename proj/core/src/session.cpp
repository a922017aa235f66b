#include "capex/session.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "capex/json_io.hpp"
#include "capex/scenario.hpp"

namespace capex {

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::kReady:
      return "ready";
    case SessionStatus::kAwaitingOutcome:
      return "awaiting_outcome";
    case SessionStatus::kFinished:
      return "finished";
  }
  return "ready";
}

SessionStatus session_status_from_string(std::string_view text) {
  if (text == "ready") return SessionStatus::kReady;
  if (text == "awaiting_outcome") return SessionStatus::kAwaitingOutcome;
  if (text == "finished") return SessionStatus::kFinished;
  throw ConfigError("unknown session status '" + std::string(text) + "'");
}

namespace {

ApiError invalid(const std::string& message) { return ApiError(422, "invalid", message); }

Proposal proposal_from_json(const json& j) {
  Proposal p;
  p.iteration = j.at("iteration").get<std::size_t>();
  p.query = j.at("query").get<Instantiation>();
  p.attributes = j.at("attributes").get<Instantiation>();
  p.epe = j.at("epe").get<double>();
  p.model_error = j.at("model_error").get<double>();
  return p;
}

// Learner side of a definition that names or embeds a scenario.
struct Definition {
  std::string name;
  LearnerState learner;
  AttributeStats stats;
  RefinementConfig refinement;
  double threshold = 0.5;
  std::optional<ReferenceSpec> reference;
  Instantiation fixed;
};

Definition from_scenario(const json& j) {
  Scenario sc;
  if (j.is_string()) {
    const auto names = bundled_scenario_names();
    const auto name = j.get<std::string>();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw invalid("no bundled scenario '" + name + "'");
    }
    sc = parse_scenario(bundled_scenario_json(name));
  } else {
    sc = parse_scenario(j);
  }
  Definition d;
  d.name = sc.name;
  d.refinement = default_refinement(sc);
  d.learner = initial_learner(sc);
  d.stats = initial_attribute_stats(sc, d.refinement.n_min);
  d.threshold = sc.defaults.threshold;
  d.reference = sc.reference;
  for (const auto& v : d.learner.uncontrolled_specs()) {
    if (auto f = sc.subject.fixed.get(v.name)) d.fixed.set(v.name, *f);
  }
  return d;
}

Definition from_model(const json& j) {
  Definition d;
  d.name = j.value("name", std::string("model"));
  NetworkStructure structure;
  std::vector<VariableSpec> attributes;
  for (const auto& v : j.at("variables")) {
    VariableSpec spec = v.get<VariableSpec>();
    spec.validate();
    if (spec.role == Role::kAttribute) {
      attributes.push_back(std::move(spec));
    } else {
      structure.nodes.push_back(std::move(spec));
    }
  }
  structure.parents =
      j.at("parents").get<std::map<std::string, std::vector<std::string>, std::less<>>>();
  structure.validate();
  ModelState model = make_prior_model(std::move(structure), j.value("prior", 1.0));
  d.learner = j.contains("query_vars")
                  ? make_learner(std::move(model), j.at("query_vars").get<std::vector<std::string>>())
                  : make_learner(std::move(model));
  d.stats = make_attribute_stats(
      std::move(attributes), d.learner.model.structure.with_role(Role::kOutcome), d.refinement.n_min,
      j.value("attribute_targets", std::map<std::string, std::vector<std::string>, std::less<>>{}));
  return d;
}

}  // namespace

Session Session::create(std::string id, const json& definition) {
  try {
    if (!definition.is_object()) throw invalid("session definition must be a JSON object");
    Definition d;
    if (definition.contains("scenario")) {
      d = from_scenario(definition.at("scenario"));
    } else if (definition.contains("model")) {
      d = from_model(definition.at("model"));
    } else {
      throw invalid("session definition needs 'scenario' or 'model'");
    }
    if (definition.contains("reference")) d.reference = definition.at("reference").get<ReferenceSpec>();
    if (definition.contains("fixed")) d.fixed = definition.at("fixed").get<Instantiation>();

    const json config = definition.value("config", json::object());
    LearnConfig lc;
    lc.mode = query_mode_from_string(config.value("mode", std::string("active")));
    lc.seed = config.value("seed", std::uint64_t{0});
    lc.refine = config.value("refine", true);
    lc.refinement = d.refinement;
    lc.refinement.r_threshold = config.value("r_threshold", lc.refinement.r_threshold);
    lc.refinement.n_min = config.value("n_min", lc.refinement.n_min);
    lc.refinement.promoted_controllable =
        config.value("promoted_controllable", lc.refinement.promoted_controllable);
    lc.refinement.validate();
    d.stats.n_min = lc.refinement.n_min;

    const double threshold = config.value("threshold", d.threshold);
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw invalid("threshold must lie in [0, 1]");
    if (d.reference) d.reference->validate(d.learner.model.structure);
    validate_instantiation(d.fixed, d.learner.uncontrolled_specs(), /*require_all=*/false);

    d.learner.model.rng_seed = lc.seed;
    Session s(std::move(id), Experimenter(std::move(d.learner), std::move(d.stats), lc));
    s.name_ = std::move(d.name);
    s.max_iter_ = config.value("max_iter", std::size_t{0});
    s.threshold_ = threshold;
    s.reference_ = std::move(d.reference);
    s.fixed_ = std::move(d.fixed);
    return s;
  } catch (const ApiError&) {
    throw;
  } catch (const json::exception& e) {
    throw invalid(std::string("malformed definition: ") + e.what());
  } catch (const Error& e) {
    throw invalid(e.what());
  }
}

json Session::snapshot() const {
  const LearnConfig& c = engine_.config();
  json j{{"id", id_},
         {"name", name_},
         {"status", std::string(to_string(status_))},
         {"config",
          {{"mode", std::string(to_string(c.mode))},
           {"seed", c.seed},
           {"refine", c.refine},
           {"max_iter", max_iter_},
           {"refinement", c.refinement}}},
         {"threshold", threshold_},
         {"fixed", fixed_},
         {"iteration", engine_.iteration()},
         {"learner", engine_.learner()},
         {"stats", engine_.stats()},
         {"rng", {{"query", serialize_rng(engine_.query_rng())},
                  {"attributes", serialize_rng(engine_.attribute_rng())}}},
         {"trace", trace_}};
  j["reference"] = reference_ ? json(*reference_) : json(nullptr);
  j["pending"] = pending_ ? json(*pending_) : json(nullptr);
  return j;
}

Session Session::from_snapshot(const json& j) {
  const json& c = j.at("config");
  LearnConfig lc;
  lc.mode = query_mode_from_string(c.at("mode").get<std::string>());
  lc.seed = c.at("seed").get<std::uint64_t>();
  lc.refine = c.value("refine", true);
  lc.refinement = c.at("refinement").get<RefinementConfig>();
  Session s(j.at("id").get<std::string>(),
            Experimenter::restore(j.at("learner").get<LearnerState>(),
                                  j.at("stats").get<AttributeStats>(), lc,
                                  j.at("iteration").get<std::size_t>(),
                                  deserialize_rng(j.at("rng").at("query").get<std::string>()),
                                  deserialize_rng(j.at("rng").at("attributes").get<std::string>())));
  s.name_ = j.value("name", std::string());
  s.max_iter_ = c.value("max_iter", std::size_t{0});
  s.threshold_ = j.at("threshold").get<double>();
  s.fixed_ = j.at("fixed").get<Instantiation>();
  s.status_ = session_status_from_string(j.at("status").get<std::string>());
  if (!j.at("reference").is_null()) s.reference_ = j.at("reference").get<ReferenceSpec>();
  if (!j.at("pending").is_null()) s.pending_ = proposal_from_json(j.at("pending"));
  s.trace_ = j.at("trace").get<std::vector<TraceRecord>>();
  return s;
}

json Session::next_query(bool redraw) {
  if (status_ == SessionStatus::kFinished) {
    throw ApiError(409, "finished", "session has run its experiment budget");
  }
  if (status_ == SessionStatus::kAwaitingOutcome) {
    if (redraw) {
      throw ApiError(409, "awaiting_outcome",
                     "an experiment is pending; post its outcome before drawing another");
    }
  } else {
    pending_ = engine_.propose();
    status_ = SessionStatus::kAwaitingOutcome;
  }
  json j = *pending_;
  j["status"] = std::string(to_string(status_));
  j["environment"] = engine_.learner().uncontrolled_specs();
  return j;
}

json Session::post_observation(const json& body) {
  if (status_ != SessionStatus::kAwaitingOutcome) {
    throw ApiError(409, "not_awaiting_outcome",
                   "no experiment is pending; request one from next-query first");
  }
  try {
    if (!body.is_object() || !body.contains("outcome")) {
      throw invalid("observation needs an 'outcome' object");
    }
    const auto outcome = body.at("outcome").get<Instantiation>();
    const auto reported = body.value("situation", Instantiation{});

    Instantiation situation = pending_->query;
    for (const auto& [name, value] : reported) {
      if (auto q = situation.get(name)) {
        if (*q != value) throw invalid("situation contradicts the query on '" + name + "'");
      }
    }
    for (const auto& v : engine_.learner().uncontrolled_specs()) {
      if (auto r = reported.get(v.name)) {
        situation.set(v.name, *r);
      } else if (auto f = fixed_.get(v.name)) {
        situation.set(v.name, *f);
      } else {
        throw invalid("the value of uncontrolled variable '" + v.name + "' must be reported");
      }
    }
    for (const auto& [name, _] : reported) {
      if (!situation.contains(name)) throw invalid("'" + name + "' is not a situation variable");
    }
    Instantiation attributes = pending_->attributes;
    for (const auto& [name, value] : body.value("attributes", Instantiation{})) {
      if (!attributes.contains(name)) throw invalid("'" + name + "' is not a tracked attribute");
      attributes.set(name, value);
    }
    validate_instantiation(outcome, engine_.learner().model.structure.with_role(Role::kOutcome),
                           /*require_all=*/true);

    TraceRecord rec = engine_.observe(*pending_, situation, outcome, attributes);
    trace_.push_back(rec);
    pending_.reset();
    status_ = (max_iter_ > 0 && engine_.iteration() >= max_iter_) ? SessionStatus::kFinished
                                                                   : SessionStatus::kReady;
    return json{{"iteration", engine_.iteration()},
                {"model_error", rec.model_error},
                {"promoted", rec.promoted},
                {"query_vars", engine_.learner().query_vars},
                {"status", std::string(to_string(status_))},
                {"record", rec}};
  } catch (const ApiError&) {
    throw;
  } catch (const json::exception& e) {
    throw invalid(std::string("malformed observation: ") + e.what());
  } catch (const Error& e) {
    throw invalid(e.what());
  }
}

json Session::state() const {
  json j{{"id", id_},
         {"name", name_},
         {"status", std::string(to_string(status_))},
         {"iteration", engine_.iteration()},
         {"model_error", model_error(engine_.learner())},
         {"learner", engine_.learner()},
         {"attributes", engine_.stats().attributes},
         {"trace", trace_}};
  j["pending"] = pending_ ? json(*pending_) : json(nullptr);
  j["scores"] = reference_ ? json(scores(std::nullopt)) : json(nullptr);
  return j;
}

json Session::scores(std::optional<double> threshold) const {
  if (!reference_) throw ApiError(422, "no_reference", "session has no reference attached");
  const double t = threshold.value_or(threshold_);
  if (!(t >= 0.0 && t <= 1.0)) throw invalid("threshold must lie in [0, 1]");
  try {
    return favourable_contexts(engine_.learner().model, *reference_, t);
  } catch (const Error& e) {
    // A promotion can add contexts the reference does not cover.
    throw invalid(e.what());
  }
}

SessionStore::SessionStore(std::filesystem::path data_dir) : dir_(std::move(data_dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw std::runtime_error("cannot create data dir '" + dir_.string() + "': " + ec.message());
  const auto probe = dir_ / ".write-probe";
  try {
    write_file_atomic(probe, "ok");
  } catch (const std::exception& e) {
    throw std::runtime_error("data dir '" + dir_.string() + "' is not writable: " + e.what());
  }
  std::filesystem::remove(probe, ec);

  for (const auto& f : std::filesystem::directory_iterator(dir_)) {
    if (!f.is_regular_file() || f.path().extension() != ".json") continue;
    Session s = Session::from_snapshot(read_json_file(f.path()));
    const std::string id = s.id();
    sessions_.emplace(id, std::unique_ptr<Entry>(new Entry{{}, std::move(s)}));
  }
}

SessionStore::Entry& SessionStore::entry(const std::string& id) const {
  std::shared_lock lock(map_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, "not_found", "no session '" + id + "'");
  return *it->second;
}

void SessionStore::persist(const Session& s) const {
  write_file_atomic(dir_ / (s.id() + ".json"), s.snapshot().dump());
}

std::string SessionStore::create(const json& definition) {
  static thread_local std::mt19937_64 ids{std::random_device{}()};
  std::string id;
  {
    std::shared_lock lock(map_mu_);
    do {
      std::ostringstream out;
      out << std::hex << ids();
      id = out.str();
    } while (sessions_.contains(id));
  }
  Session s = Session::create(id, definition);
  persist(s);
  std::unique_lock lock(map_mu_);
  sessions_.emplace(id, std::unique_ptr<Entry>(new Entry{{}, std::move(s)}));
  return id;
}

json SessionStore::next_query(const std::string& id, bool redraw) {
  Entry& e = entry(id);
  std::lock_guard lock(e.mu);
  Session copy = e.session;
  json out = copy.next_query(redraw);
  persist(copy);
  e.session = std::move(copy);
  return out;
}

json SessionStore::post_observation(const std::string& id, const json& body) {
  Entry& e = entry(id);
  std::lock_guard lock(e.mu);
  Session copy = e.session;
  json out = copy.post_observation(body);
  persist(copy);
  e.session = std::move(copy);
  return out;
}

json SessionStore::state(const std::string& id) const {
  Entry& e = entry(id);
  std::lock_guard lock(e.mu);
  return e.session.state();
}

json SessionStore::scores(const std::string& id, std::optional<double> threshold) const {
  Entry& e = entry(id);
  std::lock_guard lock(e.mu);
  return e.session.scores(threshold);
}

std::vector<std::string> SessionStore::ids() const {
  std::shared_lock lock(map_mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

namespace {

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    if (path.front() == '/') {
      path.remove_prefix(1);
      continue;
    }
    auto slash = path.find('/');
    parts.push_back(path.substr(0, slash));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash);
  }
  return parts;
}

json error_body(const std::string& code, const std::string& message) {
  return json{{"code", code}, {"message", message}};
}

json parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ApiError(400, "bad_json", std::string("request body is not JSON: ") + e.what());
  }
}

bool truthy(const std::string& v) { return v == "1" || v == "true" || v == "yes"; }

}  // namespace

ApiResponse SessionApi::handle(std::string_view method, std::string_view path,
                               const std::map<std::string, std::string>& params,
                               std::string_view body) {
  try {
    const auto parts = split_path(path);
    if (method == "GET" && parts.size() == 1 && parts[0] == "healthz") {
      return {200, json{{"status", "ok"}}};
    }
    if (parts.empty() || parts[0] != "sessions") {
      throw ApiError(404, "not_found", "no route for " + std::string(path));
    }
    if (parts.size() == 1) {
      if (method != "POST") throw ApiError(405, "method_not_allowed", "use POST /sessions");
      const std::string id = store_.create(parse_body(body));
      json out = store_.state(id);
      return {201, json{{"id", id}, {"status", out["status"]}, {"model_error", out["model_error"]},
                        {"learner", out["learner"]}}};
    }
    const std::string id(parts[1]);
    if (parts.size() == 3) {
      const std::string_view action = parts[2];
      if (action == "next-query" && method == "GET") {
        bool redraw = false;
        if (auto it = params.find("redraw"); it != params.end()) redraw = truthy(it->second);
        const json b = parse_body(body);
        if (b.is_object() && b.value("redraw", false)) redraw = true;
        return {200, store_.next_query(id, redraw)};
      }
      if (action == "observations" && method == "POST") {
        return {200, store_.post_observation(id, parse_body(body))};
      }
      if (action == "state" && method == "GET") return {200, store_.state(id)};
      if (action == "scores" && method == "GET") {
        std::optional<double> threshold;
        if (auto it = params.find("threshold"); it != params.end()) {
          try {
            std::size_t used = 0;
            threshold = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing text");
          } catch (const std::exception&) {
            throw ApiError(422, "invalid", "threshold must be a number");
          }
        }
        return {200, store_.scores(id, threshold)};
      }
    }
    throw ApiError(404, "not_found", "no route for " + std::string(method) + " " + std::string(path));
  } catch (const ApiError& e) {
    return {e.status(), error_body(e.code(), e.what())};
  } catch (const std::exception& e) {
    return {500, error_body("internal", e.what())};
  }
}

}  // namespace capex
