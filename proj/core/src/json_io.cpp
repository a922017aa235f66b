#include "capex/json_io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "capex/errors.hpp"

namespace capex {

namespace {

template <typename T>
std::map<std::string, T, std::less<>> object_to_map(const json& j) {
  std::map<std::string, T, std::less<>> out;
  for (const auto& [k, v] : j.items()) out.emplace(k, v.template get<T>());
  return out;
}

template <typename Map>
json map_to_object(const Map& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

json optional_double(std::optional<double> x) {
  if (!x || !std::isfinite(*x)) return nullptr;
  return *x;
}

}  // namespace

void to_json(json& j, const Instantiation& inst) {
  j = json::object();
  for (const auto& [k, v] : inst) j[k] = v;
}

void from_json(const json& j, Instantiation& inst) {
  if (!j.is_object()) throw ConfigError("instantiation must be a JSON object");
  Instantiation out;
  for (const auto& [k, v] : j.items()) out.set(k, v.get<std::string>());
  inst = std::move(out);
}

void to_json(json& j, const VariableSpec& v) {
  j = json{{"name", v.name},
           {"domain", v.domain},
           {"role", std::string(to_string(v.role))},
           {"controllable", v.controllable}};
}

void from_json(const json& j, VariableSpec& v) {
  v.name = j.at("name").get<std::string>();
  v.domain = j.at("domain").get<std::vector<std::string>>();
  v.role = role_from_string(j.at("role").get<std::string>());
  v.controllable = j.value("controllable", v.role == Role::kCommand);
}

void to_json(json& j, const NetworkStructure& s) {
  j = json{{"variables", s.nodes}, {"parents", map_to_object(s.parents)}};
}

void from_json(const json& j, NetworkStructure& s) {
  s.nodes = j.at("variables").get<std::vector<VariableSpec>>();
  s.parents = object_to_map<std::vector<std::string>>(j.at("parents"));
}

void to_json(json& j, const ModelState& m) {
  to_json(j, m.structure);
  json rows = json::object();
  for (const auto& [name, cpt] : m.cpts) rows[name] = cpt.rows;
  j["cpt_rows"] = rows;
  j["situation_weights"] = map_to_object(m.situation_weights);
  j["prior"] = m.prior;
  j["rng_seed"] = m.rng_seed;
}

void from_json(const json& j, ModelState& m) {
  from_json(j, m.structure);
  m.structure.validate();
  m.prior = j.value("prior", 1.0);
  m.rng_seed = j.value("rng_seed", std::uint64_t{0});
  m.cpts.clear();
  for (const auto& [name, rows] : j.at("cpt_rows").items()) {
    DirichletCPT cpt;
    cpt.outcome_var = name;
    for (const auto& row : rows) {
      std::vector<double> alpha;
      for (const auto& a : row) {
        // Decimal strings are accepted for hand-written models.
        alpha.push_back(a.is_string() ? std::stod(a.get<std::string>()) : a.get<double>());
      }
      cpt.rows.push_back(std::move(alpha));
    }
    m.cpts.emplace(name, std::move(cpt));
  }
  if (j.contains("situation_weights")) {
    m.situation_weights = object_to_map<std::vector<double>>(j.at("situation_weights"));
  } else {
    m.situation_weights.clear();
    for (const auto& o : m.structure.outcome_names()) {
      const std::size_t n = m.structure.row_count(o);
      m.situation_weights[o] = std::vector<double>(n, 1.0 / double(n));
    }
  }
  m.validate();
}

void to_json(json& j, const ObservationRecord& r) {
  j = json{{"situation", r.situation}, {"outcome", r.outcome}, {"attributes", r.attributes}};
}

void from_json(const json& j, ObservationRecord& r) {
  r.situation = j.at("situation").get<Instantiation>();
  r.outcome = j.at("outcome").get<Instantiation>();
  r.attributes = j.value("attributes", Instantiation{});
}

void to_json(json& j, const LearnerState& s) {
  to_json(j, s.model);
  j["query_vars"] = s.query_vars;
  json unc = json::object();
  for (const auto& [name, dist] : s.uncontrolled_dist) {
    unc[name] = json{{"dist", dist}, {"counts", s.uncontrolled_counts.at(name)}};
  }
  j["uncontrolled"] = unc;
  j["history"] = s.history;
}

void from_json(const json& j, LearnerState& s) {
  ModelState model = j.get<ModelState>();
  if (j.contains("query_vars")) {
    s = make_learner(std::move(model), j.at("query_vars").get<std::vector<std::string>>());
  } else {
    s = make_learner(std::move(model));
  }
  if (j.contains("uncontrolled")) {
    for (const auto& [name, entry] : j.at("uncontrolled").items()) {
      if (!s.uncontrolled_dist.contains(name)) {
        throw ConfigError("'" + name + "' is not an uncontrolled situation variable");
      }
      s.uncontrolled_dist[name] = entry.at("dist").get<std::vector<double>>();
      s.uncontrolled_counts[name] = entry.at("counts").get<std::vector<double>>();
    }
  }
  s.history = j.value("history", std::vector<ObservationRecord>{});
  s.validate();
}

void to_json(json& j, const AttributeStats& s) {
  json situations = json::array();
  for (const auto& [key, sc] : s.situations) {
    json cells = json::object();
    for (const auto& [attr, per_value] : sc.cells) {
      json values = json::array();
      for (const auto& by_outcome : per_value) values.push_back(map_to_object(by_outcome));
      cells[attr] = values;
    }
    situations.push_back(json{{"situation", sc.situation},
                              {"observations", sc.observations},
                              {"outcome_counts", map_to_object(sc.outcome_counts)},
                              {"attribute_counts", map_to_object(sc.attribute_counts)},
                              {"cells", cells}});
  }
  j = json{{"attributes", s.attributes},
           {"outcomes", s.outcomes},
           {"targets", map_to_object(s.targets)},
           {"n_min", s.n_min},
           {"attr_marginals", map_to_object(s.attr_marginals)},
           {"situations", situations}};
}

void from_json(const json& j, AttributeStats& s) {
  s = make_attribute_stats(j.at("attributes").get<std::vector<VariableSpec>>(),
                           j.at("outcomes").get<std::vector<VariableSpec>>(),
                           j.at("n_min").get<std::uint32_t>(),
                           object_to_map<std::vector<std::string>>(j.value("targets", json::object())));
  s.attr_marginals = object_to_map<Counts>(j.at("attr_marginals"));
  for (const auto& entry : j.at("situations")) {
    SituationCounts sc;
    sc.situation = entry.at("situation").get<Instantiation>();
    sc.observations = entry.at("observations").get<std::uint64_t>();
    sc.outcome_counts = object_to_map<Counts>(entry.at("outcome_counts"));
    sc.attribute_counts = object_to_map<Counts>(entry.at("attribute_counts"));
    for (const auto& [attr, values] : entry.at("cells").items()) {
      auto& per_value = sc.cells[attr];
      for (const auto& by_outcome : values) per_value.push_back(object_to_map<Counts>(by_outcome));
    }
    const std::string key = sc.situation.key();
    s.situations.emplace(key, std::move(sc));
  }
}

void to_json(json& j, const RefinementConfig& c) {
  j = json{{"r_threshold", c.r_threshold},
           {"n_min", c.n_min},
           {"promoted_controllable", c.promoted_controllable}};
}

void from_json(const json& j, RefinementConfig& c) {
  RefinementConfig d;
  c.r_threshold = j.value("r_threshold", d.r_threshold);
  c.n_min = j.value("n_min", d.n_min);
  c.promoted_controllable = j.value("promoted_controllable", d.promoted_controllable);
  c.validate();
}

void to_json(json& j, const ReferenceSpec& r) {
  j = json::object();
  for (const auto& [outcome, rule] : r.outcomes) {
    switch (rule.kind) {
      case ReferenceRule::Kind::kEqualsCommand:
        j[outcome] = json{{"rule", "equals_command"}, {"command", rule.command_var}};
        break;
      case ReferenceRule::Kind::kPointMass:
        j[outcome] = json{{"rule", "point_mass"}, {"value", rule.value}};
        break;
      case ReferenceRule::Kind::kTable:
        j[outcome] = json{{"table", rule.table}};
        break;
    }
  }
}

void from_json(const json& j, ReferenceSpec& r) {
  r.outcomes.clear();
  for (const auto& [outcome, entry] : j.items()) {
    ReferenceRule rule;
    if (entry.contains("table")) {
      rule.kind = ReferenceRule::Kind::kTable;
      rule.table = entry.at("table").get<std::map<std::string, std::vector<double>>>();
    } else {
      const auto kind = entry.at("rule").get<std::string>();
      if (kind == "equals_command") {
        rule.kind = ReferenceRule::Kind::kEqualsCommand;
        rule.command_var = entry.at("command").get<std::string>();
      } else if (kind == "point_mass") {
        rule.kind = ReferenceRule::Kind::kPointMass;
        rule.value = entry.at("value").get<std::string>();
      } else {
        throw ConfigError("unknown reference rule '" + kind + "'");
      }
    }
    r.outcomes.emplace(outcome, std::move(rule));
  }
}

void to_json(json& j, const ScoreReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back(json{{"context", row.context},
                        {"mismatch", optional_double(row.mismatch)},
                        {"score", row.score},
                        {"favourable", row.favourable}});
  }
  j = json{{"threshold", r.threshold}, {"rows", rows}, {"favourable", r.favourable}};
}

void to_json(json& j, const TraceRecord& r) {
  j = json{{"iteration", r.iteration},
           {"mode", std::string(to_string(r.mode))},
           {"query", r.query},
           {"situation", r.situation},
           {"attributes", r.attributes},
           {"outcome", r.outcome},
           {"model_error", r.model_error},
           {"kl_to_truth", optional_double(r.kl_to_truth)},
           {"promoted_vars", r.promoted}};
  if (r.error) j["error"] = *r.error;
}

void from_json(const json& j, TraceRecord& r) {
  r.iteration = j.at("iteration").get<std::size_t>();
  r.mode = query_mode_from_string(j.at("mode").get<std::string>());
  r.query = j.at("query").get<Instantiation>();
  r.situation = j.at("situation").get<Instantiation>();
  r.attributes = j.at("attributes").get<Instantiation>();
  r.outcome = j.at("outcome").get<Instantiation>();
  r.model_error = j.at("model_error").get<double>();
  r.kl_to_truth.reset();
  if (const auto& kl = j.at("kl_to_truth"); !kl.is_null()) r.kl_to_truth = kl.get<double>();
  r.promoted = j.at("promoted_vars").get<std::vector<std::string>>();
  r.error.reset();
  if (j.contains("error")) r.error = j.at("error").get<std::string>();
}

void to_json(json& j, const Proposal& p) {
  j = json{{"iteration", p.iteration},
           {"query", p.query},
           {"attributes", p.attributes},
           {"epe", p.epe},
           {"model_error", p.model_error}};
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

namespace {

// Keys contain ';' and '=', never ',' or quotes, so fields need no quoting
// unless a value itself carries a comma.
std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string trace_csv_header() {
  return "iteration,mode,query,situation,attributes,outcome,model_error,kl_to_truth,promoted_vars";
}

std::string trace_csv_row(const TraceRecord& r) {
  std::string promoted;
  for (const auto& p : r.promoted) {
    if (!promoted.empty()) promoted += ';';
    promoted += p;
  }
  std::string line = std::to_string(r.iteration);
  line += "," + std::string(to_string(r.mode));
  line += "," + csv_field(r.query.key());
  line += "," + csv_field(r.situation.key());
  line += "," + csv_field(r.attributes.key());
  line += "," + csv_field(r.outcome.key());
  line += "," + format_double(r.model_error);
  line += "," + (r.kl_to_truth ? format_double(*r.kl_to_truth) : std::string());
  line += "," + csv_field(promoted);
  return line;
}

std::string trace_csv(std::span<const TraceRecord> trace) {
  std::string out = trace_csv_header() + "\n";
  for (const auto& r : trace) out += trace_csv_row(r) + "\n";
  return out;
}

std::string trace_jsonl(std::span<const TraceRecord> trace) {
  std::string out;
  for (const auto& r : trace) out += json(r).dump() + "\n";
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) {
    throw std::system_error(errno, std::generic_category(), "cannot write '" + tmp + "'");
  }
  std::size_t written = 0;
  while (written < contents.size()) {
    const ssize_t n = ::write(fd, contents.data() + written, contents.size() - written);
    if (n < 0) {
      const int err = errno;
      ::close(fd);
      ::unlink(tmp.c_str());
      throw std::system_error(err, std::generic_category(), "write to '" + tmp + "' failed");
    }
    written += std::size_t(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    const int err = errno;
    ::unlink(tmp.c_str());
    throw std::system_error(err, std::generic_category(), "cannot flush '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    ::unlink(tmp.c_str());
    throw std::system_error(ec, "cannot rename into '" + path.string() + "'");
  }
  // Make the rename itself durable.
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  if (const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY); dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

}  // namespace capex
