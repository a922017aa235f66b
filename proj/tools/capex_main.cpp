// capex: batch simulation, active/passive comparison, scoring and the session server.

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

#include "capex/errors.hpp"
#include "capex/json_io.hpp"
#include "capex/scenario.hpp"
#include "capex/session.hpp"

namespace fs = std::filesystem;
using namespace capex;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct RunOptions {
  std::string scenario;
  std::string mode = "active";
  std::size_t iters = 150;
  std::uint64_t seed = 0;
  std::optional<double> r_threshold;
  std::optional<std::uint32_t> n_min;
  std::optional<double> random_truth;
  bool no_refine = false;
  std::string out_dir = ".";
  std::string trace_path;
  std::string jsonl_path;
  std::string model_path;
  std::string score_path;
  // compare only
  std::size_t seeds = 20;
  std::string prefix;
  std::size_t jobs = 0;
};

TrialConfig trial_config(const Scenario& sc, const RunOptions& o, QueryMode mode,
                         std::uint64_t seed) {
  TrialConfig c;
  c.mode = mode;
  c.iters = o.iters;
  c.seed = seed;
  c.refinement = default_refinement(sc);
  if (o.r_threshold) c.refinement.r_threshold = *o.r_threshold;
  if (o.n_min) c.refinement.n_min = *o.n_min;
  c.refinement.validate();
  c.refine = !o.no_refine;
  c.random_truth = o.random_truth;
  if (c.random_truth && !(*c.random_truth > 0.0)) {
    throw ConfigError("--random-truth must be positive");
  }
  return c;
}

fs::path pick(const std::string& given, const fs::path& dir, const std::string& name) {
  return given.empty() ? dir / name : fs::path(given);
}

std::string promotions_summary(const std::vector<TraceRecord>& trace) {
  std::string out;
  for (const auto& r : trace) {
    for (const auto& p : r.promoted) {
      if (!out.empty()) out += ',';
      out += p + "@" + std::to_string(r.iteration);
    }
  }
  return out.empty() ? "none" : out;
}

int cmd_simulate(const RunOptions& o) {
  const Scenario sc = load_scenario(o.scenario);
  const TrialConfig config = trial_config(sc, o, query_mode_from_string(o.mode), o.seed);

  const TrialResult trial = run_trial(sc, config);
  const fs::path dir(o.out_dir);
  const std::string stem = sc.name + "_" + o.mode + "_" + std::to_string(o.seed);
  fs::create_directories(dir);
  write_file_atomic(pick(o.trace_path, dir, stem + ".trace.csv"), trace_csv(trial.run.trace));
  write_file_atomic(pick(o.jsonl_path, dir, stem + ".trace.jsonl"), trace_jsonl(trial.run.trace));
  write_file_atomic(pick(o.model_path, dir, stem + ".model.json"),
                    json(trial.run.learner).dump(2) + "\n");
  std::string score_note;
  if (sc.reference) {
    try {
      const auto report =
          favourable_contexts(trial.run.learner.model, *sc.reference, sc.defaults.threshold);
      write_file_atomic(pick(o.score_path, dir, stem + ".scores.json"), json(report).dump(2) + "\n");
      score_note = " favourable=" + std::to_string(report.favourable.size()) + "/" +
                   std::to_string(report.rows.size());
    } catch (const ConfigError&) {
      // The reference no longer covers a refined model's commands.
      score_note = " favourable=n/a";
    }
  }

  std::cout << "scenario=" << sc.name << " mode=" << o.mode << " seed=" << o.seed
            << " iters=" << trial.run.trace.size()
            << " model_error=" << format_double(model_error(trial.run.learner))
            << " kl_to_truth=" << format_double(trial.kl.back())
            << " promoted=" << promotions_summary(trial.run.trace) << score_note << "\n";
  if (!trial.run.trace.empty() && trial.run.trace.back().error) {
    std::cerr << "subject failed: " << *trial.run.trace.back().error << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

struct Series {
  std::vector<double> mean, sd;
};

// Population mean and sd per column, so a single run gives sd exactly 0.
Series column_stats(const std::vector<std::vector<double>>& runs) {
  const std::size_t points = runs.front().size();
  Series s{std::vector<double>(points, 0.0), std::vector<double>(points, 0.0)};
  for (std::size_t i = 0; i < points; ++i) {
    for (const auto& r : runs) s.mean[i] += r[i];
    s.mean[i] /= double(runs.size());
    for (const auto& r : runs) s.sd[i] += (r[i] - s.mean[i]) * (r[i] - s.mean[i]);
    s.sd[i] = std::sqrt(s.sd[i] / double(runs.size()));
  }
  return s;
}

std::string curve_csv(const Series& kl, const Series& err) {
  std::string out = "iteration,mean_kl,sd_kl,mean_model_error,sd_model_error\n";
  for (std::size_t i = 0; i < kl.mean.size(); ++i) {
    out += std::to_string(i) + "," + format_double(kl.mean[i]) + "," + format_double(kl.sd[i]) + "," +
           format_double(err.mean[i]) + "," + format_double(err.sd[i]) + "\n";
  }
  return out;
}

int cmd_compare(const RunOptions& o) {
  if (o.seeds == 0) throw ConfigError("--seeds must be at least 1");
  const Scenario sc = load_scenario(o.scenario);
  const std::array<QueryMode, 2> modes{QueryMode::kActive, QueryMode::kPassive};
  std::vector<TrialConfig> configs;
  for (auto mode : modes) {
    for (std::size_t k = 0; k < o.seeds; ++k) configs.push_back(trial_config(sc, o, mode, o.seed + k));
  }

  std::vector<TrialResult> results(configs.size());
  std::vector<std::string> failures(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < configs.size();) {
      try {
        results[i] = run_trial(sc, configs[i]);
        if (!results[i].run.trace.empty() && results[i].run.trace.back().error) {
          failures[i] = *results[i].run.trace.back().error;
        }
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  const std::size_t jobs =
      std::max<std::size_t>(1, o.jobs ? o.jobs : std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(jobs, configs.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) {
      std::cerr << "seed " << configs[i].seed << " failed: " << failures[i] << "\n";
      return kExitRuntime;
    }
  }

  const double initial_error = model_error(initial_learner(sc));
  std::array<Series, 2> kl, err;
  for (std::size_t m = 0; m < 2; ++m) {
    std::vector<std::vector<double>> kls, errs;
    for (std::size_t k = 0; k < o.seeds; ++k) {
      const auto& r = results[m * o.seeds + k];
      kls.push_back(r.kl);
      std::vector<double> e{initial_error};
      for (const auto& rec : r.run.trace) e.push_back(rec.model_error);
      errs.push_back(std::move(e));
    }
    kl[m] = column_stats(kls);
    err[m] = column_stats(errs);
  }

  const fs::path dir(o.out_dir);
  const std::string prefix = o.prefix.empty() ? sc.name : o.prefix;
  fs::create_directories(dir);
  write_file_atomic(dir / (prefix + "_active_curve.csv"), curve_csv(kl[0], err[0]));
  write_file_atomic(dir / (prefix + "_passive_curve.csv"), curve_csv(kl[1], err[1]));

  const double active_final = kl[0].mean.back();
  const double passive_final = kl[1].mean.back();
  std::string reached = "never";
  for (std::size_t i = 0; i < kl[0].mean.size(); ++i) {
    if (kl[0].mean[i] <= passive_final) {
      reached = std::to_string(i);
      break;
    }
  }
  std::cout << "scenario=" << sc.name << " seeds=" << o.seeds << " iters=" << o.iters
            << " final_kl active=" << format_double(active_final) << "+-"
            << format_double(kl[0].sd.back()) << " passive=" << format_double(passive_final)
            << "+-" << format_double(kl[1].sd.back())
            << " active_dominated=" << (active_final <= passive_final ? "yes" : "no")
            << " active_reached_passive_final_at=" << reached << "\n";
  return kExitOk;
}

struct ScoreOptions {
  std::string model;
  std::string reference;
  std::optional<double> threshold;
  std::string out;
};

// A reference comes from a bundled scenario name, a scenario file or a bare
// reference file. The scenario's threshold is the default.
std::pair<ReferenceSpec, double> resolve_reference(const std::string& what) {
  if (fs::is_regular_file(what)) {
    const json j = read_json_file(what);
    if (j.contains("variables") && j.contains("truth_cpt")) {
      const Scenario sc = parse_scenario(j);
      if (!sc.reference) throw ConfigError("scenario '" + what + "' has no reference");
      return {*sc.reference, sc.defaults.threshold};
    }
    return {j.get<ReferenceSpec>(), 0.5};
  }
  const Scenario sc = load_scenario(what);
  if (!sc.reference) throw ConfigError("scenario '" + what + "' has no reference");
  return {*sc.reference, sc.defaults.threshold};
}

int cmd_score(const ScoreOptions& o) {
  json j = read_json_file(o.model);
  if (j.contains("learner")) j = j.at("learner");  // session snapshot
  const ModelState model = j.get<ModelState>();
  auto [ref, default_threshold] = resolve_reference(o.reference);
  ref.validate(model.structure);
  const ScoreReport report = favourable_contexts(model, ref, o.threshold.value_or(default_threshold));

  fs::path out = o.out;
  if (out.empty()) {
    out = fs::path(o.model);
    out.replace_extension(".scores.json");
  }
  write_file_atomic(out, json(report).dump(2) + "\n");
  std::cout << render_table(report);
  return kExitOk;
}

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
};

std::atomic<HttpServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (HttpServer* s = g_server.load()) s->stop();
}

int cmd_serve(const ServeOptions& o) {
  std::string dir = o.data_dir;
  if (dir.empty()) {
    const char* env = std::getenv("CAPEX_DATA_DIR");
    dir = env != nullptr && *env != '\0' ? env : "capex-data";
  }
  std::unique_ptr<SessionStore> store;
  try {
    store = std::make_unique<SessionStore>(dir);
  } catch (const std::exception& e) {
    std::cerr << "capex serve: " << e.what() << "\n";
    return kExitRuntime;
  }
  HttpServer server(*store);
  int port = 0;
  try {
    port = server.bind(o.host, o.port);
  } catch (const std::exception& e) {
    std::cerr << "capex serve: " << e.what() << "\n";
    return kExitRuntime;
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on " << o.host << ":" << port << ", data dir " << dir << ", "
            << store->ids().size() << " session(s) recovered" << std::endl;
  server.run();
  g_server = nullptr;
  return kExitOk;
}

void add_run_flags(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--scenario", o.scenario, "bundled scenario name or scenario file")->required();
  cmd->add_option("--iters", o.iters, "experiments per run");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--r-threshold", o.r_threshold, "promotion threshold on the MI coefficient");
  cmd->add_option("--n-min", o.n_min, "observations an attribute value needs in a situation");
  cmd->add_option("--random-truth", o.random_truth,
                  "draw truth rows from a symmetric Dirichlet with this concentration");
  cmd->add_flag("--no-refine", o.no_refine, "never promote attributes");
  cmd->add_option("--out-dir", o.out_dir, "directory for default output paths");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn and score capability models of black-box subjects"};
  app.require_subcommand(1);

  RunOptions sim;
  auto* simulate = app.add_subcommand("simulate", "run one simulated learning trial");
  add_run_flags(simulate, sim);
  simulate->add_option("--mode", sim.mode, "active or passive");
  simulate->add_option("--trace", sim.trace_path, "trace CSV path");
  simulate->add_option("--jsonl", sim.jsonl_path, "trace JSON-lines path");
  simulate->add_option("--model", sim.model_path, "final learner JSON path");
  simulate->add_option("--scores", sim.score_path, "score report path (scenarios with a reference)");

  RunOptions cmp;
  cmp.seed = 1;
  auto* compare = app.add_subcommand("compare", "active vs passive over several seeds");
  add_run_flags(compare, cmp);
  compare->add_option("--seeds", cmp.seeds, "number of seeds, starting at --seed");
  compare->add_option("--prefix", cmp.prefix, "curve file prefix (default: scenario name)");
  compare->add_option("--jobs", cmp.jobs, "worker threads (default: all cores)");

  ScoreOptions sco;
  auto* score = app.add_subcommand("score", "score every context of a learned model");
  score->add_option("--model", sco.model, "model, learner or session snapshot JSON")->required();
  score->add_option("--reference", sco.reference,
                    "bundled scenario name, scenario file or reference file")
      ->required();
  score->add_option("--threshold", sco.threshold, "favourable if score exceeds this");
  score->add_option("--out", sco.out, "report JSON path (default: next to the model)");

  ServeOptions srv;
  auto* serve = app.add_subcommand("serve", "serve the session API");
  serve->add_option("--host", srv.host, "listen address");
  serve->add_option("--port", srv.port, "listen port (0 picks one)");
  serve->add_option("--data-dir", srv.data_dir, "session snapshots (default: $CAPEX_DATA_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*compare) return cmd_compare(cmp);
    if (*score) return cmd_score(sco);
    if (*serve) return cmd_serve(srv);
  } catch (const Error& e) {
    std::cerr << "capex: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "capex: malformed input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "capex: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
