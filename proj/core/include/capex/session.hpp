#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "capex/errors.hpp"
#include "capex/learn_loop.hpp"
#include "capex/scoring.hpp"

namespace capex {

// Carries the HTTP status and a short machine-readable code.
class ApiError : public Error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : Error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

enum class SessionStatus { kReady, kAwaitingOutcome, kFinished };

std::string_view to_string(SessionStatus s);
SessionStatus session_status_from_string(std::string_view text);

// One interactive learn loop: at most one experiment in flight.
class Session {
 public:
  // `definition` is the POST /sessions body: either {"scenario": name|object}
  // or {"model": {variables, parents, prior?, query_vars?}}, plus optional
  // "reference", "fixed" and "config": {mode, seed, max_iter, r_threshold,
  // n_min, promoted_controllable, threshold}. Throws ApiError(422).
  static Session create(std::string id, const nlohmann::json& definition);
  static Session from_snapshot(const nlohmann::json& snapshot);
  nlohmann::json snapshot() const;

  const std::string& id() const { return id_; }
  SessionStatus status() const { return status_; }
  const Experimenter& engine() const { return engine_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }

  // Proposes the next experiment, or returns the pending one unchanged.
  // A redraw request while awaiting an outcome is a 409.
  nlohmann::json next_query(bool redraw);

  // Body: {"outcome": {...}, "situation": {uncontrolled vars}?, "attributes": {...}?}
  // Missing uncontrolled values fall back to the session's fixed values and
  // attributes to the requested ones. Nothing changes on error.
  nlohmann::json post_observation(const nlohmann::json& body);

  nlohmann::json state() const;
  nlohmann::json scores(std::optional<double> threshold) const;

 private:
  Session(std::string id, Experimenter engine) : id_(std::move(id)), engine_(std::move(engine)) {}

  std::string id_;
  std::string name_;
  Experimenter engine_;
  std::size_t max_iter_ = 0;  // 0: unbounded
  double threshold_ = 0.5;
  std::optional<ReferenceSpec> reference_;
  Instantiation fixed_;
  SessionStatus status_ = SessionStatus::kReady;
  std::optional<Proposal> pending_;
  std::vector<TraceRecord> trace_;
};

// Sessions keyed by id, each snapshotted to <data_dir>/<id>.json after
// every change. Distinct sessions proceed concurrently; requests on one
// session are serialised.
class SessionStore {
 public:
  // Creates data_dir if needed and recovers every snapshot in it. Throws
  // std::runtime_error if the directory is not writable.
  explicit SessionStore(std::filesystem::path data_dir);

  std::string create(const nlohmann::json& definition);
  nlohmann::json next_query(const std::string& id, bool redraw);
  nlohmann::json post_observation(const std::string& id, const nlohmann::json& body);
  nlohmann::json state(const std::string& id) const;
  nlohmann::json scores(const std::string& id, std::optional<double> threshold) const;

  std::vector<std::string> ids() const;
  const std::filesystem::path& data_dir() const { return dir_; }

 private:
  struct Entry {
    std::mutex mu;
    Session session;
  };
  Entry& entry(const std::string& id) const;
  void persist(const Session& s) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::unique_ptr<Entry>, std::less<>> sessions_;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// Transport-independent request router for the session endpoints:
//   POST /sessions, GET /sessions/{id}/next-query, POST /sessions/{id}/observations,
//   GET /sessions/{id}/state, GET /sessions/{id}/scores?threshold=, GET /healthz
// Errors come back as {code, message} with the matching status.
class SessionApi {
 public:
  explicit SessionApi(SessionStore& store) : store_(store) {}
  ApiResponse handle(std::string_view method, std::string_view path,
                     const std::map<std::string, std::string>& params, std::string_view body);

 private:
  SessionStore& store_;
};

// HTTP front end. bind() throws std::runtime_error when the port is taken.
class HttpServer {
 public:
  explicit HttpServer(SessionStore& store);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // port 0 picks a free port; returns the bound port.
  int bind(const std::string& host, int port);
  void run();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace capex
