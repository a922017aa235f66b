#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <thread>

#include <unistd.h>

#include "capex/session.hpp"

using namespace capex;
using nlohmann::json;

namespace {

struct Running {
  SessionStore store;
  HttpServer server;
  int port = 0;
  std::thread thread;

  explicit Running(const std::filesystem::path& dir) : store(dir), server(store) {
    port = server.bind("127.0.0.1", 0);
    thread = std::thread([this] { server.run(); });
  }
  ~Running() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_SUITE("http") {
  TEST_CASE("session round trip over http") {
    const auto dir = std::filesystem::temp_directory_path() / ("capex_http_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::string id;
    {
      Running srv(dir);
      httplib::Client cli("127.0.0.1", srv.port);
      cli.set_connection_timeout(5);

      auto health = cli.Get("/healthz");
      REQUIRE(health);
      CHECK(health->status == 200);
      CHECK(json::parse(health->body)["status"] == "ok");

      auto created = cli.Post("/sessions", R"({"scenario": "ballkick_basic", "config": {"seed": 3}})",
                              "application/json");
      REQUIRE(created);
      CHECK(created->status == 201);
      id = json::parse(created->body)["id"];

      auto q = cli.Get("/sessions/" + id + "/next-query");
      REQUIRE(q);
      CHECK(q->status == 200);
      const auto proposal = json::parse(q->body);
      CHECK(proposal.contains("query"));
      CHECK(proposal.contains("epe"));

      auto again = cli.Get("/sessions/" + id + "/next-query?redraw=1");
      REQUIRE(again);
      CHECK(again->status == 409);

      auto bad = cli.Post("/sessions/" + id + "/observations", R"({"outcome": {"KDo": "Up"}})", "application/json");
      REQUIRE(bad);
      CHECK(bad->status == 422);

      auto ok = cli.Post("/sessions/" + id + "/observations", R"({"outcome": {"KDo": "Left"}})", "application/json");
      REQUIRE(ok);
      CHECK(ok->status == 200);
      CHECK(json::parse(ok->body)["iteration"] == 1);

      auto scores = cli.Get("/sessions/" + id + "/scores?threshold=0.2");
      REQUIRE(scores);
      CHECK(scores->status == 200);
      CHECK(json::parse(scores->body)["threshold"] == 0.2);

      auto missing = cli.Get("/sessions/nope/state");
      REQUIRE(missing);
      CHECK(missing->status == 404);

      // A second server cannot take the same port.
      SessionStore other(dir / "other");
      HttpServer clash(other);
      CHECK_THROWS_AS(clash.bind("127.0.0.1", srv.port), std::runtime_error);
    }
    // Restart: the session comes back from disk.
    {
      Running srv(dir);
      httplib::Client cli("127.0.0.1", srv.port);
      auto st = cli.Get("/sessions/" + id + "/state");
      REQUIRE(st);
      CHECK(st->status == 200);
      CHECK(json::parse(st->body)["iteration"] == 1);
    }
    std::filesystem::remove_all(dir);
  }
}
