#include <doctest.h>

#include <thread>

// Eigen must precede httplib (see server.cpp).
#include "autows/bench.hpp"
#include "synth.hpp"

#include <httplib.h>

using namespace autows;
using namespace autows::bench;
using namespace autows::testing;
using nlohmann::json;

namespace {

RunConfig serve_config(const TempDir& dir) {
  BundleSpec spec;
  spec.train = blobs(200, 4, 2, 3.0, 1.0, 70);
  spec.val = blobs(80, 4, 2, 3.0, 1.0, 71);
  RunConfig c;
  c.manifest = write_bundle(dir.path() / "data", spec);
  c.output_dir = dir.path() / "out";
  c.method = Method::iws_interactive;
  c.seed = 3;
  return c;
}

// Runs a SessionServer on a free port for the lifetime of the object.
class LiveServer {
 public:
  LiveServer(const RunConfig& config, std::optional<std::string> token = std::nullopt)
      : server_(config, ServeOptions{"127.0.0.1", 0, std::move(token), {}}) {
    port_ = server_.bind();
    thread_ = std::thread([this] { server_.listen(); });
    server_.wait_until_ready();
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30, 0);
    return c;
  }

 private:
  SessionServer server_;
  int port_ = 0;
  std::thread thread_;
};

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

std::string open_session(httplib::Client& c, double threshold) {
  const auto r = c.Post("/sessions", json{{"accuracy_threshold", threshold}}.dump(), "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 200);
  return body_of(r)["session_id"];
}

// Judges every offered candidate with the automated rule and finalizes.
json scripted_client(httplib::Client& c, const std::string& id, double t) {
  for (;;) {
    const json next = body_of(c.Get("/sessions/" + id + "/next"));
    if (next["done"]) break;
    const json& s = next["stats"];
    const bool useful = s["coverage"].get<double>() > 0 && s["accuracy"].get<double>() >= t;
    const auto r = c.Post("/sessions/" + id + "/verdict", json{{"lf_id", next["lf_id"]}, {"useful", useful}}.dump(),
                          "application/json");
    REQUIRE(r->status == 200);
  }
  return body_of(c.Post("/sessions/" + id + "/finalize", "", "application/json"));
}

std::vector<std::string> ids_of(const LFSet& set) {
  std::vector<std::string> out;
  for (const auto& lf : set.lfs) out.push_back(lf.id);
  return out;
}

Session local_session(const RunConfig& c, double t, SessionMode mode = SessionMode::automated) {
  const DatasetBundle b = load_bundle(c.manifest);
  SynthesisConfig sc = c.synthesis;
  sc.seed = c.seed;
  return Session::create(build_pool(b, sc, c.min_pool), b, mode, t);
}

}  // namespace

TEST_CASE("scripted client over http matches the automated rule, and the log replays") {
  TempDir dir("protocol_script");
  const RunConfig config = serve_config(dir);
  LiveServer server(config);
  auto c = server.client();
  const double t = 0.7;
  const std::string id = open_session(c, t);
  const json fin = scripted_client(c, id, t);

  Session automated = local_session(config, t);
  const SelectionResult expected = run_automated(automated);
  CHECK(fin["summary"]["lf_ids"].get<std::vector<std::string>>() == ids_of(expected.selected));
  CHECK(fin["summary"]["empty_warning"] == expected.empty_warning);
  CHECK_FALSE(expected.selected.lfs.empty());

  const LFSet saved = load_lfset(fin["lf_set_path"].get<std::string>());
  CHECK(ids_of(saved) == ids_of(expected.selected));

  const auto log = read_verdict_log(config.output_dir / "sessions" / id / "verdicts.ndjson");
  CHECK(log.size() == automated.pool().lfs.size());
  Session fresh = local_session(config, t, SessionMode::interactive);
  const SelectionResult replayed = replay(fresh, log);
  CHECK(ids_of(replayed.selected) == ids_of(saved));
  CHECK(to_json(replayed.selected).dump() == to_json(saved).dump());

  CHECK(body_of(c.Get("/sessions/" + id + "/next"))["done"] == true);
  const auto late = c.Post("/sessions/" + id + "/verdict", json{{"lf_id", log[0].lf_id}, {"useful", true}}.dump(),
                           "application/json");
  CHECK(late->status == 409);
}

TEST_CASE("finalizing without verdicts warns about an empty set") {
  TempDir dir("protocol_empty");
  LiveServer server(serve_config(dir));
  auto c = server.client();
  const std::string id = open_session(c, 0.6);
  const json fin = body_of(c.Post("/sessions/" + id + "/finalize", "", "application/json"));
  CHECK(fin["summary"]["empty_warning"] == true);
  CHECK(fin["summary"]["selected"] == 0);
}

TEST_CASE("concurrent sessions are independent") {
  TempDir dir("protocol_concurrent");
  const RunConfig config = serve_config(dir);
  LiveServer server(config);
  auto c0 = server.client();
  const std::string a = open_session(c0, 0.6);
  const std::string b = open_session(c0, 0.6);
  CHECK(a != b);

  // Session a accepts everything, session b rejects everything, interleaved
  // from two client threads.
  const auto judge = [&](const std::string& id, bool useful) {
    auto c = server.client();
    for (;;) {
      const json next = body_of(c.Get("/sessions/" + id + "/next"));
      if (next["done"]) break;
      c.Post("/sessions/" + id + "/verdict", json{{"lf_id", next["lf_id"]}, {"useful", useful}}.dump(),
             "application/json");
    }
  };
  std::thread ta(judge, a, true), tb(judge, b, false);
  ta.join();
  tb.join();
  const json fa = body_of(c0.Post("/sessions/" + a + "/finalize", "", "application/json"));
  const json fb = body_of(c0.Post("/sessions/" + b + "/finalize", "", "application/json"));
  CHECK(fa["summary"]["selected"] == local_session(config, 0.6).pool().lfs.size());
  CHECK(fb["summary"]["selected"] == 0);
  CHECK(fb["summary"]["empty_warning"] == true);
}

TEST_CASE("protocol errors map to status codes") {
  TempDir dir("protocol_errors");
  LiveServer server(serve_config(dir));
  auto c = server.client();
  CHECK(c.Get("/sessions/nope/next")->status == 404);
  const std::string id = open_session(c, 0.6);
  const auto unknown =
      c.Post("/sessions/" + id + "/verdict", json{{"lf_id", "no_such_lf"}, {"useful", true}}.dump(), "application/json");
  CHECK(unknown->status == 404);
  CHECK(c.Post("/sessions/" + id + "/verdict", "{not json", "application/json")->status == 400);
  CHECK(c.Post("/sessions", json{{"accuracy_threshold", 1.5}}.dump(), "application/json")->status == 400);

  const json next = body_of(c.Get("/sessions/" + id + "/next"));
  const std::string body = json{{"lf_id", next["lf_id"]}, {"useful", true}}.dump();
  CHECK(c.Post("/sessions/" + id + "/verdict", body, "application/json")->status == 200);
  CHECK(c.Post("/sessions/" + id + "/verdict", body, "application/json")->status == 409);

  const json state = body_of(c.Get("/sessions/" + id + "/state"));
  CHECK(state["session_id"] == id);
}

TEST_CASE("token is required when configured") {
  TempDir dir("protocol_token");
  LiveServer server(serve_config(dir), "s3cret");
  auto c = server.client();
  CHECK(c.Post("/sessions", "{}", "application/json")->status == 401);
  c.set_default_headers({{kTokenHeader, "wrong"}});
  CHECK(c.Post("/sessions", "{}", "application/json")->status == 401);
  c.set_default_headers({{kTokenHeader, "s3cret"}});
  CHECK(c.Post("/sessions", "{}", "application/json")->status == 200);
}

TEST_CASE("binding a busy port fails cleanly") {
  TempDir dir("protocol_busy");
  const RunConfig config = serve_config(dir);
  SessionServer first(config, ServeOptions{"127.0.0.1", 0, std::nullopt, {}});
  const int port = first.bind();
  SessionServer second(config, ServeOptions{"127.0.0.1", port, std::nullopt, {}});
  CHECK_THROWS_WITH_AS(second.bind(), doctest::Contains("port busy"), Error);
}
