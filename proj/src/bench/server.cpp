#include <fstream>

// Eigen must precede httplib: <resolv.h> defines a _res macro that collides
// with Eigen parameter names.
#include "autows/bench.hpp"
#include "autows/error.hpp"

#include <httplib.h>

namespace autows::bench {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body);
  if (!j.is_object()) throw Error("request body must be a JSON object");
  return j;
}

}  // namespace

struct SessionServer::Impl {
  RunConfig config;
  ServeOptions options;
  DatasetBundle bundle;
  LFSet pool;
  std::vector<CandidateStats> stats;
  SessionStore store;
  httplib::Server http;
  bool bound = false;

  fs::path session_dir(const std::string& id) const { return config.output_dir / "sessions" / id; }

  template <typename Fn>
  void guarded(httplib::Response& res, Fn fn) {
    try {
      fn();
    } catch (const SessionError& e) {
      send_error(res, e.code() == SessionError::Code::unknown_candidate ? 404 : 409, e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, std::string("malformed request: ") + e.what());
    } catch (const Error& e) {
      send_error(res, 400, e.what());
    }
  }

  // Resolves the session named in the path or answers 404.
  template <typename Fn>
  void with_session(const httplib::Request& req, httplib::Response& res, Fn fn) {
    const std::string id = req.matches[1];
    if (!store.contains(id)) {
      send_error(res, 404, "unknown session: " + id);
      return;
    }
    guarded(res, [&] { store.with(id, [&](Session& s) { fn(id, s); }); });
  }

  void routes() {
    // SO_REUSEPORT (httplib's default) would let a second server share the
    // port silently; keep only SO_REUSEADDR so a busy port fails to bind.
    http.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });

    http.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (options.token && req.path.rfind("/sessions", 0) == 0 &&
          req.get_header_value(kTokenHeader) != *options.token) {
        send_error(res, 401, "invalid token");
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });

    http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = parse_body(req);
        double t = config.accuracy_threshold.value_or(default_accuracy_threshold(bundle.classes()));
        if (body.contains("accuracy_threshold")) t = body.at("accuracy_threshold").get<double>();
        if (!(t >= 0.0 && t <= 1.0)) throw Error("accuracy_threshold outside [0,1]");
        const std::string id = store.create(Session(pool, stats, SessionMode::interactive, t));
        fs::create_directories(session_dir(id));
        std::ofstream(session_dir(id) / "verdicts.ndjson", std::ios::trunc);
        send_json(res, 200, {{"session_id", id}});
      });
    });

    http.Get(R"(/sessions/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](const std::string&, Session& s) {
        if (s.finalized()) {
          send_json(res, 200, {{"done", true}, {"finalized", true}});
          return;
        }
        const auto next = s.next();
        if (!next) {
          send_json(res, 200, {{"done", true}, {"finalized", false}});
          return;
        }
        send_json(res, 200, {{"done", false}, {"lf_id", next->lf_id}, {"stats", to_json(*next)},
                             {"pending", s.pending_count()}});
      });
    });

    http.Post(R"(/sessions/([^/]+)/verdict)", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](const std::string& id, Session& s) {
        const json body = parse_body(req);
        const VerdictRecord r{body.at("lf_id").get<std::string>(), body.at("useful").get<bool>()};
        s.record(r.lf_id, r.useful);
        std::ofstream log(session_dir(id) / "verdicts.ndjson", std::ios::app);
        log << verdict_log_line(r) << '\n';
        log.flush();
        if (!log) throw Error("cannot append to verdict log");
        send_json(res, 200, {{"recorded", true}, {"pending", s.pending_count()}});
      });
    });

    http.Post(R"(/sessions/([^/]+)/finalize)", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](const std::string& id, Session& s) {
        const SelectionResult result = s.finalize();
        const fs::path path = session_dir(id) / "lfset.json";
        save_lfset(path, result.selected);
        json ids = json::array();
        for (const auto& lf : result.selected.lfs) ids.push_back(lf.id);
        send_json(res, 200, {{"lf_set_path", path.string()},
                             {"summary",
                              {{"selected", result.selected.lfs.size()},
                               {"empty_warning", result.empty_warning},
                               {"lf_ids", ids}}}});
      });
    });

    http.Get(R"(/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](const std::string& id, Session& s) {
        json state = s.state_json();
        state["session_id"] = id;
        send_json(res, 200, state);
      });
    });

    if (!options.static_dir.empty() && !http.set_mount_point("/", options.static_dir.string())) {
      throw Error("static directory not found: " + options.static_dir.string());
    }
  }
};

SessionServer::SessionServer(const RunConfig& config, ServeOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->config = config;
  impl_->options = std::move(options);
  impl_->bundle = load_bundle(config.manifest, LoadOptions{config.provenance, config.standardize});
  if (config.label_budget > 0) impl_->bundle = with_label_budget(impl_->bundle, config.label_budget);
  SynthesisConfig sc = config.synthesis;
  sc.seed = config.seed;
  impl_->pool = build_pool(impl_->bundle, sc, config.min_pool);
  for (const auto& lf : impl_->pool.lfs) impl_->stats.push_back(compute_stats(lf, impl_->bundle));
  impl_->routes();
}

SessionServer::~SessionServer() { stop(); }

int SessionServer::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    const int port = impl_->http.bind_to_any_port(o.host);
    if (port < 0) throw Error("port busy: no free port on " + o.host);
    o.port = port;
  } else if (!impl_->http.bind_to_port(o.host, o.port)) {
    throw Error("port busy: " + o.host + ":" + std::to_string(o.port));
  }
  impl_->bound = true;
  return o.port;
}

void SessionServer::listen() {
  if (!impl_->bound) throw Error("server is not bound");
  impl_->http.listen_after_bind();
}

void SessionServer::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

void SessionServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace autows::bench
