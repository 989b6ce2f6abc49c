#include "statebridge/server.hpp"

#include <httplib.h>

#include <algorithm>
#include <functional>

#include "statebridge/api.hpp"
#include "statebridge/log.hpp"

namespace statebridge {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoIntent: return 422;
    case ErrorCode::SessionBusy:
    case ErrorCode::NoPendingConfirmation:
    case ErrorCode::IllegalTransition:
    case ErrorCode::RetriesExhausted: return 409;
    case ErrorCode::AgentUnavailable: return 503;
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownTask: return 404;
    case ErrorCode::ParseError:
    case ErrorCode::UnknownKind:
    case ErrorCode::SchemaViolation:
    case ErrorCode::InvalidEvent:
    case ErrorCode::ConfigError: return 400;
    default: return 500;
  }
}

namespace {

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

void send_json(httplib::Response& res, const nlohmann::ordered_json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  log_at(LogLevel::Debug, "http error: " + std::string(e.what()));
  send_json(res, error_to_json(e), http_status(e.code()));
}

httplib::Server::Handler guarded(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const nlohmann::json::exception& e) {
      send_error(res, Error(ErrorCode::SchemaViolation, e.what()));
    } catch (const std::exception& e) {
      send_error(res, Error(ErrorCode::StorageError, e.what()));
    }
  };
}

nlohmann::json body_json(const httplib::Request& req) {
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseError, "request body is not valid JSON");
  return j;
}

std::chrono::milliseconds wait_param(const httplib::Request& req, long fallback) {
  long ms = fallback;
  if (req.has_param("wait_ms")) {
    try {
      ms = std::stol(req.get_param_value("wait_ms"));
    } catch (const std::exception&) {
      throw Error(ErrorCode::SchemaViolation, "wait_ms must be an integer");
    }
  }
  return std::chrono::milliseconds(std::clamp(ms, 0L, 30000L));
}

struct StreamCursor {
  std::uint64_t next_seq = 1;
};

}  // namespace

HttpServer::HttpServer(ServerConfig config)
    : coordinator_(std::move(config)), http_(std::make_unique<httplib::Server>()) {
  const int workers = std::max(2, coordinator_.config().worker_threads);
  http_->new_task_queue = [workers] { return new httplib::ThreadPool(static_cast<std::size_t>(workers)); };
  http_->set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  http_->set_logger([](const httplib::Request& req, const httplib::Response& res) {
    if (log_threshold() >= LogLevel::Debug) {
      log_at(LogLevel::Debug, req.method + " " + req.path + " -> " + std::to_string(res.status));
    }
  });
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
  auto& s = *http_;
  Coordinator& c = coordinator_;

  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  s.Post("/api/v1/sessions", guarded([&c](const httplib::Request& req, httplib::Response& res) {
           const auto spec = session_spec_from_json(body_json(req));
           const std::string sid = c.create_session(spec);
           nlohmann::ordered_json j;
           j["session_id"] = sid;
           send_json(res, j, 201);
         }));

  s.Get(R"(/api/v1/sessions/([^/]+))", guarded([&c](const httplib::Request& req, httplib::Response& res) {
          send_json(res, nlohmann::ordered_json(c.session_summary(req.matches[1])));
        }));

  s.Post(R"(/api/v1/sessions/([^/]+)/tasks)", guarded([&c](const httplib::Request& req, httplib::Response& res) {
           const auto result = c.submit_task(req.matches[1], submit_request_from_json(body_json(req)));
           send_json(res, submit_result_to_json(result), 201);
         }));

  s.Get(R"(/api/v1/sessions/([^/]+)/stream)", guarded([&c](const httplib::Request& req, httplib::Response& res) {
          const std::string sid = req.matches[1];
          c.session_spec(sid);  // 404 before the stream starts
          auto cursor = std::make_shared<StreamCursor>();
          if (req.has_param("from_seq")) {
            try {
              cursor->next_seq = std::max<std::uint64_t>(1, std::stoull(req.get_param_value("from_seq")));
            } catch (const std::exception&) {
              throw Error(ErrorCode::SchemaViolation, "from_seq must be an integer");
            }
          }
          const std::string view_param = req.has_param("view") ? req.get_param_value("view") : "user";
          if (view_param != "user" && view_param != "full") throw Error(ErrorCode::SchemaViolation, "view must be user|full");
          const StreamView view = view_param == "full" ? StreamView::Full : StreamView::User;
          const bool until_result = req.has_param("until") && req.get_param_value("until") == "result";
          const bool follow = !(req.has_param("follow") && req.get_param_value("follow") == "0");

          res.set_chunked_content_provider(
              "application/x-ndjson",
              [&c, sid, cursor, view, until_result, follow](std::size_t, httplib::DataSink& sink) {
                if (!sink.is_writable()) return false;
                StreamBatch batch;
                try {
                  batch = c.read_stream(sid, cursor->next_seq, view, until_result,
                                        follow ? std::chrono::milliseconds(500) : std::chrono::milliseconds(0));
                } catch (const std::exception&) {
                  return false;
                }
                std::string out;
                for (const auto& ev : batch.events) {
                  out += encode_event(ev);
                  out += '\n';
                  cursor->next_seq = ev.seq + 1;
                }
                if (!out.empty() && !sink.write(out.data(), out.size())) return false;
                if (batch.end || !follow) sink.done();
                return true;
              });
        }));

  s.Post(R"(/api/v1/tasks/([^/]+)/confirm)", guarded([&c](const httplib::Request& req, httplib::Response& res) {
           const auto j = body_json(req);
           if (!j.is_object() || !j.contains("decision") || !j["decision"].is_string()) {
             throw Error(ErrorCode::SchemaViolation, "missing field 'decision'");
           }
           const auto decision = parse_decision(j["decision"].get<std::string>());
           if (!decision) throw Error(ErrorCode::SchemaViolation, "decision must be RETRY or ABORT");
           std::optional<std::int64_t> ts;
           if (j.contains("ts_ms") && !j["ts_ms"].is_null()) ts = j["ts_ms"].get<std::int64_t>();
           c.handle_confirmation(req.matches[1], *decision, ts);
           send_json(res, {{"ok", true}});
         }));

  s.Post("/agent/v1/register", guarded([&c](const httplib::Request&, httplib::Response& res) {
           c.register_agent();
           send_json(res, {{"ok", true}, {"max_retries", c.config().max_retries}});
         }));

  s.Get("/agent/v1/next", guarded([&c](const httplib::Request& req, httplib::Response& res) {
          if (auto task = c.next_task(wait_param(req, 1000))) {
            send_json(res, dispatched_task_to_json(*task));
          } else {
            res.status = 204;
          }
        }));

  s.Post(R"(/agent/v1/tasks/([^/]+)/state)", guarded([&c](const httplib::Request& req, httplib::Response& res) {
           c.relay_state_update(req.matches[1], state_update_from_json(body_json(req)));
           send_json(res, {{"ok", true}});
         }));

  s.Get(R"(/agent/v1/tasks/([^/]+)/decision)", guarded([&c](const httplib::Request& req, httplib::Response& res) {
          if (auto d = c.await_decision(req.matches[1], wait_param(req, 1000))) {
            send_json(res, decision_to_json(*d));
          } else {
            res.status = 204;
          }
        }));
}

int HttpServer::start() {
  const auto& cfg = coordinator_.config();
  // httplib's default also sets SO_REUSEPORT, which lets a second server
  // share a port that is already serving.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  if (cfg.port == 0) {
    port_ = http_->bind_to_any_port(cfg.host);
    if (port_ < 0) throw Error(ErrorCode::PortInUse, "cannot bind " + cfg.host);
  } else {
    if (!http_->bind_to_port(cfg.host, cfg.port)) {
      throw Error(ErrorCode::PortInUse, cfg.host + ":" + std::to_string(cfg.port));
    }
    port_ = cfg.port;
  }
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  log_at(LogLevel::Info, "listening on " + cfg.host + ":" + std::to_string(port_));
  return port_;
}

void HttpServer::stop() {
  coordinator_.shutdown();
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

void HttpServer::wait() {
  if (thread_.joinable()) thread_.join();
}

}  // namespace statebridge
