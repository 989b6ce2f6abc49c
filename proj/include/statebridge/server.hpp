#pragma once

// HTTP front end of the coordinator.
//
//   POST /api/v1/sessions                 {participant_id, condition, period, seed?}
//   GET  /api/v1/sessions/{sid}
//   POST /api/v1/sessions/{sid}/tasks     {utterance, ts_ms?, pre_confirm?}
//   GET  /api/v1/sessions/{sid}/stream    ?from_seq=&view=user|full&until=result&follow=0
//   POST /api/v1/tasks/{tid}/confirm      {decision, ts_ms?}
//   POST /agent/v1/register
//   GET  /agent/v1/next                   ?wait_ms=
//   POST /agent/v1/tasks/{tid}/state      {from, to, failure_category?, ts_ms?, grasp_attempts?}
//   GET  /agent/v1/tasks/{tid}/decision   ?wait_ms=
//
// Errors come back as {"error": <code>, "message": ...}.

#include <memory>
#include <thread>

#include "statebridge/coordinator.hpp"
#include "statebridge/error.hpp"

namespace httplib {
class Server;
}

namespace statebridge {

int http_status(ErrorCode code);

class HttpServer {
 public:
  explicit HttpServer(ServerConfig config);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and starts serving on a background thread; returns the bound port.
  /// Throws Error{PortInUse}.
  int start();
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

  int port() const { return port_; }
  const std::string& host() const { return coordinator_.config().host; }
  Coordinator& coordinator() { return coordinator_; }

 private:
  void install_routes();

  Coordinator coordinator_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace statebridge
