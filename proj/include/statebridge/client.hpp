#pragma once

// HTTP clients for both sides of the coordination server, and the execution
// agent that drives the simulator against it. One ApiClient per thread: each
// request holds the connection until it returns.

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "statebridge/coordinator.hpp"
#include "statebridge/sim.hpp"

namespace httplib {
class Client;
}

namespace statebridge {

/// Failures map back onto the server's error codes; connection failures
/// raise Error{ServerUnreachable}.
class ApiClient {
 public:
  ApiClient(std::string host, int port);
  ~ApiClient();
  ApiClient(const ApiClient&) = delete;
  ApiClient& operator=(const ApiClient&) = delete;

  std::string create_session(const SessionSpec& spec);
  SubmitResult submit_task(const std::string& session_id, const SubmitRequest& request);
  void confirm(const std::string& task_id, Decision decision, std::optional<std::int64_t> ts_ms = std::nullopt);
  nlohmann::json session_summary(const std::string& session_id);

  /// Streams events until the server ends the response or `on_event` returns false.
  void stream(const std::string& session_id, std::uint64_t from_seq, StreamView view, bool until_result,
              const std::function<bool(const StreamEvent&)>& on_event);
  /// Everything logged so far in the session, including internal transitions.
  std::vector<StreamEvent> transcript(const std::string& session_id);

  /// Returns the server's max_retries.
  int register_agent();
  std::optional<DispatchedTask> next_task(std::chrono::milliseconds wait);
  void post_state(const std::string& task_id, const StateUpdate& update);
  std::optional<TimedDecision> decision(const std::string& task_id, std::chrono::milliseconds wait);

  /// Drops the kept-alive connection so a stopping server need not wait on it.
  void close();

  const std::string& host() const { return host_; }
  int port() const { return port_; }

 private:
  std::string host_;
  int port_;
  std::unique_ptr<httplib::Client> http_;
};

/// AgentLink over the agent endpoints for a single task.
class HttpAgentLink : public AgentLink {
 public:
  HttpAgentLink(ApiClient& client, std::string task_id) : client_(client), task_id_(std::move(task_id)) {}
  void report(const ReportedTransition& t) override;
  TimedDecision await_decision(const ReportedTransition& failure) override;

 private:
  ApiClient& client_;
  std::string task_id_;
};

/// Pulls dispatched tasks and runs each through the simulator. The task's
/// seed (when the session has one) fixes the simulation; otherwise seeds are
/// derived from the config seed and a task counter.
class ExecutionAgent {
 public:
  ExecutionAgent(std::string host, int port, SimConfig config);

  /// Registers with the server and adopts its max_retries.
  void connect();
  /// Runs at most one task; false when none arrived within `wait`.
  bool run_once(std::chrono::milliseconds wait);
  /// Runs tasks until `stop` is set. Connection losses are retried.
  void run(const std::atomic<bool>& stop);

  int tasks_run() const { return tasks_run_; }

 private:
  ApiClient client_;
  SimConfig config_;
  std::uint64_t counter_ = 0;
  int tasks_run_ = 0;
};

}  // namespace statebridge
