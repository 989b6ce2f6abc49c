#pragma once

// Coordination service core: sessions, task dispatch, transition relay,
// confirmation brokering and trial persistence. Transport-independent; the
// HTTP endpoints in server.hpp are a thin mapping onto this class.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "statebridge/mediator.hpp"
#include "statebridge/protocol.hpp"
#include "statebridge/sim.hpp"
#include "statebridge/state.hpp"
#include "statebridge/trial_log.hpp"

namespace statebridge {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 = pick a free port
  int max_retries = kDefaultMaxRetries;
  std::filesystem::path log_path = "trials.ndjson";
  /// Virtual ms per wall ms for requests that carry no ts_ms. 0 keeps the
  /// session clock where the last event left it.
  double live_time_scale = 0.0;
  /// Wall-clock limit on an unanswered failure confirmation; 0 disables.
  std::chrono::milliseconds confirm_timeout{0};
  MessageTemplates templates = MessageTemplates::defaults();
  /// Answers the pre-dispatch prompt when a submission carries no acknowledgement.
  UserAgentPolicy default_user;
  int worker_threads = 32;
};

struct SessionSpec {
  std::string participant_id;
  Condition condition = Condition::Hidden;
  int period = 1;
  std::optional<std::uint64_t> seed;  // forwarded to the agent with each task
};

struct SubmitRequest {
  std::string utterance;
  std::optional<std::int64_t> ts_ms;  // when the request was complete
  std::optional<DispatchAck> pre_confirm;
};

struct SubmitResult {
  std::string task_id;
  TaskIntent intent;
  bool dispatched = false;
  std::int64_t dispatch_ts_ms = 0;
};

struct DispatchedTask {
  std::string task_id;
  std::string session_id;
  TaskIntent intent;
  std::int64_t dispatch_ts_ms = 0;
  std::optional<std::uint64_t> seed;
};

struct StateUpdate {
  ExecutionState from = ExecutionState::Idle;
  ExecutionState to = ExecutionState::Navigating;
  std::optional<FailureCategory> failure_category;
  std::optional<std::int64_t> ts_ms;
  std::optional<int> grasp_attempts;
};

enum class StreamView { User, Full };

struct StreamBatch {
  std::vector<StreamEvent> events;
  bool end = false;  // no further events will be delivered for this request
};

class Coordinator {
 public:
  explicit Coordinator(ServerConfig config);
  ~Coordinator();

  Coordinator(const Coordinator&) = delete;
  Coordinator& operator=(const Coordinator&) = delete;

  const ServerConfig& config() const { return config_; }

  std::string create_session(const SessionSpec& spec);

  /// Throws NoIntent, UnknownSession, SessionBusy, AgentUnavailable.
  SubmitResult submit_task(const std::string& session_id, const SubmitRequest& request);

  /// Throws UnknownTask; IllegalTransition after terminating the task with a
  /// SYSTEM_HANG failure.
  void relay_state_update(const std::string& task_id, const StateUpdate& update);

  /// Throws UnknownTask, NoPendingConfirmation.
  void handle_confirmation(const std::string& task_id, Decision decision,
                           std::optional<std::int64_t> ts_ms = std::nullopt);

  void register_agent();
  bool agent_registered() const;

  /// Long-poll for the next dispatched task, FIFO across sessions.
  std::optional<DispatchedTask> next_task(std::chrono::milliseconds wait);

  /// Long-poll for the RETRY/ABORT decision of the task's current failure.
  std::optional<TimedDecision> await_decision(const std::string& task_id, std::chrono::milliseconds wait);

  /// Events with seq >= from_seq visible in `view`, waiting up to `wait` when
  /// none are available yet. With stop_at_result the batch ends after the first
  /// TASK_RESULT at or beyond from_seq.
  StreamBatch read_stream(const std::string& session_id, std::uint64_t from_seq, StreamView view,
                          bool stop_at_result, std::chrono::milliseconds wait);

  /// Full event log of a session.
  std::vector<StreamEvent> session_log(const std::string& session_id) const;
  SessionSpec session_spec(const std::string& session_id) const;
  std::optional<TrialRecord> trial_record(const std::string& task_id) const;
  nlohmann::json session_summary(const std::string& session_id) const;

  /// Wakes every waiter; subsequent waits return immediately.
  void shutdown();

 private:
  struct PendingDecision {
    bool awaiting_user = false;
    std::optional<TimedDecision> resolved;
    std::chrono::steady_clock::time_point asked_at;
  };

  struct Task {
    std::string id;
    std::string session_id;
    TaskIntent intent;
    TaskMachine machine = new_machine();
    std::int64_t ready_ts = 0;
    std::int64_t dispatch_ts = 0;
    std::optional<std::int64_t> terminal_ts;
    int grasp_attempts = 0;
    double progress = 0.0;
    std::vector<TransitionStamp> transitions;
    std::optional<PendingDecision> decision;
    std::optional<TrialRecord> record;
    bool dispatched = false;
  };

  struct Session {
    std::string id;
    SessionSpec spec;
    std::chrono::steady_clock::time_point created;
    std::int64_t ready_ts = 0;
    std::int64_t last_ts = 0;
    std::vector<StreamEvent> log;
    std::optional<std::string> active_task;
    Rng user_rng{0};
  };

  Session& session_locked(const std::string& id);
  const Session& session_locked(const std::string& id) const;
  Task& task_locked(const std::string& id);
  std::int64_t stamp_locked(Session& s, std::optional<std::int64_t> requested) const;
  void append_locked(Session& s, const Task& t, std::int64_t ts, Payload payload);
  void emit_transition_locked(Session& s, Task& t, const StateTransitionPayload& p, std::int64_t ts);
  void finish_locked(Session& s, Task& t, std::int64_t ts);
  void maybe_time_out_locked(Task& t);

  ServerConfig config_;
  TrialLog trial_log_;
  mutable std::mutex mu_;
  std::condition_variable changed_;
  bool stopping_ = false;
  bool agent_registered_ = false;
  std::uint64_t next_session_ = 1;
  std::uint64_t next_task_ = 1;
  std::map<std::string, Session> sessions_;
  std::map<std::string, Task> tasks_;
  std::deque<std::string> dispatch_queue_;
};

}  // namespace statebridge
