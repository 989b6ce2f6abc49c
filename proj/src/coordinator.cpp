#include "statebridge/coordinator.hpp"

#include <algorithm>
#include <cstdio>

#include "statebridge/error.hpp"
#include "statebridge/intent.hpp"

namespace statebridge {

namespace {

std::string make_id(char prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%04llu", prefix, static_cast<unsigned long long>(n));
  return buf;
}

constexpr std::uint64_t kUserStream = 0x5553;

}  // namespace

Coordinator::Coordinator(ServerConfig config)
    : config_(std::move(config)), trial_log_(config_.log_path) {}

Coordinator::~Coordinator() { shutdown(); }

void Coordinator::shutdown() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  changed_.notify_all();
}

Coordinator::Session& Coordinator::session_locked(const std::string& id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, id);
  return it->second;
}

const Coordinator::Session& Coordinator::session_locked(const std::string& id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, id);
  return it->second;
}

Coordinator::Task& Coordinator::task_locked(const std::string& id) {
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw Error(ErrorCode::UnknownTask, id);
  return it->second;
}

std::int64_t Coordinator::stamp_locked(Session& s, std::optional<std::int64_t> requested) const {
  std::int64_t ts = s.last_ts;
  if (requested) {
    ts = std::max(ts, *requested);
  } else if (config_.live_time_scale > 0.0) {
    const auto wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - s.created);
    ts = std::max(ts, static_cast<std::int64_t>(wall.count() * config_.live_time_scale));
  }
  return ts;
}

std::string Coordinator::create_session(const SessionSpec& spec) {
  std::lock_guard lock(mu_);
  Session s;
  s.id = make_id('S', next_session_++);
  s.spec = spec;
  s.created = std::chrono::steady_clock::now();
  s.user_rng = Rng(mix_seed(spec.seed.value_or(0), kUserStream));
  const std::string id = s.id;
  sessions_.emplace(id, std::move(s));
  return id;
}

void Coordinator::register_agent() {
  {
    std::lock_guard lock(mu_);
    agent_registered_ = true;
  }
  changed_.notify_all();
}

bool Coordinator::agent_registered() const {
  std::lock_guard lock(mu_);
  return agent_registered_;
}

SubmitResult Coordinator::submit_task(const std::string& session_id, const SubmitRequest& request) {
  const TaskIntent intent = parse_intent(request.utterance);

  std::unique_lock lock(mu_);
  Session& s = session_locked(session_id);
  if (s.active_task) throw Error(ErrorCode::SessionBusy, "session " + session_id + " has task " + *s.active_task);
  if (!agent_registered_) throw Error(ErrorCode::AgentUnavailable, "no execution agent has registered");

  Task t;
  t.id = make_id('T', next_task_++);
  t.session_id = session_id;
  t.intent = intent;
  t.ready_ts = s.ready_ts;

  const std::int64_t request_ts = stamp_locked(s, request.ts_ms);
  DispatchAckSource user = request.pre_confirm
                               ? DispatchAckSource([ack = *request.pre_confirm](const TaskIntent&) { return ack; })
                               : scripted_dispatch_ack(config_.default_user, s.user_rng);
  const DispatchAck ack = pre_dispatch_confirmation(intent, s.spec.condition, user);

  SubmitResult result{t.id, intent, ack.confirmed, request_ts + ack.elapsed_ms};
  if (ack.confirmed) {
    t.dispatched = true;
    t.dispatch_ts = result.dispatch_ts_ms;
    s.last_ts = t.dispatch_ts;
    s.active_task = t.id;
    dispatch_queue_.push_back(t.id);
  }
  tasks_.emplace(t.id, std::move(t));
  lock.unlock();
  changed_.notify_all();
  return result;
}

std::optional<DispatchedTask> Coordinator::next_task(std::chrono::milliseconds wait) {
  std::unique_lock lock(mu_);
  agent_registered_ = true;
  changed_.wait_for(lock, wait, [&] { return stopping_ || !dispatch_queue_.empty(); });
  if (dispatch_queue_.empty()) return std::nullopt;
  const std::string id = dispatch_queue_.front();
  dispatch_queue_.pop_front();
  const Task& t = tasks_.at(id);
  return DispatchedTask{t.id, t.session_id, t.intent, t.dispatch_ts, sessions_.at(t.session_id).spec.seed};
}

void Coordinator::append_locked(Session& s, const Task& t, std::int64_t ts, Payload payload) {
  StreamEvent ev;
  ev.seq = s.log.size() + 1;
  ev.ts_ms = std::max(ts, s.last_ts);
  ev.session_id = s.id;
  ev.task_id = t.id;
  ev.payload = std::move(payload);
  validate_event(ev);
  s.last_ts = ev.ts_ms;
  s.log.push_back(std::move(ev));
}

void Coordinator::emit_transition_locked(Session& s, Task& t, const StateTransitionPayload& p, std::int64_t ts) {
  append_locked(s, t, ts, p);
  t.transitions.push_back({p.to, s.last_ts});
  const MessageContext ctx{t.intent.object, t.progress, &config_.templates};
  if (auto msg = externalize(s.log.back(), s.spec.condition, ctx)) {
    t.progress = msg->progress;
    append_locked(s, t, ts, *msg);
  }
}

void Coordinator::finish_locked(Session& s, Task& t, std::int64_t ts) {
  const TerminalOutcome outcome = *t.machine.terminal_outcome;
  append_locked(s, t, ts, TaskResultPayload{outcome.success, outcome.category, t.grasp_attempts});
  const MessageContext ctx{t.intent.object, t.progress, &config_.templates};
  if (auto msg = externalize(s.log.back(), s.spec.condition, ctx)) {
    t.progress = msg->progress;
    append_locked(s, t, ts, *msg);
  }
  t.terminal_ts = s.last_ts;
  t.decision.reset();
  s.ready_ts = s.last_ts;
  s.active_task.reset();

  TrialRecord r;
  r.trial_id = t.id;
  r.participant_id = s.spec.participant_id;
  r.condition = s.spec.condition;
  r.period = s.spec.period;
  r.object = t.intent.object;
  r.success = outcome.success;
  r.failure_category = outcome.category;
  r.ready_ts_ms = t.ready_ts;
  r.dispatch_ts_ms = t.dispatch_ts;
  r.terminal_ts_ms = t.terminal_ts;
  r.grasp_attempts = t.grasp_attempts;
  r.transitions = t.transitions;
  t.record = r;
  trial_log_.append(r);
}

void Coordinator::relay_state_update(const std::string& task_id, const StateUpdate& update) {
  std::unique_lock lock(mu_);
  Task& t = task_locked(task_id);
  Session& s = session_locked(t.session_id);
  const std::int64_t ts = stamp_locked(s, update.ts_ms);

  auto reject = [&](const std::string& why) {
    if (!t.terminal_ts) {
      // The agent is out of step with the task model: end the task as a hang.
      t.machine.current = ExecutionState::Idle;
      t.machine.last_failure = FailureCategory::SystemHang;
      t.machine.terminal_outcome = TerminalOutcome::failed(FailureCategory::SystemHang);
      finish_locked(s, t, ts);
      lock.unlock();
      changed_.notify_all();
    }
    throw Error(ErrorCode::IllegalTransition, task_id + ": " + why);
  };

  const std::string edge = std::string(to_string(update.from)) + "->" + std::string(to_string(update.to));
  if (t.terminal_ts) throw Error(ErrorCode::IllegalTransition, task_id + " already finished");
  if (!t.dispatched) reject("task was never dispatched");
  if (update.from != t.machine.current) {
    reject(edge + " but the task is in " + std::string(to_string(t.machine.current)));
  }
  auto event = infer_event(t.machine, update.to, update.failure_category);
  if (!event) reject(edge + " is not a legal transition");

  if (update.from == ExecutionState::Failed) {
    if (!t.decision || !t.decision->resolved) reject(edge + " before a recovery decision");
    if (update.to == ExecutionState::Recovering && t.decision->resolved->decision != Decision::Retry) {
      reject(edge + " after an ABORT decision");
    }
  }
  try {
    t.machine = apply_event(t.machine, *event, config_.max_retries);
  } catch (const Error& e) {
    reject(e.what());
  }
  if (update.from == ExecutionState::Failed) t.decision.reset();
  if (update.grasp_attempts) t.grasp_attempts = std::max(t.grasp_attempts, *update.grasp_attempts);

  emit_transition_locked(s, t, {update.from, update.to, update.failure_category}, ts);

  if (update.to == ExecutionState::Failed) {
    PendingDecision pending;
    pending.asked_at = std::chrono::steady_clock::now();
    if (s.spec.condition == Condition::Hidden) {
      // Recovery is handled silently: approve while retries remain.
      const bool retry = t.machine.retries_used < config_.max_retries;
      pending.resolved = TimedDecision{retry ? Decision::Retry : Decision::Abort, s.last_ts};
    } else {
      pending.awaiting_user = true;
      append_locked(s, t, ts,
                    ConfirmationRequestPayload{update.failure_category, t.machine.retries_used, config_.max_retries});
    }
    t.decision = pending;
  }
  if (t.machine.terminal_outcome) finish_locked(s, t, ts);

  lock.unlock();
  changed_.notify_all();
}

void Coordinator::handle_confirmation(const std::string& task_id, Decision decision,
                                      std::optional<std::int64_t> ts_ms) {
  std::unique_lock lock(mu_);
  Task& t = task_locked(task_id);
  if (!t.decision || !t.decision->awaiting_user || t.decision->resolved) {
    throw Error(ErrorCode::NoPendingConfirmation, task_id + " is not waiting for a confirmation");
  }
  Session& s = session_locked(t.session_id);
  const std::int64_t ts = stamp_locked(s, ts_ms);
  append_locked(s, t, ts, ConfirmationResponsePayload{decision});
  Decision effective = decision;
  if (effective == Decision::Retry && t.machine.retries_used >= config_.max_retries) effective = Decision::Abort;
  t.decision->resolved = TimedDecision{effective, s.last_ts};
  lock.unlock();
  changed_.notify_all();
}

void Coordinator::maybe_time_out_locked(Task& t) {
  if (config_.confirm_timeout.count() <= 0 || !t.decision || !t.decision->awaiting_user || t.decision->resolved) {
    return;
  }
  if (std::chrono::steady_clock::now() - t.decision->asked_at < config_.confirm_timeout) return;
  Session& s = session_locked(t.session_id);
  const std::int64_t ts = stamp_locked(s, std::nullopt);
  append_locked(s, t, ts, ConfirmationResponsePayload{Decision::Abort});
  t.decision->resolved = TimedDecision{Decision::Abort, s.last_ts};
}

std::optional<TimedDecision> Coordinator::await_decision(const std::string& task_id,
                                                         std::chrono::milliseconds wait) {
  std::unique_lock lock(mu_);
  const auto deadline = std::chrono::steady_clock::now() + wait;
  while (true) {
    Task& t = task_locked(task_id);
    maybe_time_out_locked(t);
    if (t.decision && t.decision->resolved) return t.decision->resolved;
    if (t.terminal_ts) return TimedDecision{Decision::Abort, *t.terminal_ts};
    if (stopping_ || std::chrono::steady_clock::now() >= deadline) return std::nullopt;
    auto slice = std::min<std::chrono::steady_clock::time_point>(
        deadline, std::chrono::steady_clock::now() + std::chrono::milliseconds(100));
    changed_.wait_until(lock, slice);
  }
}

StreamBatch Coordinator::read_stream(const std::string& session_id, std::uint64_t from_seq, StreamView view,
                                     bool stop_at_result, std::chrono::milliseconds wait) {
  std::unique_lock lock(mu_);
  const auto deadline = std::chrono::steady_clock::now() + wait;
  while (true) {
    const Session& s = session_locked(session_id);
    StreamBatch batch;
    const bool hide_internal = view == StreamView::User && s.spec.condition == Condition::Hidden;
    for (std::size_t i = from_seq > 0 ? from_seq - 1 : 0; i < s.log.size(); ++i) {
      const StreamEvent& ev = s.log[i];
      if (hide_internal && ev.kind() == StreamKind::StateTransition) continue;
      batch.events.push_back(ev);
      if (stop_at_result && ev.kind() == StreamKind::TaskResult) {
        // Keep the terminal message that follows the result.
        if (i + 1 < s.log.size() && s.log[i + 1].kind() == StreamKind::Externalization) {
          batch.events.push_back(s.log[i + 1]);
        }
        batch.end = true;
        break;
      }
    }
    if (!batch.events.empty() || stopping_) {
      batch.end = batch.end || stopping_;
      return batch;
    }
    if (changed_.wait_until(lock, deadline) == std::cv_status::timeout) return batch;
  }
}

std::vector<StreamEvent> Coordinator::session_log(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  return session_locked(session_id).log;
}

SessionSpec Coordinator::session_spec(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  return session_locked(session_id).spec;
}

std::optional<TrialRecord> Coordinator::trial_record(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw Error(ErrorCode::UnknownTask, task_id);
  return it->second.record;
}

nlohmann::json Coordinator::session_summary(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  const Session& s = session_locked(session_id);
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& [id, t] : tasks_) {
    if (t.session_id != session_id) continue;
    nlohmann::json tj{{"task_id", id},
                      {"object", to_string(t.intent.object)},
                      {"state", to_string(t.machine.current)},
                      {"dispatched", t.dispatched},
                      {"retries_used", t.machine.retries_used}};
    if (t.machine.terminal_outcome) tj["outcome"] = t.machine.terminal_outcome->success ? "SUCCESS" : "FAILURE";
    tasks.push_back(std::move(tj));
  }
  return {{"session_id", s.id},
          {"participant_id", s.spec.participant_id},
          {"condition", to_string(s.spec.condition)},
          {"period", s.spec.period},
          {"ready_ts_ms", s.ready_ts},
          {"last_seq", s.log.size()},
          {"active_task", s.active_task ? nlohmann::json(*s.active_task) : nlohmann::json(nullptr)},
          {"tasks", tasks}};
}

}  // namespace statebridge
