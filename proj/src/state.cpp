#include "statebridge/state.hpp"

#include <string>

#include "statebridge/error.hpp"

namespace statebridge {

std::string_view to_string(ExecutionState s) {
  switch (s) {
    case ExecutionState::Idle: return "IDLE";
    case ExecutionState::Navigating: return "NAVIGATING";
    case ExecutionState::Searching: return "SEARCHING";
    case ExecutionState::Grasping: return "GRASPING";
    case ExecutionState::Failed: return "FAILED";
    case ExecutionState::Recovering: return "RECOVERING";
    case ExecutionState::Delivering: return "DELIVERING";
  }
  return "?";
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Dispatch: return "DISPATCH";
    case EventKind::ArrivedAtTarget: return "ARRIVED_AT_TARGET";
    case EventKind::ObjectFound: return "OBJECT_FOUND";
    case EventKind::GraspSuccess: return "GRASP_SUCCESS";
    case EventKind::ArrivedAtUser: return "ARRIVED_AT_USER";
    case EventKind::Failure: return "FAILURE";
    case EventKind::RetryApproved: return "RETRY_APPROVED";
    case EventKind::Abort: return "ABORT";
    case EventKind::RecoveryDone: return "RECOVERY_DONE";
  }
  return "?";
}

std::string_view to_string(FailureCategory c) {
  switch (c) {
    case FailureCategory::NavigationError: return "NAVIGATION_ERROR";
    case FailureCategory::GraspFailure: return "GRASP_FAILURE";
    case FailureCategory::SystemHang: return "SYSTEM_HANG";
    case FailureCategory::MediatorError: return "MEDIATOR_ERROR";
    case FailureCategory::Other: return "OTHER";
  }
  return "?";
}

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> parse_by_name(std::string_view s, const std::array<Enum, N>& all) {
  for (auto v : all) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

}  // namespace

std::optional<ExecutionState> parse_state(std::string_view s) { return parse_by_name(s, kAllStates); }

std::optional<EventKind> parse_event_kind(std::string_view s) {
  return parse_by_name(s, kAllEventKinds);
}

std::optional<FailureCategory> parse_failure_category(std::string_view s) {
  return parse_by_name(s, kAllFailureCategories);
}

StateSet legal_successors(ExecutionState state) {
  using S = ExecutionState;
  switch (state) {
    case S::Idle: return {S::Navigating};
    case S::Navigating: return {S::Searching, S::Failed};
    case S::Searching: return {S::Grasping, S::Failed};
    case S::Grasping: return {S::Delivering, S::Failed};
    case S::Delivering: return {S::Idle, S::Failed};
    case S::Failed: return {S::Recovering, S::Idle};
    case S::Recovering: return {S::Navigating, S::Searching, S::Grasping, S::Delivering, S::Failed};
  }
  return {};
}

TransitionEvent TransitionEvent::of(EventKind kind) {
  if (kind == EventKind::Failure) {
    throw Error(ErrorCode::InvalidEvent, "FAILURE requires a failure category");
  }
  return TransitionEvent(kind, std::nullopt);
}

TransitionEvent TransitionEvent::failure(FailureCategory category) {
  return TransitionEvent(EventKind::Failure, category);
}

TaskMachine new_machine() { return TaskMachine{}; }

namespace {

[[noreturn]] void illegal(const TaskMachine& m, const TransitionEvent& e) {
  throw Error(ErrorCode::IllegalTransition, std::string(to_string(e.kind())) + " in state " +
                                                std::string(to_string(m.current)));
}

}  // namespace

TaskMachine apply_event(const TaskMachine& machine, const TransitionEvent& event, int max_retries) {
  using S = ExecutionState;
  TaskMachine next = machine;
  const S cur = machine.current;

  auto advance = [&](S expected, S to) {
    if (cur != expected) illegal(machine, event);
    next.current = to;
  };

  switch (event.kind()) {
    case EventKind::Dispatch:
      advance(S::Idle, S::Navigating);
      next.resume_from.reset();
      next.retries_used = 0;
      next.terminal_outcome.reset();
      next.last_failure.reset();
      break;
    case EventKind::ArrivedAtTarget: advance(S::Navigating, S::Searching); break;
    case EventKind::ObjectFound: advance(S::Searching, S::Grasping); break;
    case EventKind::GraspSuccess: advance(S::Grasping, S::Delivering); break;
    case EventKind::ArrivedAtUser:
      advance(S::Delivering, S::Idle);
      next.terminal_outcome = TerminalOutcome::succeeded();
      break;
    case EventKind::Failure:
      if (is_active_phase(cur)) {
        next.resume_from = cur;
      } else if (cur != S::Recovering) {
        illegal(machine, event);
      }
      next.current = S::Failed;
      next.last_failure = event.failure_category();
      break;
    case EventKind::RetryApproved:
      if (cur != S::Failed) illegal(machine, event);
      if (machine.retries_used >= max_retries) {
        throw Error(ErrorCode::RetriesExhausted,
                    "retries_used=" + std::to_string(machine.retries_used) +
                        " max_retries=" + std::to_string(max_retries));
      }
      next.current = S::Recovering;
      next.retries_used += 1;
      break;
    case EventKind::Abort:
      advance(S::Failed, S::Idle);
      next.terminal_outcome =
          TerminalOutcome::failed(machine.last_failure.value_or(FailureCategory::Other));
      break;
    case EventKind::RecoveryDone:
      if (cur != S::Recovering || !machine.resume_from) illegal(machine, event);
      next.current = *machine.resume_from;
      break;
  }
  return next;
}

std::optional<TransitionEvent> infer_event(const TaskMachine& machine, ExecutionState to,
                                           std::optional<FailureCategory> category) {
  using S = ExecutionState;
  const S from = machine.current;
  if (!legal_successors(from).contains(to)) return std::nullopt;
  if (to == S::Failed) {
    if (!category) return std::nullopt;
    return TransitionEvent::failure(*category);
  }
  if (category) return std::nullopt;
  switch (from) {
    case S::Idle: return TransitionEvent::of(EventKind::Dispatch);
    case S::Navigating: return TransitionEvent::of(EventKind::ArrivedAtTarget);
    case S::Searching: return TransitionEvent::of(EventKind::ObjectFound);
    case S::Grasping: return TransitionEvent::of(EventKind::GraspSuccess);
    case S::Delivering: return TransitionEvent::of(EventKind::ArrivedAtUser);
    case S::Failed:
      return TransitionEvent::of(to == S::Recovering ? EventKind::RetryApproved : EventKind::Abort);
    case S::Recovering:
      if (machine.resume_from != to) return std::nullopt;
      return TransitionEvent::of(EventKind::RecoveryDone);
  }
  return std::nullopt;
}

}  // namespace statebridge
