#pragma once

// Task-level semantic state machine shared by the server, the simulated
// execution agent and the mediator.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace statebridge {

enum class ExecutionState : std::uint8_t {
  Idle,
  Navigating,
  Searching,
  Grasping,
  Failed,
  Recovering,
  Delivering,
};

inline constexpr std::array<ExecutionState, 7> kAllStates = {
    ExecutionState::Idle,     ExecutionState::Navigating, ExecutionState::Searching,
    ExecutionState::Grasping, ExecutionState::Failed,     ExecutionState::Recovering,
    ExecutionState::Delivering,
};

enum class EventKind : std::uint8_t {
  Dispatch,
  ArrivedAtTarget,
  ObjectFound,
  GraspSuccess,
  ArrivedAtUser,
  Failure,
  RetryApproved,
  Abort,
  RecoveryDone,
};

inline constexpr std::array<EventKind, 9> kAllEventKinds = {
    EventKind::Dispatch,      EventKind::ArrivedAtTarget, EventKind::ObjectFound,
    EventKind::GraspSuccess,  EventKind::ArrivedAtUser,   EventKind::Failure,
    EventKind::RetryApproved, EventKind::Abort,           EventKind::RecoveryDone,
};

enum class FailureCategory : std::uint8_t {
  NavigationError,
  GraspFailure,
  SystemHang,
  MediatorError,
  Other,
};

inline constexpr std::array<FailureCategory, 5> kAllFailureCategories = {
    FailureCategory::NavigationError, FailureCategory::GraspFailure, FailureCategory::SystemHang,
    FailureCategory::MediatorError,   FailureCategory::Other,
};

std::string_view to_string(ExecutionState s);
std::string_view to_string(EventKind k);
std::string_view to_string(FailureCategory c);

// Parsers accept the upper-case wire names only.
std::optional<ExecutionState> parse_state(std::string_view s);
std::optional<EventKind> parse_event_kind(std::string_view s);
std::optional<FailureCategory> parse_failure_category(std::string_view s);

/// True for the four phases in which the robot is doing task work.
constexpr bool is_active_phase(ExecutionState s) {
  return s == ExecutionState::Navigating || s == ExecutionState::Searching ||
         s == ExecutionState::Grasping || s == ExecutionState::Delivering;
}

/// Small bitmask over ExecutionState.
class StateSet {
 public:
  constexpr StateSet() = default;
  constexpr StateSet(std::initializer_list<ExecutionState> states) {
    for (auto s : states) bits_ |= bit(s);
  }

  constexpr bool contains(ExecutionState s) const { return (bits_ & bit(s)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const {
    int n = 0;
    for (auto s : kAllStates) n += contains(s) ? 1 : 0;
    return n;
  }
  constexpr bool operator==(const StateSet&) const = default;

 private:
  static constexpr std::uint8_t bit(ExecutionState s) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(s));
  }
  std::uint8_t bits_ = 0;
};

StateSet legal_successors(ExecutionState state);

class TransitionEvent {
 public:
  static TransitionEvent of(EventKind kind);
  static TransitionEvent failure(FailureCategory category);

  EventKind kind() const { return kind_; }
  std::optional<FailureCategory> failure_category() const { return category_; }

  bool operator==(const TransitionEvent&) const = default;

 private:
  TransitionEvent(EventKind kind, std::optional<FailureCategory> category)
      : kind_(kind), category_(category) {}

  EventKind kind_;
  std::optional<FailureCategory> category_;
};

struct TerminalOutcome {
  bool success = false;
  std::optional<FailureCategory> category;  // set iff !success

  static TerminalOutcome succeeded() { return {true, std::nullopt}; }
  static TerminalOutcome failed(FailureCategory c) { return {false, c}; }

  bool operator==(const TerminalOutcome&) const = default;
};

inline constexpr int kDefaultMaxRetries = 2;

struct TaskMachine {
  ExecutionState current = ExecutionState::Idle;
  std::optional<ExecutionState> resume_from;
  int retries_used = 0;
  std::optional<TerminalOutcome> terminal_outcome;
  // Category of the most recent FAILURE; becomes the terminal category on abort.
  std::optional<FailureCategory> last_failure;

  bool operator==(const TaskMachine&) const = default;
};

TaskMachine new_machine();

/// Pure transition function. Throws Error{IllegalTransition} when the event
/// is not accepted in the current state and Error{RetriesExhausted} for a
/// RETRY_APPROVED once max_retries retries have been spent.
TaskMachine apply_event(const TaskMachine& machine, const TransitionEvent& event,
                        int max_retries = kDefaultMaxRetries);

/// The event that moves `machine` into `to`, if any. Used by observers that
/// only see (from, to) pairs on the wire.
std::optional<TransitionEvent> infer_event(const TaskMachine& machine, ExecutionState to,
                                           std::optional<FailureCategory> category);

}  // namespace statebridge
