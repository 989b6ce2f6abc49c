#pragma once

// Wire schema for everything that crosses the coordination-server boundary.
// One StreamEvent is rendered as one line of JSON with a fixed key order:
//   seq, ts_ms, session_id, task_id, kind, payload
// See docs/protocol.md for an annotated example of each kind.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "statebridge/state.hpp"

namespace statebridge {

enum class Condition : std::uint8_t { Hidden, External };
enum class ObjectCategory : std::uint8_t { Water, Chips, Fruit };
enum class Decision : std::uint8_t { Retry, Abort };

inline constexpr std::array<ObjectCategory, 3> kAllObjects = {
    ObjectCategory::Water, ObjectCategory::Chips, ObjectCategory::Fruit};

std::string_view to_string(Condition c);
std::string_view to_string(ObjectCategory o);
std::string_view to_string(Decision d);
/// Lower-case noun used in user-facing text ("water", "chips", "fruit").
std::string_view object_noun(ObjectCategory o);

// Condition parsing is case-insensitive so the CLI can take `hidden|external`.
std::optional<Condition> parse_condition(std::string_view s);
std::optional<ObjectCategory> parse_object(std::string_view s);
std::optional<Decision> parse_decision(std::string_view s);

struct TaskIntent {
  ObjectCategory object = ObjectCategory::Water;
  std::string deliver_to = "user";
  std::string raw_utterance;

  bool operator==(const TaskIntent&) const = default;
};

enum class StreamKind : std::uint8_t {
  StateTransition,
  Externalization,
  ConfirmationRequest,
  ConfirmationResponse,
  TaskResult,
};

inline constexpr std::array<StreamKind, 5> kAllStreamKinds = {
    StreamKind::StateTransition, StreamKind::Externalization, StreamKind::ConfirmationRequest,
    StreamKind::ConfirmationResponse, StreamKind::TaskResult};

std::string_view to_string(StreamKind k);
std::optional<StreamKind> parse_stream_kind(std::string_view s);

// failure_category is present iff to == FAILED.
struct StateTransitionPayload {
  ExecutionState from = ExecutionState::Idle;
  ExecutionState to = ExecutionState::Navigating;
  std::optional<FailureCategory> failure_category;

  bool operator==(const StateTransitionPayload&) const = default;
};

struct ExternalizationPayload {
  ExecutionState state = ExecutionState::Idle;
  std::string text;
  double progress = 0.0;  // [0, 1]
  bool requires_response = false;

  bool operator==(const ExternalizationPayload&) const = default;
};

// failure_category is mandatory on the wire; it is optional here only so that
// a malformed request can be constructed and rejected by encode_event.
struct ConfirmationRequestPayload {
  std::optional<FailureCategory> failure_category;
  int retries_used = 0;
  int max_retries = 0;

  bool operator==(const ConfirmationRequestPayload&) const = default;
};

struct ConfirmationResponsePayload {
  Decision decision = Decision::Retry;

  bool operator==(const ConfirmationResponsePayload&) const = default;
};

// failure_category is present iff !success.
struct TaskResultPayload {
  bool success = true;
  std::optional<FailureCategory> failure_category;
  int grasp_attempts = 0;

  bool operator==(const TaskResultPayload&) const = default;
};

using Payload = std::variant<StateTransitionPayload, ExternalizationPayload,
                             ConfirmationRequestPayload, ConfirmationResponsePayload,
                             TaskResultPayload>;

struct StreamEvent {
  std::uint64_t seq = 0;
  std::int64_t ts_ms = 0;
  std::string session_id;
  std::string task_id;
  Payload payload;

  StreamKind kind() const { return static_cast<StreamKind>(payload.index()); }

  template <typename P>
  const P* as() const {
    return std::get_if<P>(&payload);
  }

  bool operator==(const StreamEvent&) const = default;
};

/// Throws Error{InvalidEvent} when the payload breaks its kind's schema.
void validate_event(const StreamEvent& event);

/// Single line, no trailing newline.
std::string encode_event(const StreamEvent& event);

/// Throws Error{ParseError | UnknownKind | SchemaViolation}.
StreamEvent decode_event(std::string_view line);

}  // namespace statebridge
