#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace statebridge {

enum class ErrorCode {
  IllegalTransition,
  RetriesExhausted,
  InvalidEvent,
  ParseError,
  UnknownKind,
  SchemaViolation,
  NoIntent,
  SessionBusy,
  AgentUnavailable,
  UnknownSession,
  UnknownTask,
  NoPendingConfirmation,
  StorageError,
  ConfigError,
  ServerUnreachable,
  MalformedTrial,
  LengthMismatch,
  InvalidDf,
  UnpairedData,
  PortInUse,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view name);

// Every failure surfaced by the library carries one of the codes above so the
// HTTP layer can map it onto a status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace statebridge
