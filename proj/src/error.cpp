#include "statebridge/error.hpp"

namespace statebridge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::RetriesExhausted: return "RetriesExhausted";
    case ErrorCode::InvalidEvent: return "InvalidEvent";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::NoIntent: return "NoIntent";
    case ErrorCode::SessionBusy: return "SessionBusy";
    case ErrorCode::AgentUnavailable: return "AgentUnavailable";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::NoPendingConfirmation: return "NoPendingConfirmation";
    case ErrorCode::StorageError: return "StorageError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ServerUnreachable: return "ServerUnreachable";
    case ErrorCode::MalformedTrial: return "MalformedTrial";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidDf: return "InvalidDf";
    case ErrorCode::UnpairedData: return "UnpairedData";
    case ErrorCode::PortInUse: return "PortInUse";
  }
  return "Unknown";
}

std::optional<ErrorCode> parse_error_code(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::PortInUse); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

}  // namespace statebridge
