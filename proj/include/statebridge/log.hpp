#pragma once

#include <string>

namespace statebridge {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Threshold from STATEBRIDGE_LOG (error|warn|info|debug), default warn.
LogLevel log_threshold();
void set_log_threshold(LogLevel level);

/// One line to stderr when `level` passes the threshold.
void log_at(LogLevel level, const std::string& message);

}  // namespace statebridge
