#include "statebridge/log.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string_view>

namespace statebridge {

namespace {

LogLevel from_env() {
  const char* v = std::getenv("STATEBRIDGE_LOG");
  if (!v) return LogLevel::Warn;
  const std::string_view s(v);
  if (s == "error") return LogLevel::Error;
  if (s == "info") return LogLevel::Info;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

std::atomic<int>& threshold() {
  static std::atomic<int> t{static_cast<int>(from_env())};
  return t;
}

constexpr const char* kNames[] = {"error", "warn", "info", "debug"};

}  // namespace

LogLevel log_threshold() { return static_cast<LogLevel>(threshold().load()); }

void set_log_threshold(LogLevel level) { threshold() = static_cast<int>(level); }

void log_at(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > threshold().load()) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now().time_since_epoch()).count();
  std::cerr << now % 100000 << " [statebridge " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace statebridge
