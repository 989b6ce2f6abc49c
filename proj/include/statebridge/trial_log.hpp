#pragma once

// Persisted per-trial records: one JSON object per line, append-only.

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "statebridge/protocol.hpp"

namespace statebridge {

struct TransitionStamp {
  ExecutionState to = ExecutionState::Idle;
  std::int64_t ts_ms = 0;

  bool operator==(const TransitionStamp&) const = default;
};

struct TrialRecord {
  std::string trial_id;
  std::string participant_id;
  Condition condition = Condition::Hidden;
  int period = 1;
  ObjectCategory object = ObjectCategory::Water;
  bool success = false;
  std::optional<FailureCategory> failure_category;
  std::optional<std::int64_t> ready_ts_ms;
  std::optional<std::int64_t> dispatch_ts_ms;
  std::optional<std::int64_t> terminal_ts_ms;
  int grasp_attempts = 0;
  std::vector<TransitionStamp> transitions;

  bool operator==(const TrialRecord&) const = default;
};

std::string encode_trial(const TrialRecord& record);
/// Throws Error{ParseError | SchemaViolation}.
TrialRecord decode_trial(std::string_view line);

/// Append-only trial file, idempotent per trial_id (including ids already in
/// the file when it is opened). Thread-safe.
class TrialLog {
 public:
  explicit TrialLog(std::filesystem::path path);

  /// Returns false when the trial was already persisted. Throws Error{StorageError}.
  bool append(const TrialRecord& record);

  const std::filesystem::path& path() const { return path_; }

  static std::vector<TrialRecord> read_all(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  std::mutex mu_;
  std::set<std::string> persisted_;
};

}  // namespace statebridge
