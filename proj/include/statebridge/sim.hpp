#pragma once

// Simulated execution agent: walks the task phases on a virtual clock,
// samples lognormal phase durations, injects failures and counts grasp
// attempts. Transport-agnostic; milestones go out through an AgentLink.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "statebridge/protocol.hpp"
#include "statebridge/rng.hpp"
#include "statebridge/state.hpp"

namespace statebridge {

struct DurationSpec {
  double median_s = 1.0;
  double sigma = 0.0;
};

struct PhaseConfig {
  DurationSpec duration;
  double failure_probability = 0.0;
  std::map<FailureCategory, double> category_weights;
};

/// Phases that carry a duration and failure model.
inline constexpr std::array<ExecutionState, 5> kTimedPhases = {
    ExecutionState::Navigating, ExecutionState::Searching, ExecutionState::Grasping,
    ExecutionState::Delivering, ExecutionState::Recovering};

struct SimConfig {
  std::map<ExecutionState, PhaseConfig> phases;
  double grasp_success_probability = 1.0;
  int grasp_attempt_cap = 3;  // in-phase attempts before GRASP_FAILURE
  int max_retries = kDefaultMaxRetries;
  double time_scale = 0.0;  // virtual ms per real ms; 0 = instantaneous
  std::uint64_t rng_seed = 1;

  const PhaseConfig& phase(ExecutionState s) const;

  /// Throws Error{ConfigError}.
  void validate() const;

  /// All failure probabilities zero.
  static SimConfig failfree();
  /// Calibrated against the aggregate timing means of the reference study.
  static SimConfig paper_cal();
};

SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimConfig& c);

/// Logical time in ms. With a positive time scale each advance also sleeps the
/// corresponding wall time.
class VirtualClock {
 public:
  explicit VirtualClock(std::int64_t start_ms = 0, double time_scale = 0.0)
      : now_ms_(start_ms), time_scale_(time_scale) {}

  std::int64_t now() const { return now_ms_; }
  void advance(std::int64_t delta_ms);
  /// Moves forward to `ts_ms`; never moves backwards.
  void advance_to(std::int64_t ts_ms);
  /// Moves forward without sleeping, for time that elapsed elsewhere.
  void jump_to(std::int64_t ts_ms);

 private:
  std::int64_t now_ms_;
  double time_scale_;
};

/// Lognormal draw in ms, at least 1. Throws Error{ConfigError} for a
/// non-positive median or negative sigma.
std::int64_t sample_duration(const DurationSpec& spec, Rng& rng);
std::int64_t sample_phase_duration(ExecutionState phase, const SimConfig& config, Rng& rng);

/// Consumes two uniforms regardless of the outcome.
std::optional<FailureCategory> inject_failure(ExecutionState phase, const SimConfig& config, Rng& rng);

struct GraspResult {
  bool success = false;
  int attempts = 0;
  std::int64_t elapsed_ms = 0;
};

/// Independent attempts until success or `grasp_attempt_cap`; each attempt
/// takes one GRASPING duration draw.
GraspResult grasp_loop(const SimConfig& config, Rng& rng);

struct ReportedTransition {
  ExecutionState from = ExecutionState::Idle;
  ExecutionState to = ExecutionState::Navigating;
  std::optional<FailureCategory> failure_category;
  std::int64_t ts_ms = 0;
  int grasp_attempts = 0;  // cumulative for the task

  bool operator==(const ReportedTransition&) const = default;
};

struct TimedDecision {
  Decision decision = Decision::Retry;
  std::int64_t ts_ms = 0;
};

/// Where the agent sends milestones and gets recovery decisions.
class AgentLink {
 public:
  virtual ~AgentLink() = default;
  virtual void report(const ReportedTransition& t) = 0;
  /// Blocks until a RETRY/ABORT decision exists for the failure just reported.
  virtual TimedDecision await_decision(const ReportedTransition& failure) = 0;
};

using ApprovalSource = std::function<TimedDecision(const ReportedTransition& failure)>;

/// In-process link that records every transition and asks `approvals` for decisions.
class RecordingLink : public AgentLink {
 public:
  explicit RecordingLink(ApprovalSource approvals) : approvals_(std::move(approvals)) {}

  void report(const ReportedTransition& t) override { transitions_.push_back(t); }
  TimedDecision await_decision(const ReportedTransition& failure) override { return approvals_(failure); }

  const std::vector<ReportedTransition>& transitions() const { return transitions_; }

 private:
  ApprovalSource approvals_;
  std::vector<ReportedTransition> transitions_;
};

/// Approves every retry immediately (the hidden-execution server policy).
ApprovalSource auto_approve();

struct SimOutcome {
  TerminalOutcome outcome;
  int grasp_attempts = 0;
  std::map<ExecutionState, std::int64_t> phase_durations;  // ms spent per state
  std::vector<ReportedTransition> transitions;
};

/// Runs one task from dispatch at `start_ms` to a terminal transition.
/// Deterministic in (intent, config, seed, decision sequence).
SimOutcome run_task(const TaskIntent& intent, const SimConfig& config, std::uint64_t seed,
                    AgentLink& link, std::int64_t start_ms = 0);

}  // namespace statebridge
