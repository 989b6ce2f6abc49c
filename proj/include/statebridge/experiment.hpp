#pragma once

// End-to-end batch runner: server, execution agent and scripted participants
// talking over loopback HTTP, one trial at a time.
//
// Config file layout (every section optional):
//   {
//     "sim":        SimConfig, may start from {"preset": "failfree" | "paper_cal"},
//     "user":       UserAgentPolicy,
//     "server":     {"host", "port", "max_retries", "confirm_timeout_ms", "templates"},
//     "experiment": {"participants", "seed", "out_dir"}
//   }

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "statebridge/client.hpp"
#include "statebridge/coordinator.hpp"
#include "statebridge/mediator.hpp"
#include "statebridge/metrics.hpp"
#include "statebridge/sim.hpp"
#include "statebridge/stats.hpp"

namespace statebridge {

struct ExperimentConfig {
  SimConfig sim = SimConfig::paper_cal();
  UserAgentPolicy user;
  ServerConfig server;
  std::optional<std::filesystem::path> templates_path;
  int participants = 30;
  std::uint64_t seed = 7;
  std::filesystem::path out_dir = "out";
};

/// Relative template paths resolve against `base_dir`. Throws Error{ConfigError}.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const ExperimentConfig& c);

struct TrialPlan {
  std::string participant_id;
  Condition condition = Condition::Hidden;
  int period = 1;
  ObjectCategory object = ObjectCategory::Water;
  std::uint64_t participant_seed = 0;  // traits shared by both trials of a participant
  std::uint64_t sim_seed = 0;
  std::uint64_t user_seed = 0;
};

/// Two trials per participant in counterbalanced order, or one per participant
/// when `only` is set.
std::vector<TrialPlan> plan_batch(int participants, std::uint64_t seed, std::optional<Condition> only = std::nullopt);

struct BatchOptions {
  std::optional<Condition> only_condition;
  bool split_process = false;
  std::filesystem::path self_exe;  // needed for split_process
  bool write_transcripts = true;
};

struct BatchResult {
  std::vector<TrialPlan> plan;
  std::vector<TrialRecord> trials;
  std::vector<std::string> session_ids;  // parallel to plan
  std::optional<BatchReport> report;
  bool all_terminal = false;
  double wall_seconds = 0.0;
};

/// Writes <out>/trials.ndjson, <out>/transcripts/<session>.ndjson and, for
/// two-condition batches, <out>/report.json and <out>/report.txt.
BatchResult run_batch(const ExperimentConfig& config, const BatchOptions& options = {});

/// The scripted participant's submission for a trial (utterance, request
/// time, pre-dispatch acknowledgement).
SubmitRequest scripted_submission(const TrialPlan& plan, const UserAgentPolicy& user);

/// Runs one scripted trial against a live server. Returns the session id.
std::string run_scripted_trial(ApiClient& client, const TrialPlan& plan, const UserAgentPolicy& user);

/// The trial record run_scripted_trial would produce, computed in-process
/// without a server. Used for calibration and cross-checks.
TrialRecord simulate_trial(const TrialPlan& plan, const ExperimentConfig& config, const std::string& trial_id);
std::vector<TrialRecord> simulate_batch(const ExperimentConfig& config);

struct LiveOptions {
  Condition condition = Condition::External;
  std::optional<std::string> utterance;
  bool scripted_user = false;  // answer confirmations with the configured policy
};

/// Serves a real-time session for a stream client. With an utterance, submits
/// it, prints the user-view stream until the result and returns; otherwise
/// serves until SIGINT/SIGTERM. Throws Error{PortInUse}.
void run_live(const ExperimentConfig& config, const LiveOptions& options);

/// Writes report.json and report.txt into `out_dir`.
void write_report(const BatchReport& report, const std::filesystem::path& out_dir);

}  // namespace statebridge
