#pragma once

// Externalization policy: what the user hears and sees about the hidden
// execution, under each study condition, plus a scripted stand-in for the
// participant in headless runs.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "statebridge/protocol.hpp"
#include "statebridge/rng.hpp"
#include "statebridge/sim.hpp"

namespace statebridge {

using ExternalizationMessage = ExternalizationPayload;

/// User-facing phrasing keyed by (state, outcome). Keys:
///   NAVIGATING SEARCHING GRASPING DELIVERING FAILED RECOVERING
///   IDLE:SUCCESS IDLE:FAILURE RESULT:SUCCESS RESULT:FAILURE
/// `{object}` expands to the object noun, `{failure}` to a short description
/// of the failure category.
class MessageTemplates {
 public:
  static const std::vector<std::string>& keys();
  static MessageTemplates defaults();
  /// Defaults overridden by the entries of `j`; unknown keys are a ConfigError.
  static MessageTemplates from_json(const nlohmann::json& j);
  static MessageTemplates load(const std::filesystem::path& path);

  const std::string& raw(const std::string& key) const;
  std::string render(const std::string& key, ObjectCategory object,
                     std::optional<FailureCategory> failure = std::nullopt) const;

 private:
  std::map<std::string, std::string> entries_;
};

std::string_view failure_phrase(FailureCategory c);

/// Progress display value after entering `state`. FAILED and RECOVERING hold
/// `last`; IDLE is 0 before dispatch (last == 0) and 1 once the task ends.
double progress_fraction(ExecutionState state, double last);

struct MessageContext {
  ObjectCategory object = ObjectCategory::Water;
  double last_progress = 0.0;
  const MessageTemplates* templates = nullptr;  // defaults when null
};

/// Applies the condition policy to one STATE_TRANSITION or TASK_RESULT event.
/// HIDDEN yields a message only for TASK_RESULT; EXTERNAL yields one for every
/// transition and for the result.
std::optional<ExternalizationMessage> externalize(const StreamEvent& event, Condition condition,
                                                  const MessageContext& ctx);

struct UserAgentPolicy {
  DurationSpec request_latency{34.6, 0.12};   // readiness -> structured request, per participant
  double request_trial_sigma = 0.05;           // trial-to-trial spread around the participant's latency
  DurationSpec dispatch_confirm_latency{11.4, 0.15};  // mediator prompt -> user acknowledgement
  DurationSpec confirm_latency{2.0, 0.30};     // failure prompt -> RETRY/ABORT
  double retry_probability = 1.0;
  double dispatch_accept_probability = 1.0;

  void validate() const;
};

UserAgentPolicy user_policy_from_json(const nlohmann::json& j);
nlohmann::json to_json(const UserAgentPolicy& p);

struct UserAnswer {
  Decision decision = Decision::Retry;
  std::int64_t latency_ms = 0;
};

/// Decision for one CONFIRMATION_REQUEST: RETRY with probability
/// retry_probability, after a confirm_latency draw. Always consumes the same
/// number of draws.
UserAnswer scripted_user(const UserAgentPolicy& policy, const ConfirmationRequestPayload& request, Rng& rng);

struct DispatchAck {
  bool confirmed = true;
  std::int64_t elapsed_ms = 0;
};

using DispatchAckSource = std::function<DispatchAck(const TaskIntent&)>;

/// The pre-dispatch prompt/acknowledge round trip. HIDDEN skips it.
DispatchAck pre_dispatch_confirmation(const TaskIntent& intent, Condition condition,
                                      const DispatchAckSource& user);

/// Scripted acknowledgement drawing from `rng`, which must outlive the source.
DispatchAckSource scripted_dispatch_ack(const UserAgentPolicy& policy, Rng& rng);

/// Time to produce a request: the participant's typical latency (drawn from
/// `participant`) scaled by a per-trial lognormal factor (drawn from `trial`).
std::int64_t scripted_request_latency(const UserAgentPolicy& policy, Rng& participant, Rng& trial);

/// A natural-language request for `object`, phrased at random.
std::string scripted_utterance(ObjectCategory object, Rng& rng);

}  // namespace statebridge
