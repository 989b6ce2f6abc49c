#include "statebridge/mediator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "statebridge/error.hpp"

namespace statebridge {

const std::vector<std::string>& MessageTemplates::keys() {
  static const std::vector<std::string> k = {
      "NAVIGATING", "SEARCHING",    "GRASPING",     "DELIVERING",     "FAILED",
      "RECOVERING", "IDLE:SUCCESS", "IDLE:FAILURE", "RESULT:SUCCESS", "RESULT:FAILURE",
  };
  return k;
}

MessageTemplates MessageTemplates::defaults() {
  MessageTemplates t;
  t.entries_ = {
      {"NAVIGATING", "I'm heading out to find your {object}."},
      {"SEARCHING", "I've reached the kitchen and I'm looking for your {object}."},
      {"GRASPING", "I found your {object} and I'm picking it up now."},
      {"DELIVERING", "I have your {object} and I'm on my way back to you."},
      {"FAILED", "Something went wrong while getting your {object}: {failure}. Should I try again?"},
      {"RECOVERING", "Okay, I'm trying again to get your {object}."},
      {"IDLE:SUCCESS", "I'm back with your {object}."},
      {"IDLE:FAILURE", "I've stopped trying to get your {object}."},
      {"RESULT:SUCCESS", "I've brought your {object}. Enjoy!"},
      {"RESULT:FAILURE", "Sorry, I couldn't bring your {object} this time."},
  };
  return t;
}

MessageTemplates MessageTemplates::from_json(const nlohmann::json& j) {
  MessageTemplates t = defaults();
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "template file must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!t.entries_.count(key)) throw Error(ErrorCode::ConfigError, "unknown template key '" + key + "'");
    if (!value.is_string()) throw Error(ErrorCode::ConfigError, "template '" + key + "' must be a string");
    t.entries_[key] = value.get<std::string>();
  }
  return t;
}

MessageTemplates MessageTemplates::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open template file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

const std::string& MessageTemplates::raw(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorCode::ConfigError, "no template for key '" + key + "'");
  return it->second;
}

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

std::string MessageTemplates::render(const std::string& key, ObjectCategory object,
                                     std::optional<FailureCategory> failure) const {
  std::string text = raw(key);
  replace_all(text, "{object}", object_noun(object));
  replace_all(text, "{failure}", failure ? failure_phrase(*failure) : "an unknown problem");
  return text;
}

std::string_view failure_phrase(FailureCategory c) {
  switch (c) {
    case FailureCategory::NavigationError: return "I couldn't find my way";
    case FailureCategory::GraspFailure: return "I couldn't pick it up";
    case FailureCategory::SystemHang: return "my system stopped responding";
    case FailureCategory::MediatorError: return "I lost contact with the other robot";
    case FailureCategory::Other: return "an unexpected problem occurred";
  }
  return "an unexpected problem occurred";
}

double progress_fraction(ExecutionState state, double last) {
  switch (state) {
    case ExecutionState::Idle: return last > 0.0 ? 1.0 : 0.0;
    case ExecutionState::Navigating: return 0.25;
    case ExecutionState::Searching: return 0.45;
    case ExecutionState::Grasping: return 0.65;
    case ExecutionState::Delivering: return 0.85;
    case ExecutionState::Failed:
    case ExecutionState::Recovering: return last;
  }
  return last;
}

std::optional<ExternalizationMessage> externalize(const StreamEvent& event, Condition condition,
                                                  const MessageContext& ctx) {
  static const MessageTemplates kDefaults = MessageTemplates::defaults();
  const MessageTemplates& templates = ctx.templates ? *ctx.templates : kDefaults;

  if (const auto* result = event.as<TaskResultPayload>()) {
    const std::string key = result->success ? "RESULT:SUCCESS" : "RESULT:FAILURE";
    return ExternalizationMessage{ExecutionState::Idle,
                                  templates.render(key, ctx.object, result->failure_category), 1.0,
                                  false};
  }
  const auto* transition = event.as<StateTransitionPayload>();
  if (!transition || condition == Condition::Hidden) return std::nullopt;

  std::string key(to_string(transition->to));
  if (transition->to == ExecutionState::Idle) {
    key = transition->from == ExecutionState::Delivering ? "IDLE:SUCCESS" : "IDLE:FAILURE";
  }
  return ExternalizationMessage{
      transition->to, templates.render(key, ctx.object, transition->failure_category),
      progress_fraction(transition->to, ctx.last_progress),
      transition->to == ExecutionState::Failed};
}

void UserAgentPolicy::validate() const {
  for (const auto* d : {&request_latency, &dispatch_confirm_latency, &confirm_latency}) {
    if (!(d->median_s > 0.0) || !(d->sigma >= 0.0)) {
      throw Error(ErrorCode::ConfigError, "user latency needs median_s > 0 and sigma >= 0");
    }
  }
  if (!(request_trial_sigma >= 0.0)) throw Error(ErrorCode::ConfigError, "request_trial_sigma must be >= 0");
  if (!(retry_probability >= 0.0 && retry_probability <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "retry_probability outside [0,1]");
  }
  if (!(dispatch_accept_probability >= 0.0 && dispatch_accept_probability <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "dispatch_accept_probability outside [0,1]");
  }
}

namespace {

DurationSpec duration_from_json(const nlohmann::json& j, DurationSpec fallback) {
  return {j.value("median_s", fallback.median_s), j.value("sigma", fallback.sigma)};
}

}  // namespace

UserAgentPolicy user_policy_from_json(const nlohmann::json& j) {
  UserAgentPolicy p;
  try {
    if (j.contains("request_latency")) p.request_latency = duration_from_json(j["request_latency"], p.request_latency);
    if (j.contains("dispatch_confirm_latency")) {
      p.dispatch_confirm_latency = duration_from_json(j["dispatch_confirm_latency"], p.dispatch_confirm_latency);
    }
    if (j.contains("confirm_latency")) p.confirm_latency = duration_from_json(j["confirm_latency"], p.confirm_latency);
    p.request_trial_sigma = j.value("request_trial_sigma", p.request_trial_sigma);
    p.retry_probability = j.value("retry_probability", p.retry_probability);
    p.dispatch_accept_probability = j.value("dispatch_accept_probability", p.dispatch_accept_probability);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  p.validate();
  return p;
}

nlohmann::json to_json(const UserAgentPolicy& p) {
  auto d = [](const DurationSpec& s) { return nlohmann::json{{"median_s", s.median_s}, {"sigma", s.sigma}}; };
  return {{"request_latency", d(p.request_latency)},
          {"request_trial_sigma", p.request_trial_sigma},
          {"dispatch_confirm_latency", d(p.dispatch_confirm_latency)},
          {"confirm_latency", d(p.confirm_latency)},
          {"retry_probability", p.retry_probability},
          {"dispatch_accept_probability", p.dispatch_accept_probability}};
}

std::int64_t scripted_request_latency(const UserAgentPolicy& policy, Rng& participant, Rng& trial) {
  const std::int64_t typical = sample_duration(policy.request_latency, participant);
  const double factor = std::exp(policy.request_trial_sigma * trial.normal());
  return std::max<std::int64_t>(1, std::llround(static_cast<double>(typical) * factor));
}

UserAnswer scripted_user(const UserAgentPolicy& policy, const ConfirmationRequestPayload& /*request*/,
                         Rng& rng) {
  const bool retry = rng.bernoulli(policy.retry_probability);
  const std::int64_t latency = sample_duration(policy.confirm_latency, rng);
  return {retry ? Decision::Retry : Decision::Abort, latency};
}

DispatchAck pre_dispatch_confirmation(const TaskIntent& intent, Condition condition,
                                      const DispatchAckSource& user) {
  if (condition == Condition::Hidden) return {true, 0};
  DispatchAck ack = user(intent);
  if (ack.elapsed_ms < 0) ack.elapsed_ms = 0;
  return ack;
}

DispatchAckSource scripted_dispatch_ack(const UserAgentPolicy& policy, Rng& rng) {
  return [policy, &rng](const TaskIntent&) {
    const bool accept = rng.bernoulli(policy.dispatch_accept_probability);
    return DispatchAck{accept, sample_duration(policy.dispatch_confirm_latency, rng)};
  };
}

std::string scripted_utterance(ObjectCategory object, Rng& rng) {
  static const std::map<ObjectCategory, std::vector<std::string>> kPhrases = {
      {ObjectCategory::Water,
       {"bring me some water please", "could I get a bottle of water", "I'd like a drink"}},
      {ObjectCategory::Chips,
       {"bring me the chips please", "could you get me a snack", "I want some snacks"}},
      {ObjectCategory::Fruit,
       {"bring me some fruit please", "could I have an apple", "I'd like a banana"}},
  };
  const auto& options = kPhrases.at(object);
  return options[rng.below(options.size())];
}

}  // namespace statebridge
