#include "statebridge/api.hpp"

#include "statebridge/error.hpp"

namespace statebridge {

namespace {

using oj = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::SchemaViolation, what); }

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) bad(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::string get_string(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) bad(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::int64_t get_int(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) bad(std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

bool get_bool(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_boolean()) bad(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

bool present(const nlohmann::json& j, const char* key) { return j.is_object() && j.contains(key) && !j.at(key).is_null(); }

std::optional<std::int64_t> opt_int(const nlohmann::json& j, const char* key) {
  if (!present(j, key)) return std::nullopt;
  return get_int(j, key);
}

template <typename T, typename F>
T parse_enum(const nlohmann::json& j, const char* key, F parse) {
  const std::string s = get_string(j, key);
  auto v = parse(s);
  if (!v) bad(std::string("bad value '") + s + "' for '" + key + "'");
  return *v;
}

}  // namespace

oj intent_to_json(const TaskIntent& intent) {
  oj j;
  j["object"] = to_string(intent.object);
  j["deliver_to"] = intent.deliver_to;
  j["raw_utterance"] = intent.raw_utterance;
  return j;
}

TaskIntent intent_from_json(const nlohmann::json& j) {
  TaskIntent t;
  t.object = parse_enum<ObjectCategory>(j, "object", parse_object);
  t.deliver_to = get_string(j, "deliver_to");
  t.raw_utterance = get_string(j, "raw_utterance");
  return t;
}

oj session_spec_to_json(const SessionSpec& spec) {
  oj j;
  j["participant_id"] = spec.participant_id;
  j["condition"] = to_string(spec.condition);
  j["period"] = spec.period;
  if (spec.seed) j["seed"] = *spec.seed;
  return j;
}

SessionSpec session_spec_from_json(const nlohmann::json& j) {
  SessionSpec s;
  s.participant_id = get_string(j, "participant_id");
  s.condition = parse_enum<Condition>(j, "condition", parse_condition);
  s.period = static_cast<int>(get_int(j, "period"));
  if (s.period != 1 && s.period != 2) bad("period must be 1 or 2");
  if (present(j, "seed")) {
    const auto& v = j.at("seed");
    if (!v.is_number_unsigned() && !v.is_number_integer()) bad("seed must be an integer");
    s.seed = v.get<std::uint64_t>();
  }
  return s;
}

oj submit_request_to_json(const SubmitRequest& r) {
  oj j;
  j["utterance"] = r.utterance;
  if (r.ts_ms) j["ts_ms"] = *r.ts_ms;
  if (r.pre_confirm) j["pre_confirm"] = {{"confirmed", r.pre_confirm->confirmed}, {"latency_ms", r.pre_confirm->elapsed_ms}};
  return j;
}

SubmitRequest submit_request_from_json(const nlohmann::json& j) {
  SubmitRequest r;
  r.utterance = get_string(j, "utterance");
  r.ts_ms = opt_int(j, "ts_ms");
  if (present(j, "pre_confirm")) {
    const auto& p = j.at("pre_confirm");
    r.pre_confirm = DispatchAck{get_bool(p, "confirmed"), get_int(p, "latency_ms")};
    if (r.pre_confirm->elapsed_ms < 0) bad("latency_ms must be >= 0");
  }
  return r;
}

oj submit_result_to_json(const SubmitResult& r) {
  oj j;
  j["task_id"] = r.task_id;
  j["intent"] = intent_to_json(r.intent);
  j["dispatched"] = r.dispatched;
  j["dispatch_ts_ms"] = r.dispatch_ts_ms;
  return j;
}

SubmitResult submit_result_from_json(const nlohmann::json& j) {
  return {get_string(j, "task_id"), intent_from_json(field(j, "intent")), get_bool(j, "dispatched"),
          get_int(j, "dispatch_ts_ms")};
}

oj dispatched_task_to_json(const DispatchedTask& t) {
  oj j;
  j["task_id"] = t.task_id;
  j["session_id"] = t.session_id;
  j["intent"] = intent_to_json(t.intent);
  j["dispatch_ts_ms"] = t.dispatch_ts_ms;
  if (t.seed) j["seed"] = *t.seed;
  return j;
}

DispatchedTask dispatched_task_from_json(const nlohmann::json& j) {
  DispatchedTask t;
  t.task_id = get_string(j, "task_id");
  t.session_id = get_string(j, "session_id");
  t.intent = intent_from_json(field(j, "intent"));
  t.dispatch_ts_ms = get_int(j, "dispatch_ts_ms");
  if (present(j, "seed")) t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

oj state_update_to_json(const StateUpdate& u) {
  oj j;
  j["from"] = to_string(u.from);
  j["to"] = to_string(u.to);
  if (u.failure_category) j["failure_category"] = to_string(*u.failure_category);
  if (u.ts_ms) j["ts_ms"] = *u.ts_ms;
  if (u.grasp_attempts) j["grasp_attempts"] = *u.grasp_attempts;
  return j;
}

StateUpdate state_update_from_json(const nlohmann::json& j) {
  StateUpdate u;
  u.from = parse_enum<ExecutionState>(j, "from", parse_state);
  u.to = parse_enum<ExecutionState>(j, "to", parse_state);
  if (present(j, "failure_category")) {
    u.failure_category = parse_enum<FailureCategory>(j, "failure_category", parse_failure_category);
  }
  u.ts_ms = opt_int(j, "ts_ms");
  if (auto g = opt_int(j, "grasp_attempts")) u.grasp_attempts = static_cast<int>(*g);
  return u;
}

oj decision_to_json(const TimedDecision& d) {
  oj j;
  j["decision"] = to_string(d.decision);
  j["ts_ms"] = d.ts_ms;
  return j;
}

TimedDecision decision_from_json(const nlohmann::json& j) {
  return {parse_enum<Decision>(j, "decision", parse_decision), get_int(j, "ts_ms")};
}

oj error_to_json(const Error& e) {
  oj j;
  j["error"] = to_string(e.code());
  j["message"] = e.what();
  return j;
}

}  // namespace statebridge
