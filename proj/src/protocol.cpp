#include "statebridge/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <initializer_list>
#include <json.hpp>

#include "statebridge/error.hpp"

namespace statebridge {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Condition c) {
  return c == Condition::Hidden ? "HIDDEN" : "EXTERNAL";
}

std::string_view to_string(ObjectCategory o) {
  switch (o) {
    case ObjectCategory::Water: return "WATER";
    case ObjectCategory::Chips: return "CHIPS";
    case ObjectCategory::Fruit: return "FRUIT";
  }
  return "?";
}

std::string_view object_noun(ObjectCategory o) {
  switch (o) {
    case ObjectCategory::Water: return "water";
    case ObjectCategory::Chips: return "chips";
    case ObjectCategory::Fruit: return "fruit";
  }
  return "?";
}

std::string_view to_string(Decision d) { return d == Decision::Retry ? "RETRY" : "ABORT"; }

std::string_view to_string(StreamKind k) {
  switch (k) {
    case StreamKind::StateTransition: return "STATE_TRANSITION";
    case StreamKind::Externalization: return "EXTERNALIZATION";
    case StreamKind::ConfirmationRequest: return "CONFIRMATION_REQUEST";
    case StreamKind::ConfirmationResponse: return "CONFIRMATION_RESPONSE";
    case StreamKind::TaskResult: return "TASK_RESULT";
  }
  return "?";
}

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

}  // namespace

std::optional<Condition> parse_condition(std::string_view s) {
  const auto u = upper(s);
  if (u == "HIDDEN" || u == "A") return Condition::Hidden;
  if (u == "EXTERNAL" || u == "B") return Condition::External;
  return std::nullopt;
}

std::optional<ObjectCategory> parse_object(std::string_view s) {
  for (auto o : kAllObjects) {
    if (to_string(o) == s) return o;
  }
  return std::nullopt;
}

std::optional<Decision> parse_decision(std::string_view s) {
  if (s == "RETRY") return Decision::Retry;
  if (s == "ABORT") return Decision::Abort;
  return std::nullopt;
}

std::optional<StreamKind> parse_stream_kind(std::string_view s) {
  for (auto k : kAllStreamKinds) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidEvent, what); }

struct PayloadValidator {
  void operator()(const StateTransitionPayload& p) const {
    if (!legal_successors(p.from).contains(p.to)) {
      invalid(std::string(to_string(p.from)) + "->" + std::string(to_string(p.to)) +
              " is not an edge of the state graph");
    }
    if ((p.to == ExecutionState::Failed) != p.failure_category.has_value()) {
      invalid("STATE_TRANSITION failure_category must be present iff to == FAILED");
    }
  }
  void operator()(const ExternalizationPayload& p) const {
    if (!(p.progress >= 0.0 && p.progress <= 1.0)) invalid("progress outside [0,1]");
  }
  void operator()(const ConfirmationRequestPayload& p) const {
    if (!p.failure_category) invalid("CONFIRMATION_REQUEST lacks failure_category");
    if (p.retries_used < 0 || p.max_retries < 0) invalid("negative retry counters");
  }
  void operator()(const ConfirmationResponsePayload&) const {}
  void operator()(const TaskResultPayload& p) const {
    if (p.success == p.failure_category.has_value()) {
      invalid("TASK_RESULT failure_category must be present iff outcome == FAILURE");
    }
    if (p.grasp_attempts < 0) invalid("negative grasp_attempts");
  }
};

struct PayloadEncoder {
  ojson operator()(const StateTransitionPayload& p) const {
    ojson j;
    j["from"] = to_string(p.from);
    j["to"] = to_string(p.to);
    if (p.failure_category) j["failure_category"] = to_string(*p.failure_category);
    return j;
  }
  ojson operator()(const ExternalizationPayload& p) const {
    ojson j;
    j["state"] = to_string(p.state);
    j["text"] = p.text;
    j["progress"] = p.progress;
    j["requires_response"] = p.requires_response;
    return j;
  }
  ojson operator()(const ConfirmationRequestPayload& p) const {
    ojson j;
    j["failure_category"] = to_string(*p.failure_category);
    j["retries_used"] = p.retries_used;
    j["max_retries"] = p.max_retries;
    return j;
  }
  ojson operator()(const ConfirmationResponsePayload& p) const {
    ojson j;
    j["decision"] = to_string(p.decision);
    return j;
  }
  ojson operator()(const TaskResultPayload& p) const {
    ojson j;
    j["outcome"] = p.success ? "SUCCESS" : "FAILURE";
    if (p.failure_category) j["failure_category"] = to_string(*p.failure_category);
    j["grasp_attempts"] = p.grasp_attempts;
    return j;
  }
};

}  // namespace

void validate_event(const StreamEvent& event) {
  if (event.ts_ms < 0) invalid("negative ts_ms");
  std::visit(PayloadValidator{}, event.payload);
}

std::string encode_event(const StreamEvent& event) {
  validate_event(event);
  ojson j;
  j["seq"] = event.seq;
  j["ts_ms"] = event.ts_ms;
  j["session_id"] = event.session_id;
  j["task_id"] = event.task_id;
  j["kind"] = to_string(event.kind());
  j["payload"] = std::visit(PayloadEncoder{}, event.payload);
  // dump() escapes control characters, so the line never contains '\n'.
  return j.dump();
}

namespace {

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorCode::SchemaViolation, what); }

void require_exact_keys(const ojson& obj, std::initializer_list<std::string_view> required,
                        std::initializer_list<std::string_view> optional, const char* where) {
  for (auto key : required) {
    if (!obj.contains(std::string(key))) schema(std::string(where) + " missing '" + std::string(key) + "'");
  }
  for (const auto& [key, _] : obj.items()) {
    const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                       std::find(optional.begin(), optional.end(), key) != optional.end();
    if (!known) schema(std::string(where) + " has unexpected field '" + key + "'");
  }
}

std::string get_string(const ojson& obj, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_string()) schema(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

std::int64_t get_int(const ojson& obj, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) schema(std::string("'") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

ExecutionState get_state(const ojson& obj, const char* key) {
  auto s = parse_state(get_string(obj, key));
  if (!s) schema(std::string("'") + key + "' is not an execution state");
  return *s;
}

std::optional<FailureCategory> get_category(const ojson& obj) {
  if (!obj.contains("failure_category")) return std::nullopt;
  auto c = parse_failure_category(get_string(obj, "failure_category"));
  if (!c) schema("unknown failure_category");
  return c;
}

Payload decode_payload(StreamKind kind, const ojson& p) {
  if (!p.is_object()) schema("payload must be an object");
  switch (kind) {
    case StreamKind::StateTransition: {
      require_exact_keys(p, {"from", "to"}, {"failure_category"}, "STATE_TRANSITION");
      return StateTransitionPayload{get_state(p, "from"), get_state(p, "to"), get_category(p)};
    }
    case StreamKind::Externalization: {
      require_exact_keys(p, {"state", "text", "progress", "requires_response"}, {},
                         "EXTERNALIZATION");
      const auto& progress = p.at("progress");
      if (!progress.is_number()) schema("'progress' must be a number");
      const auto& rr = p.at("requires_response");
      if (!rr.is_boolean()) schema("'requires_response' must be a boolean");
      return ExternalizationPayload{get_state(p, "state"), get_string(p, "text"),
                                    progress.get<double>(), rr.get<bool>()};
    }
    case StreamKind::ConfirmationRequest: {
      require_exact_keys(p, {"failure_category", "retries_used", "max_retries"}, {},
                         "CONFIRMATION_REQUEST");
      return ConfirmationRequestPayload{get_category(p),
                                        static_cast<int>(get_int(p, "retries_used")),
                                        static_cast<int>(get_int(p, "max_retries"))};
    }
    case StreamKind::ConfirmationResponse: {
      require_exact_keys(p, {"decision"}, {}, "CONFIRMATION_RESPONSE");
      auto d = parse_decision(get_string(p, "decision"));
      if (!d) schema("unknown decision");
      return ConfirmationResponsePayload{*d};
    }
    case StreamKind::TaskResult: {
      require_exact_keys(p, {"outcome", "grasp_attempts"}, {"failure_category"}, "TASK_RESULT");
      const auto outcome = get_string(p, "outcome");
      if (outcome != "SUCCESS" && outcome != "FAILURE") schema("unknown outcome");
      return TaskResultPayload{outcome == "SUCCESS", get_category(p),
                               static_cast<int>(get_int(p, "grasp_attempts"))};
    }
  }
  schema("unreachable kind");
}

}  // namespace

StreamEvent decode_event(std::string_view line) {
  ojson j;
  try {
    j = ojson::parse(line.begin(), line.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "event must be a JSON object");

  // The kind is checked first so an unknown kind is reported as such even when
  // its payload would not validate.
  if (!j.contains("kind") || !j["kind"].is_string()) schema("missing 'kind'");
  auto kind = parse_stream_kind(j["kind"].get<std::string>());
  if (!kind) throw Error(ErrorCode::UnknownKind, j["kind"].get<std::string>());

  require_exact_keys(j, {"seq", "ts_ms", "session_id", "task_id", "kind", "payload"}, {}, "event");
  const auto& seq = j.at("seq");
  if (!seq.is_number_unsigned() && !(seq.is_number_integer() && seq.get<std::int64_t>() >= 0)) {
    schema("'seq' must be a non-negative integer");
  }

  StreamEvent ev;
  ev.seq = seq.get<std::uint64_t>();
  ev.ts_ms = get_int(j, "ts_ms");
  ev.session_id = get_string(j, "session_id");
  ev.task_id = get_string(j, "task_id");
  ev.payload = decode_payload(*kind, j.at("payload"));
  try {
    validate_event(ev);
  } catch (const Error& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
  return ev;
}

}  // namespace statebridge
