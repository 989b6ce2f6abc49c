#pragma once

// JSON bodies of the HTTP endpoints (everything except the event stream,
// which uses encode_event/decode_event). Decoders throw Error{SchemaViolation}
// on missing or mistyped fields.

#include <json.hpp>

#include "statebridge/coordinator.hpp"
#include "statebridge/error.hpp"

namespace statebridge {

nlohmann::ordered_json intent_to_json(const TaskIntent& intent);
TaskIntent intent_from_json(const nlohmann::json& j);

nlohmann::ordered_json session_spec_to_json(const SessionSpec& spec);
SessionSpec session_spec_from_json(const nlohmann::json& j);

nlohmann::ordered_json submit_request_to_json(const SubmitRequest& r);
SubmitRequest submit_request_from_json(const nlohmann::json& j);

nlohmann::ordered_json submit_result_to_json(const SubmitResult& r);
SubmitResult submit_result_from_json(const nlohmann::json& j);

nlohmann::ordered_json dispatched_task_to_json(const DispatchedTask& t);
DispatchedTask dispatched_task_from_json(const nlohmann::json& j);

nlohmann::ordered_json state_update_to_json(const StateUpdate& u);
StateUpdate state_update_from_json(const nlohmann::json& j);

nlohmann::ordered_json decision_to_json(const TimedDecision& d);
TimedDecision decision_from_json(const nlohmann::json& j);

nlohmann::ordered_json error_to_json(const Error& e);

}  // namespace statebridge
