#include <doctest.h>

#include <functional>

#include "statebridge/error.hpp"
#include "statebridge/protocol.hpp"
#include "support/fixtures.hpp"

using namespace statebridge;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::StorageError;
}

StreamEvent transition(ExecutionState from, ExecutionState to) {
  StreamEvent e;
  e.seq = 1;
  e.ts_ms = 0;
  e.session_id = "S0001";
  e.task_id = "T0001";
  e.payload = StateTransitionPayload{from, to, std::nullopt};
  return e;
}

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("state transition encodes with fixed key order") {
    const auto line = encode_event(transition(ExecutionState::Idle, ExecutionState::Navigating));
    CHECK(line ==
          R"({"seq":1,"ts_ms":0,"session_id":"S0001","task_id":"T0001","kind":"STATE_TRANSITION",)"
          R"("payload":{"from":"IDLE","to":"NAVIGATING"}})");
  }

  TEST_CASE("random round trip over every kind") {
    Rng rng(2024);
    int per_kind[5] = {};
    for (int i = 0; i < 1500; ++i) {
      const auto kind = kAllStreamKinds[i % kAllStreamKinds.size()];
      const auto e = sbtest::random_event(kind, rng);
      const auto line = encode_event(e);
      CHECK(line.find('\n') == std::string::npos);
      const auto back = decode_event(line);
      REQUIRE(back == e);
      CHECK(encode_event(back) == line);
      per_kind[static_cast<int>(kind)]++;
    }
    for (int n : per_kind) CHECK(n == 300);
  }

  TEST_CASE("confirmation request without category is InvalidEvent") {
    StreamEvent e = transition(ExecutionState::Idle, ExecutionState::Navigating);
    e.payload = ConfirmationRequestPayload{std::nullopt, 0, 2};
    CHECK(code_of([&] { encode_event(e); }) == ErrorCode::InvalidEvent);
  }

  TEST_CASE("encode rejects schema breaks") {
    CHECK(code_of([] { encode_event(transition(ExecutionState::Idle, ExecutionState::Grasping)); }) ==
          ErrorCode::InvalidEvent);
    CHECK(code_of([] { encode_event(transition(ExecutionState::Navigating, ExecutionState::Failed)); }) ==
          ErrorCode::InvalidEvent);
    StreamEvent e = transition(ExecutionState::Idle, ExecutionState::Navigating);
    e.payload = TaskResultPayload{true, FailureCategory::Other, 1};
    CHECK(code_of([&] { encode_event(e); }) == ErrorCode::InvalidEvent);
    e.payload = TaskResultPayload{false, std::nullopt, 1};
    CHECK(code_of([&] { encode_event(e); }) == ErrorCode::InvalidEvent);
    e.payload = ExternalizationPayload{ExecutionState::Idle, "x", 1.5, false};
    CHECK(code_of([&] { encode_event(e); }) == ErrorCode::InvalidEvent);
    e.payload = ExternalizationPayload{ExecutionState::Idle, "x", 0.5, false};
    e.ts_ms = -1;
    CHECK(code_of([&] { encode_event(e); }) == ErrorCode::InvalidEvent);
  }

  TEST_CASE("unknown kind") {
    CHECK(code_of([] {
            decode_event(R"({"seq":1,"ts_ms":0,"session_id":"S","task_id":"T","kind":"SPEECH","payload":{}})");
          }) == ErrorCode::UnknownKind);
  }

  TEST_CASE("truncated line is ParseError") {
    const auto line = encode_event(transition(ExecutionState::Idle, ExecutionState::Navigating));
    CHECK(code_of([&] { decode_event(line.substr(0, line.size() / 2)); }) == ErrorCode::ParseError);
    CHECK(code_of([] { decode_event(""); }) == ErrorCode::ParseError);
    CHECK(code_of([] { decode_event("[1,2]"); }) == ErrorCode::ParseError);
  }

  TEST_CASE("schema violations on decode") {
    const std::string head = R"({"seq":1,"ts_ms":0,"session_id":"S","task_id":"T",)";
    // missing payload field
    CHECK(code_of([&] { decode_event(head + R"("kind":"STATE_TRANSITION","payload":{"from":"IDLE"}})"); }) ==
          ErrorCode::SchemaViolation);
    // extra field
    CHECK(code_of([&] {
            decode_event(head + R"("kind":"CONFIRMATION_RESPONSE","payload":{"decision":"RETRY","x":1}})");
          }) == ErrorCode::SchemaViolation);
    // wrong type
    CHECK(code_of([&] {
            decode_event(R"({"seq":"1","ts_ms":0,"session_id":"S","task_id":"T","kind":"CONFIRMATION_RESPONSE",)"
                         R"("payload":{"decision":"RETRY"}})");
          }) == ErrorCode::SchemaViolation);
    // bad enum value
    CHECK(code_of([&] {
            decode_event(head + R"("kind":"CONFIRMATION_RESPONSE","payload":{"decision":"MAYBE"}})");
          }) == ErrorCode::SchemaViolation);
    // illegal edge
    CHECK(code_of([&] {
            decode_event(head + R"("kind":"STATE_TRANSITION","payload":{"from":"IDLE","to":"IDLE"}})");
          }) == ErrorCode::SchemaViolation);
  }

  TEST_CASE("golden transcript re-encodes byte for byte") {
    const auto lines = sbtest::read_lines(std::string(STATEBRIDGE_TEST_DATA) + "/golden_external_trial.ndjson");
    REQUIRE(lines.size() > 10);
    for (const auto& line : lines) CHECK(encode_event(decode_event(line)) == line);
  }

  TEST_CASE("enum names") {
    for (auto k : kAllStreamKinds) CHECK(parse_stream_kind(to_string(k)) == k);
    CHECK(parse_condition("hidden") == Condition::Hidden);
    CHECK(parse_condition("EXTERNAL") == Condition::External);
    CHECK(parse_object("CHIPS") == ObjectCategory::Chips);
    CHECK(parse_decision("ABORT") == Decision::Abort);
    CHECK_FALSE(parse_decision("abort?"));
    CHECK(object_noun(ObjectCategory::Fruit) == "fruit");
  }
}
