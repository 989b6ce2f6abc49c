#include <doctest.h>

#include <cmath>
#include <functional>

#include "statebridge/error.hpp"
#include "statebridge/metrics.hpp"

using namespace statebridge;

namespace {

TrialRecord trial(const std::string& pid, Condition c, std::int64_t dispatch, std::int64_t terminal, int grasps = 1,
                  bool success = true) {
  TrialRecord r;
  r.trial_id = pid + (c == Condition::Hidden ? "A" : "B");
  r.participant_id = pid;
  r.condition = c;
  r.period = c == Condition::Hidden ? 1 : 2;
  r.success = success;
  if (!success) r.failure_category = FailureCategory::SystemHang;
  r.ready_ts_ms = 0;
  r.dispatch_ts_ms = dispatch;
  r.terminal_ts_ms = terminal;
  r.grasp_attempts = grasps;
  return r;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::StorageError;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("decomposition of a trial") {
    const auto m = extract_metrics(trial("P01", Condition::Hidden, 33470, 196100));
    CHECK(m.initiation_s() == doctest::Approx(33.47).epsilon(1e-12));
    CHECK(m.execution_s() == doctest::Approx(162.63).epsilon(1e-12));
    CHECK(m.end_to_end_s() == doctest::Approx(196.10).epsilon(1e-12));
    CHECK(m.end_to_end_ms == m.initiation_ms + m.execution_ms);
  }

  TEST_CASE("zero durations") {
    const auto m = extract_metrics(trial("P01", Condition::Hidden, 0, 0));
    CHECK(m.initiation_ms == 0);
    CHECK(m.execution_ms == 0);
    CHECK(m.end_to_end_ms == 0);
  }

  TEST_CASE("malformed trials") {
    CHECK(code_of([] { extract_metrics(trial("P01", Condition::Hidden, 500, 400)); }) == ErrorCode::MalformedTrial);
    auto t = trial("P01", Condition::Hidden, 500, 900);
    t.dispatch_ts_ms.reset();
    CHECK(code_of([&] { extract_metrics(t); }) == ErrorCode::MalformedTrial);
    t = trial("P01", Condition::Hidden, 500, 900);
    t.ready_ts_ms = 600;
    CHECK(code_of([&] { extract_metrics(t); }) == ErrorCode::MalformedTrial);
  }

  TEST_CASE("report means match constructed inputs") {
    std::vector<TrialRecord> trials;
    double init_a = 0, init_b = 0, exec_a = 0, exec_b = 0;
    for (int i = 0; i < 12; ++i) {
      const std::string pid = "P" + std::to_string(10 + i);
      const std::int64_t da = 30000 + 137 * i, ta = da + 150000 + 911 * i * i;
      const std::int64_t db = 47000 + 53 * i * i, tb = db + 140000 - 713 * i;
      trials.push_back(trial(pid, Condition::Hidden, da, ta, 1 + i % 3, i != 4));
      trials.push_back(trial(pid, Condition::External, db, tb, 1 + i % 2));
      init_a += da / 1000.0;
      init_b += db / 1000.0;
      exec_a += (ta - da) / 1000.0;
      exec_b += (tb - db) / 1000.0;
    }
    const auto r = aggregate_report(trials);
    CHECK(r.n_pairs == 12);
    CHECK(std::abs(r.row("Init (s)").hidden.mean - init_a / 12) < 1e-9);
    CHECK(std::abs(r.row("Init (s)").external.mean - init_b / 12) < 1e-9);
    CHECK(std::abs(r.row("Exec (s)").hidden.mean - exec_a / 12) < 1e-9);
    CHECK(std::abs(r.row("Exec (s)").external.mean - exec_b / 12) < 1e-9);
    CHECK(std::abs(r.row("Total (s)").hidden.mean - (init_a + exec_a) / 12) < 1e-9);
    CHECK(r.rows.size() == 4);
    CHECK(r.row("Grasp Att.").hidden.mean == doctest::Approx(2.0));
    CHECK(r.success_rate_hidden == doctest::Approx(11.0 / 12.0));
    CHECK(r.success_rate_external == 1.0);
    CHECK(r.failures_hidden.at(FailureCategory::SystemHang) == 1);
    CHECK(r.failures_external.at(FailureCategory::SystemHang) == 0);
    CHECK(r.success_p == 1.0);
    CHECK(r.period_split.size() == 4);
    CHECK(r.period_split[0].hidden_first_mean == doctest::Approx(init_a / 12));
    CHECK_THROWS_AS(r.row("Attention"), Error);
  }

  TEST_CASE("all-success batch has no failures") {
    std::vector<TrialRecord> trials;
    for (int i = 0; i < 4; ++i) {
      trials.push_back(trial("P" + std::to_string(i), Condition::Hidden, 100, 1000 + i));
      trials.push_back(trial("P" + std::to_string(i), Condition::External, 200, 1200 + 3 * i));
    }
    const auto r = aggregate_report(trials);
    for (const auto& [cat, n] : r.failures_hidden) CHECK(n == 0);
    for (const auto& [cat, n] : r.failures_external) CHECK(n == 0);
    const auto json = r.to_json();
    CHECK(json.at("metrics").size() == 4);
    const auto text = r.to_text();
    for (const char* name : {"Init (s)", "Exec (s)", "Total (s)", "Grasp Att.", "Suc. Rate"}) {
      CHECK_MESSAGE(text.find(name) != std::string::npos, name);
    }
  }

  TEST_CASE("unpaired data") {
    std::vector<TrialRecord> trials{trial("P1", Condition::Hidden, 1, 2), trial("P1", Condition::External, 1, 2),
                                    trial("P2", Condition::Hidden, 1, 2)};
    CHECK(code_of([&] { aggregate_report(trials); }) == ErrorCode::UnpairedData);
    trials.push_back(trial("P2", Condition::Hidden, 1, 2));
    CHECK(code_of([&] { aggregate_report(trials); }) == ErrorCode::UnpairedData);
    CHECK(code_of([] { aggregate_report({}); }) == ErrorCode::UnpairedData);
  }
}
