#include <doctest.h>

#include <algorithm>
#include <vector>

#include "statebridge/error.hpp"
#include "statebridge/protocol.hpp"
#include "statebridge/sim.hpp"

using namespace statebridge;
using S = ExecutionState;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<S> path_of(const SimOutcome& out) {
  std::vector<S> p{S::Idle};
  for (const auto& t : out.transitions) p.push_back(t.to);
  return p;
}

}  // namespace

TEST_SUITE("sim") {
  TEST_CASE("zero sigma gives the median exactly") {
    Rng rng(1);
    for (int i = 0; i < 10; ++i) CHECK(sample_duration({12.5, 0.0}, rng) == 12500);
    SimConfig c = SimConfig::failfree();
    c.phases[S::Searching].duration = {7.0, 0.0};
    CHECK(sample_phase_duration(S::Searching, c, rng) == 7000);
  }

  TEST_CASE("sample median of 10k draws") {
    Rng rng(99);
    std::vector<double> v;
    for (int i = 0; i < 10000; ++i) v.push_back(static_cast<double>(sample_duration({30.0, 0.6}, rng)));
    CHECK(median(v) == doctest::Approx(30000.0).epsilon(0.05));
    CHECK(*std::min_element(v.begin(), v.end()) >= 1.0);
  }

  TEST_CASE("bad duration spec is ConfigError") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_duration({-1.0, 0.1}, rng), Error);
    CHECK_THROWS_AS(sample_duration({0.0, 0.1}, rng), Error);
    CHECK_THROWS_AS(sample_duration({1.0, -0.1}, rng), Error);
    SimConfig c = SimConfig::failfree();
    c.phases[S::Navigating].duration.median_s = -3.0;
    try {
      c.validate();
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
    }
  }

  TEST_CASE("validate rejects impossible categories and bad weights") {
    SimConfig c = SimConfig::failfree();
    c.phases[S::Searching] = {{10.0, 0.1}, 0.5, {{FailureCategory::GraspFailure, 1.0}}};
    CHECK_THROWS_AS(c.validate(), Error);
    c.phases[S::Searching] = {{10.0, 0.1}, 0.5, {{FailureCategory::NavigationError, 1.0}}};
    CHECK_THROWS_AS(c.validate(), Error);
    c.phases[S::Searching] = {{10.0, 0.1}, 0.5, {{FailureCategory::SystemHang, 0.6}}};
    CHECK_THROWS_AS(c.validate(), Error);
    c.phases[S::Searching] = {{10.0, 0.1}, 1.5, {{FailureCategory::SystemHang, 1.0}}};
    CHECK_THROWS_AS(c.validate(), Error);
    c = SimConfig::failfree();
    c.phases.erase(S::Recovering);
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK_NOTHROW(SimConfig::paper_cal().validate());
  }

  TEST_CASE("failure injection") {
    SimConfig c = SimConfig::failfree();
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) CHECK_FALSE(inject_failure(S::Navigating, c, rng));

    c.phases[S::Navigating] = {{10.0, 0.1}, 1.0, {{FailureCategory::SystemHang, 1.0}}};
    for (int i = 0; i < 100; ++i) CHECK(inject_failure(S::Navigating, c, rng) == FailureCategory::SystemHang);

    c.phases[S::Navigating] = {{10.0, 0.1}, 0.3, {{FailureCategory::NavigationError, 0.5}, {FailureCategory::Other, 0.5}}};
    int hits = 0;
    int nav = 0;
    for (int i = 0; i < 10000; ++i) {
      if (auto f = inject_failure(S::Navigating, c, rng)) {
        ++hits;
        nav += *f == FailureCategory::NavigationError;
      }
    }
    CHECK(hits / 10000.0 == doctest::Approx(0.3).epsilon(0.02 / 0.3));
    CHECK(static_cast<double>(nav) / hits == doctest::Approx(0.5).epsilon(0.1));
  }

  TEST_CASE("grasp loop") {
    SimConfig c = SimConfig::failfree();
    Rng rng(4);
    c.grasp_success_probability = 1.0;
    auto g = grasp_loop(c, rng);
    CHECK(g.success);
    CHECK(g.attempts == 1);

    c.grasp_success_probability = 0.0;
    g = grasp_loop(c, rng);
    CHECK_FALSE(g.success);
    CHECK(g.attempts == 3);

    // E[attempts] = 0.5*1 + 0.25*2 + 0.25*3 = 1.75
    c.grasp_success_probability = 0.5;
    double total = 0;
    for (int i = 0; i < 100000; ++i) total += grasp_loop(c, rng).attempts;
    CHECK(std::abs(total / 100000 - 1.75) <= 0.02);
  }

  TEST_CASE("fail-free path") {
    RecordingLink link(auto_approve());
    const auto out = run_task(TaskIntent{}, SimConfig::failfree(), 11, link);
    CHECK(path_of(out) == std::vector<S>{S::Idle, S::Navigating, S::Searching, S::Grasping, S::Delivering, S::Idle});
    CHECK(out.outcome == TerminalOutcome::succeeded());
    CHECK(out.grasp_attempts == 1);
    CHECK(link.transitions() == out.transitions);
  }

  TEST_CASE("forced grasp failure without retries") {
    SimConfig c = SimConfig::failfree();
    c.grasp_success_probability = 0.0;
    c.max_retries = 0;
    RecordingLink link(auto_approve());
    const auto out = run_task(TaskIntent{}, c, 1, link);
    CHECK(out.outcome == TerminalOutcome::failed(FailureCategory::GraspFailure));
    CHECK(out.grasp_attempts == 3);
    CHECK(path_of(out).back() == S::Idle);
  }

  TEST_CASE("grasp failure with retries resumes grasping") {
    SimConfig c = SimConfig::failfree();
    c.grasp_success_probability = 0.0;
    c.max_retries = 2;
    RecordingLink link(auto_approve());
    const auto out = run_task(TaskIntent{}, c, 1, link);
    CHECK(out.grasp_attempts == 9);
    CHECK(path_of(out) == std::vector<S>{S::Idle, S::Navigating, S::Searching, S::Grasping, S::Failed,
                                         S::Recovering, S::Grasping, S::Failed, S::Recovering, S::Grasping,
                                         S::Failed, S::Idle});
  }

  TEST_CASE("same seed, same run") {
    const auto c = SimConfig::paper_cal();
    for (std::uint64_t seed : {42ull, 7ull, 123456789ull}) {
      RecordingLink a(auto_approve());
      RecordingLink b(auto_approve());
      const auto x = run_task(TaskIntent{}, c, seed, a, 500);
      const auto y = run_task(TaskIntent{}, c, seed, b, 500);
      CHECK(x.transitions == y.transitions);
      CHECK(x.phase_durations == y.phase_durations);
      CHECK(x.outcome == y.outcome);
    }
  }

  TEST_CASE("timestamps and durations are consistent") {
    const auto c = SimConfig::paper_cal();
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      RecordingLink link(auto_approve());
      const auto out = run_task(TaskIntent{}, c, seed, link, 1000);
      std::int64_t prev = 1000;
      std::int64_t sum = 0;
      for (const auto& t : out.transitions) {
        CHECK(t.ts_ms >= prev);
        prev = t.ts_ms;
      }
      for (const auto& [state, ms] : out.phase_durations) sum += ms;
      CHECK(sum == out.transitions.back().ts_ms - 1000);
      CHECK(out.transitions.front().ts_ms == 1000);
      int retries = 0;
      for (const auto& t : out.transitions) retries += t.to == S::Recovering;
      CHECK(retries <= c.max_retries);
    }
  }

  TEST_CASE("decision wait counts as time in FAILED") {
    SimConfig c = SimConfig::failfree();
    c.grasp_success_probability = 0.0;
    c.max_retries = 1;
    RecordingLink link([](const ReportedTransition& f) { return TimedDecision{Decision::Retry, f.ts_ms + 2500}; });
    const auto out = run_task(TaskIntent{}, c, 8, link);
    CHECK(out.phase_durations.at(S::Failed) == 5000);
    for (std::size_t i = 0; i + 1 < out.transitions.size(); ++i) {
      if (out.transitions[i].to == S::Failed) {
        CHECK(out.transitions[i + 1].ts_ms - out.transitions[i].ts_ms == 2500);
      }
    }
  }

  TEST_CASE("abort decision ends the task") {
    SimConfig c = SimConfig::failfree();
    c.grasp_success_probability = 0.0;
    RecordingLink link([](const ReportedTransition& f) { return TimedDecision{Decision::Abort, f.ts_ms}; });
    const auto out = run_task(TaskIntent{}, c, 8, link);
    CHECK(out.outcome == TerminalOutcome::failed(FailureCategory::GraspFailure));
    CHECK(out.grasp_attempts == 3);
  }

  TEST_CASE("config json round trip") {
    const auto c = SimConfig::paper_cal();
    const auto back = sim_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    const auto ff = sim_config_from_json(nlohmann::json{{"preset", "failfree"}, {"max_retries", 4}});
    CHECK(ff.max_retries == 4);
    CHECK(ff.phase(S::Navigating).failure_probability == 0.0);
    CHECK_THROWS_AS(sim_config_from_json(nlohmann::json{{"preset", "nope"}}), Error);
    CHECK_THROWS_AS(sim_config_from_json(nlohmann::json{{"phases", {{"FLYING", {}}}}}), Error);
  }

  TEST_CASE("virtual clock") {
    VirtualClock clock(100);
    clock.advance(50);
    CHECK(clock.now() == 150);
    clock.advance(-10);
    CHECK(clock.now() == 150);
    clock.advance_to(120);
    CHECK(clock.now() == 150);
    clock.jump_to(400);
    CHECK(clock.now() == 400);
  }
}
