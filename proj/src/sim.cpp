#include "statebridge/sim.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "statebridge/error.hpp"

namespace statebridge {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

const PhaseConfig& SimConfig::phase(ExecutionState s) const {
  auto it = phases.find(s);
  if (it == phases.end()) config_error("no configuration for phase " + std::string(to_string(s)));
  return it->second;
}

void SimConfig::validate() const {
  for (auto s : kTimedPhases) {
    const auto& p = phase(s);
    const std::string name(to_string(s));
    if (!(p.duration.median_s > 0.0)) config_error(name + ": median_s must be > 0");
    if (!(p.duration.sigma >= 0.0)) config_error(name + ": sigma must be >= 0");
    if (!is_probability(p.failure_probability)) config_error(name + ": failure_probability outside [0,1]");
    double total = 0.0;
    for (const auto& [cat, w] : p.category_weights) {
      if (!(w >= 0.0)) config_error(name + ": negative category weight");
      const bool nav_phase = s == ExecutionState::Navigating || s == ExecutionState::Delivering;
      if (cat == FailureCategory::NavigationError && !nav_phase && w > 0.0) {
        config_error(name + ": NAVIGATION_ERROR is only possible while navigating or delivering");
      }
      if (cat == FailureCategory::GraspFailure && s != ExecutionState::Grasping && w > 0.0) {
        config_error(name + ": GRASP_FAILURE is only possible while grasping");
      }
      total += w;
    }
    const bool needs_weights = p.failure_probability > 0.0 || !p.category_weights.empty();
    if (needs_weights && std::abs(total - 1.0) > 1e-9) {
      config_error(name + ": category weights must sum to 1");
    }
  }
  if (!is_probability(grasp_success_probability)) config_error("grasp_success_probability outside [0,1]");
  if (grasp_attempt_cap < 1) config_error("grasp_attempt_cap must be >= 1");
  if (max_retries < 0) config_error("max_retries must be >= 0");
  if (!(time_scale >= 0.0)) config_error("time_scale must be >= 0");
}

SimConfig SimConfig::failfree() {
  SimConfig c;
  c.phases[ExecutionState::Navigating] = {{40.0, 0.25}, 0.0, {}};
  c.phases[ExecutionState::Searching] = {{15.0, 0.30}, 0.0, {}};
  c.phases[ExecutionState::Grasping] = {{20.0, 0.30}, 0.0, {}};
  c.phases[ExecutionState::Delivering] = {{40.0, 0.25}, 0.0, {}};
  c.phases[ExecutionState::Recovering] = {{15.0, 0.30}, 0.0, {}};
  c.grasp_success_probability = 1.0;
  c.grasp_attempt_cap = 3;
  return c;
}

SimConfig SimConfig::paper_cal() {
  using F = FailureCategory;
  SimConfig c;
  c.phases[ExecutionState::Navigating] = {
      {35.0, 0.70}, 0.10, {{F::NavigationError, 0.75}, {F::SystemHang, 0.15}, {F::Other, 0.10}}};
  c.phases[ExecutionState::Searching] = {
      {14.0, 0.75}, 0.05, {{F::SystemHang, 0.50}, {F::MediatorError, 0.25}, {F::Other, 0.25}}};
  c.phases[ExecutionState::Grasping] = {
      {12.0, 0.50}, 0.03, {{F::SystemHang, 0.60}, {F::Other, 0.40}}};
  c.phases[ExecutionState::Delivering] = {
      {35.0, 0.70}, 0.06, {{F::NavigationError, 0.75}, {F::SystemHang, 0.15}, {F::MediatorError, 0.10}}};
  c.phases[ExecutionState::Recovering] = {
      {28.0, 0.80}, 0.35, {{F::SystemHang, 0.70}, {F::Other, 0.30}}};
  c.grasp_success_probability = 0.50;
  c.grasp_attempt_cap = 3;
  c.max_retries = 2;
  return c;
}

namespace {

nlohmann::json duration_json(const DurationSpec& d) { return {{"median_s", d.median_s}, {"sigma", d.sigma}}; }

}  // namespace

nlohmann::json to_json(const SimConfig& c) {
  nlohmann::json phases = nlohmann::json::object();
  for (const auto& [state, p] : c.phases) {
    nlohmann::json weights = nlohmann::json::object();
    for (const auto& [cat, w] : p.category_weights) weights[std::string(to_string(cat))] = w;
    phases[std::string(to_string(state))] = {{"duration", duration_json(p.duration)},
                                             {"failure_probability", p.failure_probability},
                                             {"category_weights", weights}};
  }
  return {{"phases", phases},
          {"grasp_success_probability", c.grasp_success_probability},
          {"grasp_attempt_cap", c.grasp_attempt_cap},
          {"max_retries", c.max_retries},
          {"time_scale", c.time_scale},
          {"rng_seed", c.rng_seed}};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  try {
    if (j.contains("preset")) {
      const auto preset = j.at("preset").get<std::string>();
      if (preset == "failfree") {
        c = SimConfig::failfree();
      } else if (preset == "paper_cal") {
        c = SimConfig::paper_cal();
      } else {
        config_error("unknown preset '" + preset + "'");
      }
    }
    if (j.contains("phases")) {
      for (const auto& [name, pj] : j.at("phases").items()) {
        auto state = parse_state(name);
        if (!state) config_error("unknown phase '" + name + "'");
        PhaseConfig p = c.phases.count(*state) ? c.phases[*state] : PhaseConfig{};
        if (pj.contains("duration")) {
          p.duration.median_s = pj.at("duration").at("median_s").get<double>();
          p.duration.sigma = pj.at("duration").value("sigma", 0.0);
        }
        p.failure_probability = pj.value("failure_probability", p.failure_probability);
        if (pj.contains("category_weights")) {
          p.category_weights.clear();
          for (const auto& [cat_name, w] : pj.at("category_weights").items()) {
            auto cat = parse_failure_category(cat_name);
            if (!cat) config_error("unknown failure category '" + cat_name + "'");
            p.category_weights[*cat] = w.get<double>();
          }
        }
        c.phases[*state] = p;
      }
    }
    c.grasp_success_probability = j.value("grasp_success_probability", c.grasp_success_probability);
    c.grasp_attempt_cap = j.value("grasp_attempt_cap", c.grasp_attempt_cap);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.time_scale = j.value("time_scale", c.time_scale);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
  } catch (const nlohmann::json::exception& e) {
    config_error(e.what());
  }
  c.validate();
  return c;
}

void VirtualClock::advance(std::int64_t delta_ms) {
  if (delta_ms <= 0) return;
  now_ms_ += delta_ms;
  if (time_scale_ > 0.0) {
    std::this_thread::sleep_for(
        std::chrono::microseconds(static_cast<std::int64_t>(1000.0 * delta_ms / time_scale_)));
  }
}

void VirtualClock::advance_to(std::int64_t ts_ms) { advance(ts_ms - now_ms_); }

void VirtualClock::jump_to(std::int64_t ts_ms) { now_ms_ = std::max(now_ms_, ts_ms); }

std::int64_t sample_duration(const DurationSpec& spec, Rng& rng) {
  if (!(spec.median_s > 0.0)) config_error("median_s must be > 0");
  if (!(spec.sigma >= 0.0)) config_error("sigma must be >= 0");
  const double z = rng.normal();
  const double ms = spec.median_s * 1000.0 * std::exp(spec.sigma * z);
  return std::max<std::int64_t>(1, std::llround(ms));
}

std::int64_t sample_phase_duration(ExecutionState phase, const SimConfig& config, Rng& rng) {
  return sample_duration(config.phase(phase).duration, rng);
}

std::optional<FailureCategory> inject_failure(ExecutionState phase, const SimConfig& config, Rng& rng) {
  const auto& p = config.phase(phase);
  const bool fails = rng.bernoulli(p.failure_probability);
  double x = rng.uniform();
  if (!fails) return std::nullopt;
  double total = 0.0;
  for (const auto& [cat, w] : p.category_weights) total += w;
  x *= total;
  std::optional<FailureCategory> picked;
  for (const auto& [cat, w] : p.category_weights) {
    if (w <= 0.0) continue;
    picked = cat;
    if (x < w) break;
    x -= w;
  }
  return picked ? picked : FailureCategory::Other;
}

GraspResult grasp_loop(const SimConfig& config, Rng& rng) {
  GraspResult r;
  while (r.attempts < config.grasp_attempt_cap) {
    r.attempts += 1;
    r.elapsed_ms += sample_phase_duration(ExecutionState::Grasping, config, rng);
    if (rng.bernoulli(config.grasp_success_probability)) {
      r.success = true;
      break;
    }
  }
  return r;
}

ApprovalSource auto_approve() {
  return [](const ReportedTransition& failure) { return TimedDecision{Decision::Retry, failure.ts_ms}; };
}

namespace {

class TaskRun {
 public:
  TaskRun(const SimConfig& config, std::uint64_t seed, AgentLink& link, std::int64_t start_ms)
      : config_(config), rng_(seed), link_(link), clock_(start_ms, config.time_scale) {}

  SimOutcome run() {
    move_to(ExecutionState::Navigating, std::nullopt);
    while (!machine_.terminal_outcome) step();
    out_.outcome = *machine_.terminal_outcome;
    out_.grasp_attempts = grasp_attempts_;
    return out_;
  }

 private:
  void step() {
    const ExecutionState phase = machine_.current;
    switch (phase) {
      case ExecutionState::Failed: return decide();
      case ExecutionState::Grasping: return grasp();
      default: return timed_phase(phase);
    }
  }

  void timed_phase(ExecutionState phase) {
    const std::int64_t duration = sample_phase_duration(phase, config_, rng_);
    const auto failure = inject_failure(phase, config_, rng_);
    const double fraction = rng_.uniform();
    if (failure) {
      spend(std::max<std::int64_t>(1, std::llround(duration * fraction)));
      move_to(ExecutionState::Failed, failure);
      return;
    }
    spend(duration);
    move_to(next_after(phase), std::nullopt);
  }

  void grasp() {
    const GraspResult g = grasp_loop(config_, rng_);
    grasp_attempts_ += g.attempts;
    spend(g.elapsed_ms);
    if (!g.success) {
      move_to(ExecutionState::Failed, FailureCategory::GraspFailure);
      return;
    }
    // Faults other than a missed grasp (hangs, dropped objects) surface at the
    // end of the phase.
    if (auto failure = inject_failure(ExecutionState::Grasping, config_, rng_)) {
      move_to(ExecutionState::Failed, failure);
      return;
    }
    move_to(ExecutionState::Delivering, std::nullopt);
  }

  void decide() {
    const TimedDecision d = link_.await_decision(last_);
    // Waiting for the decision is time spent in FAILED. The wait already
    // happened on the other side of the link, so the clock does not sleep.
    if (d.ts_ms > clock_.now()) {
      out_.phase_durations[machine_.current] += d.ts_ms - clock_.now();
      clock_.jump_to(d.ts_ms);
    }
    const bool retry = d.decision == Decision::Retry && machine_.retries_used < config_.max_retries;
    move_to(retry ? ExecutionState::Recovering : ExecutionState::Idle, std::nullopt);
  }

  ExecutionState next_after(ExecutionState phase) const {
    switch (phase) {
      case ExecutionState::Navigating: return ExecutionState::Searching;
      case ExecutionState::Searching: return ExecutionState::Grasping;
      case ExecutionState::Delivering: return ExecutionState::Idle;
      case ExecutionState::Recovering: return *machine_.resume_from;
      default: return phase;
    }
  }

  void spend(std::int64_t ms) {
    if (ms <= 0) return;
    out_.phase_durations[machine_.current] += ms;
    clock_.advance(ms);
  }

  void move_to(ExecutionState to, std::optional<FailureCategory> category) {
    auto event = infer_event(machine_, to, category);
    if (!event) {
      throw Error(ErrorCode::IllegalTransition, std::string(to_string(machine_.current)) + "->" +
                                                    std::string(to_string(to)));
    }
    ReportedTransition t{machine_.current, to, category, clock_.now(), grasp_attempts_};
    machine_ = apply_event(machine_, *event, config_.max_retries);
    last_ = t;
    out_.transitions.push_back(t);
    link_.report(t);
  }

  const SimConfig& config_;
  Rng rng_;
  AgentLink& link_;
  VirtualClock clock_;
  TaskMachine machine_ = new_machine();
  int grasp_attempts_ = 0;
  ReportedTransition last_;
  SimOutcome out_;
};

}  // namespace

SimOutcome run_task(const TaskIntent& /*intent*/, const SimConfig& config, std::uint64_t seed,
                    AgentLink& link, std::int64_t start_ms) {
  config.validate();
  return TaskRun(config, seed, link, start_ms).run();
}

}  // namespace statebridge
