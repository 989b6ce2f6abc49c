#include "statebridge/experiment.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "statebridge/error.hpp"
#include "statebridge/intent.hpp"
#include "statebridge/log.hpp"
#include "statebridge/server.hpp"

extern char** environ;

namespace statebridge {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

// Seed streams; see plan_batch.
constexpr std::uint64_t kScheduleStream = 0;
constexpr std::uint64_t kSimStream = 1000;
constexpr std::uint64_t kUserStream = 2000;
constexpr std::uint64_t kObjectStream = 3000;
constexpr std::uint64_t kParticipantStream = 4000;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::StorageError, "cannot write " + path.string());
}

class ChildProcess {
 public:
  explicit ChildProcess(const std::vector<std::string>& argv) {
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    if (posix_spawn(&pid_, args[0], nullptr, nullptr, args.data(), environ) != 0) {
      throw Error(ErrorCode::ConfigError, "cannot start " + argv[0]);
    }
  }
  ~ChildProcess() { terminate(); }
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  void terminate() {
    if (pid_ <= 0) return;
    kill(pid_, SIGTERM);
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }

  bool running() const {
    if (pid_ <= 0) return false;
    int status = 0;
    return waitpid(pid_, &status, WNOHANG) == 0;
  }

 private:
  pid_t pid_ = -1;
};

int wait_for_port_file(const std::filesystem::path& path, const ChildProcess& server) {
  for (int i = 0; i < 200; ++i) {
    std::ifstream in(path);
    int port = 0;
    if (in >> port && port > 0) return port;
    if (!server.running()) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  throw Error(ErrorCode::ServerUnreachable, "server process did not report a port");
}

// Answers confirmation prompts of one trial until its result arrives.
void answer_confirmations(const std::string& host, int port, const std::string& session_id,
                          const UserAgentPolicy& user, std::uint64_t seed) {
  ApiClient client(host, port);
  Rng rng(seed);
  client.stream(session_id, 1, StreamView::Full, true, [&](const StreamEvent& ev) {
    if (const auto* req = ev.as<ConfirmationRequestPayload>()) {
      const UserAnswer answer = scripted_user(user, *req, rng);
      client.confirm(ev.task_id, answer.decision, ev.ts_ms + answer.latency_ms);
    }
    return true;
  });
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) config_error("config must be an object");
  ExperimentConfig c;
  try {
    if (j.contains("sim")) c.sim = sim_config_from_json(j.at("sim"));
    if (j.contains("user")) c.user = user_policy_from_json(j.at("user"));
    c.server.max_retries = c.sim.max_retries;
    if (j.contains("server")) {
      const auto& s = j.at("server");
      c.server.host = s.value("host", c.server.host);
      c.server.port = s.value("port", c.server.port);
      c.server.max_retries = s.value("max_retries", c.server.max_retries);
      c.server.confirm_timeout = std::chrono::milliseconds(s.value("confirm_timeout_ms", std::int64_t{0}));
      c.server.live_time_scale = s.value("live_time_scale", c.server.live_time_scale);
      if (s.contains("templates")) {
        std::filesystem::path p = s.at("templates").get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        c.templates_path = p;
        c.server.templates = MessageTemplates::load(p);
      }
    }
    if (j.contains("experiment")) {
      const auto& e = j.at("experiment");
      c.participants = e.value("participants", c.participants);
      c.seed = e.value("seed", c.seed);
      c.out_dir = e.value("out_dir", c.out_dir.string());
    }
  } catch (const nlohmann::json::exception& e) {
    config_error(e.what());
  }
  if (c.server.max_retries < 0) config_error("max_retries must be >= 0");
  if (c.participants < 2) config_error("participants must be >= 2");
  c.server.default_user = c.user;
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) config_error(path.string() + " is not valid JSON");
  return experiment_config_from_json(j, path.parent_path());
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["sim"] = to_json(c.sim);
  j["user"] = to_json(c.user);
  nlohmann::ordered_json s;
  s["host"] = c.server.host;
  s["port"] = c.server.port;
  s["max_retries"] = c.server.max_retries;
  s["confirm_timeout_ms"] = c.server.confirm_timeout.count();
  s["live_time_scale"] = c.server.live_time_scale;
  if (c.templates_path) s["templates"] = std::filesystem::absolute(*c.templates_path).string();
  j["server"] = s;
  j["experiment"] = {{"participants", c.participants}, {"seed", c.seed}, {"out_dir", c.out_dir.string()}};
  return j;
}

std::vector<TrialPlan> plan_batch(int participants, std::uint64_t seed, std::optional<Condition> only) {
  const auto schedule = counterbalance_schedule(participants, mix_seed(seed, kScheduleStream));
  std::vector<TrialPlan> plan;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& entry = schedule[i];
    Rng object_rng(mix_seed(seed, kObjectStream + i));
    const ObjectCategory object = kAllObjects[object_rng.below(kAllObjects.size())];
    const Condition first = entry.order == ConditionOrder::HiddenFirst ? Condition::Hidden : Condition::External;
    const Condition second = first == Condition::Hidden ? Condition::External : Condition::Hidden;
    for (int period = 1; period <= 2; ++period) {
      const Condition cond = period == 1 ? first : second;
      if (only && cond != *only) continue;
      TrialPlan t;
      t.participant_id = entry.participant_id;
      t.condition = cond;
      t.period = period;
      t.object = object;
      const std::uint64_t slot = 2 * i + (cond == Condition::External ? 1 : 0);
      t.participant_seed = mix_seed(seed, kParticipantStream + i);
      t.sim_seed = mix_seed(seed, kSimStream + slot);
      t.user_seed = mix_seed(seed, kUserStream + slot);
      plan.push_back(t);
    }
  }
  return plan;
}

SubmitRequest scripted_submission(const TrialPlan& plan, const UserAgentPolicy& user) {
  Rng participant(plan.participant_seed);
  Rng rng(plan.user_seed);
  SubmitRequest request;
  request.utterance = scripted_utterance(plan.object, rng);
  request.ts_ms = scripted_request_latency(user, participant, rng);
  TaskIntent intent;
  intent.object = plan.object;
  request.pre_confirm = pre_dispatch_confirmation(intent, plan.condition, scripted_dispatch_ack(user, rng));
  return request;
}

std::string run_scripted_trial(ApiClient& client, const TrialPlan& plan, const UserAgentPolicy& user) {
  const std::string sid = client.create_session({plan.participant_id, plan.condition, plan.period, plan.sim_seed});
  const SubmitRequest request = scripted_submission(plan, user);
  const SubmitResult submitted = client.submit_task(sid, request);
  if (!submitted.dispatched) {
    log_at(LogLevel::Info, sid + ": participant declined the dispatch");
    return sid;
  }
  answer_confirmations(client.host(), client.port(), sid, user, mix_seed(plan.user_seed, 1));
  return sid;
}

TrialRecord simulate_trial(const TrialPlan& plan, const ExperimentConfig& config, const std::string& trial_id) {
  const SubmitRequest request = scripted_submission(plan, config.user);
  const TaskIntent intent = parse_intent(request.utterance);
  TrialRecord r;
  r.trial_id = trial_id;
  r.participant_id = plan.participant_id;
  r.condition = plan.condition;
  r.period = plan.period;
  r.object = intent.object;
  r.ready_ts_ms = 0;
  if (!request.pre_confirm->confirmed) return r;
  const std::int64_t dispatch = *request.ts_ms + request.pre_confirm->elapsed_ms;
  r.dispatch_ts_ms = dispatch;

  SimConfig sim = config.sim;
  sim.time_scale = 0.0;
  sim.max_retries = config.server.max_retries;
  Rng answers(mix_seed(plan.user_seed, 1));
  RecordingLink link([&](const ReportedTransition& failure) {
    if (plan.condition == Condition::Hidden) return TimedDecision{Decision::Retry, failure.ts_ms};
    ConfirmationRequestPayload req{failure.failure_category, 0, sim.max_retries};
    const UserAnswer a = scripted_user(config.user, req, answers);
    return TimedDecision{a.decision, failure.ts_ms + a.latency_ms};
  });
  const SimOutcome out = run_task(intent, sim, plan.sim_seed, link, dispatch);
  r.success = out.outcome.success;
  r.failure_category = out.outcome.category;
  r.grasp_attempts = out.grasp_attempts;
  for (const auto& t : out.transitions) r.transitions.push_back({t.to, t.ts_ms});
  r.terminal_ts_ms = out.transitions.back().ts_ms;
  return r;
}

std::vector<TrialRecord> simulate_batch(const ExperimentConfig& config) {
  std::vector<TrialRecord> trials;
  int n = 0;
  for (const auto& plan : plan_batch(config.participants, config.seed)) {
    char id[16];
    std::snprintf(id, sizeof id, "T%04d", ++n);
    trials.push_back(simulate_trial(plan, config, id));
  }
  return trials;
}

void write_report(const BatchReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "report.json", report.to_json().dump(2) + "\n");
  write_text(out_dir / "report.txt", report.to_text());
}

BatchResult run_batch(const ExperimentConfig& config, const BatchOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const auto& out = config.out_dir;
  std::filesystem::create_directories(out / "transcripts");
  const auto trials_path = out / "trials.ndjson";
  std::filesystem::remove(trials_path);

  ServerConfig server_config = config.server;
  server_config.log_path = trials_path;
  server_config.live_time_scale = 0.0;
  server_config.confirm_timeout = std::chrono::milliseconds(0);
  if (!options.split_process) server_config.port = 0;

  BatchResult result;
  result.plan = plan_batch(config.participants, config.seed, options.only_condition);

  std::unique_ptr<HttpServer> server;
  std::unique_ptr<ChildProcess> server_proc;
  std::unique_ptr<ChildProcess> agent_proc;
  std::unique_ptr<ExecutionAgent> agent;
  std::atomic<bool> stop_agent{false};
  std::thread agent_thread;
  int port = 0;

  if (options.split_process) {
    if (options.self_exe.empty()) config_error("split-process mode needs the executable path");
    auto effective = to_json(config);
    effective["server"]["port"] = 0;
    effective["server"]["live_time_scale"] = 0.0;
    effective["server"]["confirm_timeout_ms"] = 0;
    const auto config_path = std::filesystem::absolute(out / "effective_config.json");
    const auto port_file = std::filesystem::absolute(out / "server.port");
    std::filesystem::remove(port_file);
    write_text(config_path, effective.dump(2) + "\n");
    server_proc = std::make_unique<ChildProcess>(std::vector<std::string>{
        options.self_exe.string(), "serve", "--config", config_path.string(), "--port-file", port_file.string(),
        "--log-path", std::filesystem::absolute(trials_path).string()});
    port = wait_for_port_file(port_file, *server_proc);
    agent_proc = std::make_unique<ChildProcess>(std::vector<std::string>{
        options.self_exe.string(), "agent", "--config", config_path.string(), "--host", server_config.host, "--port",
        std::to_string(port)});
  } else {
    server = std::make_unique<HttpServer>(server_config);
    port = server->start();
    agent = std::make_unique<ExecutionAgent>(server_config.host, port, config.sim);
    agent->connect();
    agent_thread = std::thread([&agent, &stop_agent] { agent->run(stop_agent); });
  }

  ApiClient client(server_config.host, port);

  auto finish = [&] {
    stop_agent = true;
    if (agent_thread.joinable()) agent_thread.join();
    agent.reset();
    client.close();
    if (agent_proc) agent_proc->terminate();
    if (server) server->stop();
    if (server_proc) server_proc->terminate();
  };

  try {
    for (const auto& plan : result.plan) {
      std::string sid;
      for (int attempt = 0;; ++attempt) {
        try {
          sid = run_scripted_trial(client, plan, config.user);
          break;
        } catch (const Error& e) {
          // The split-process agent may not have registered yet.
          if (e.code() != ErrorCode::AgentUnavailable || attempt > 100) throw;
          std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
      }
      result.session_ids.push_back(sid);
      if (options.write_transcripts) {
        std::string text;
        for (const auto& ev : client.transcript(sid)) text += encode_event(ev) + "\n";
        write_text(out / "transcripts" / (sid + ".ndjson"), text);
      }
    }
  } catch (...) {
    finish();
    throw;
  }
  finish();

  result.trials = TrialLog::read_all(trials_path);
  result.all_terminal = result.trials.size() == result.plan.size();
  for (const auto& t : result.trials) result.all_terminal = result.all_terminal && t.terminal_ts_ms.has_value();
  if (!options.only_condition && result.all_terminal) {
    result.report = aggregate_report(result.trials);
    write_report(*result.report, out);
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

void run_live(const ExperimentConfig& config, const LiveOptions& options) {
  ServerConfig server_config = config.server;
  SimConfig sim = config.sim;
  if (!(sim.time_scale > 0.0)) {
    sim.time_scale = 1.0;
    log_at(LogLevel::Warn, "live mode needs a positive time_scale; using 1.0");
  }
  server_config.live_time_scale = sim.time_scale;
  std::filesystem::create_directories(config.out_dir);
  server_config.log_path = config.out_dir / "live_trials.ndjson";

  // Block the stop signals before any thread starts so sigwait sees them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  HttpServer server(server_config);
  const int port = server.start();
  std::atomic<bool> stop_agent{false};
  ExecutionAgent agent(server_config.host, port, sim);
  agent.connect();
  std::thread agent_thread([&] { agent.run(stop_agent); });

  ApiClient client(server_config.host, port);
  const std::string sid =
      client.create_session({"LIVE", options.condition, 1, sim.rng_seed});
  const std::string base = "http://" + server_config.host + ":" + std::to_string(port);
  std::cout << "session  " << sid << " (" << to_string(options.condition) << ")\n"
            << "stream   " << base << "/api/v1/sessions/" << sid << "/stream\n"
            << "submit   POST " << base << "/api/v1/sessions/" << sid << "/tasks {\"utterance\": ...}\n"
            << "confirm  POST " << base << "/api/v1/tasks/<task_id>/confirm {\"decision\": \"RETRY\"|\"ABORT\"}\n"
            << std::flush;

  if (options.utterance) {
    const auto submitted = client.submit_task(sid, {*options.utterance, std::nullopt, std::nullopt});
    std::cout << "task     " << submitted.task_id << " " << to_string(submitted.intent.object)
              << (submitted.dispatched ? "" : " (declined)") << "\n" << std::flush;
    if (submitted.dispatched) {
      ApiClient confirmer(server_config.host, port);
      Rng rng(mix_seed(sim.rng_seed, kUserStream));
      client.stream(sid, 1, StreamView::User, true, [&](const StreamEvent& ev) {
        std::cout << encode_event(ev) << "\n" << std::flush;
        if (const auto* req = ev.as<ConfirmationRequestPayload>(); req && options.scripted_user) {
          confirmer.confirm(ev.task_id, scripted_user(config.user, *req, rng).decision);
        }
        return true;
      });
    }
  } else {
    std::cout << "serving until interrupted\n" << std::flush;
    int sig = 0;
    sigwait(&stop_signals, &sig);
  }

  stop_agent = true;
  agent_thread.join();
  client.close();
  server.stop();
}

}  // namespace statebridge
