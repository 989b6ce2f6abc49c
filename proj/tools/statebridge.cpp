// statebridge command line: batch experiments, live sessions, and the
// server/agent processes used by --split-process.

#include <signal.h>

#include <CLI11.hpp>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "statebridge/client.hpp"
#include "statebridge/error.hpp"
#include "statebridge/experiment.hpp"
#include "statebridge/log.hpp"
#include "statebridge/server.hpp"
#include "statebridge/trial_log.hpp"

namespace sb = statebridge;

namespace {

sigset_t block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

sb::ExperimentConfig load_or_default(const std::string& path) {
  if (path.empty()) {
    sb::ExperimentConfig c;
    c.server.default_user = c.user;
    return c;
  }
  return sb::load_experiment_config(path);
}

std::filesystem::path self_exe(const char* argv0) {
  std::error_code ec;
  auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::filesystem::absolute(argv0) : p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"statebridge: externalized robot task state, simulated end to end"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> participants;
  bool live = false;
  std::string condition_name;
  bool split = false;
  std::string utterance;
  bool scripted = false;

  auto* run = app.add_subcommand("run", "Run a counterbalanced batch, or a live session with --live");
  run->add_option("--config", config_path, "Experiment config file")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Batch seed");
  run->add_option("--participants", participants, "Number of participants")->check(CLI::Range(2, 100000));
  run->add_flag("--live", live, "Serve a real-time session for a stream client");
  run->add_option("--condition", condition_name, "hidden|external");
  run->add_flag("--split-process", split, "Run server and agent as separate processes");
  run->add_option("--utterance", utterance, "Live mode: submit this request and exit after the result");
  run->add_flag("--scripted-user", scripted, "Live mode: answer confirmations with the configured user policy");

  std::string host = "127.0.0.1";
  int port = 0;
  std::string port_file;
  std::string log_path;
  auto* serve = app.add_subcommand("serve", "Run the coordination server until interrupted");
  serve->add_option("--config", config_path, "Experiment config file (server section)")->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port, 0 for any");
  serve->add_option("--port-file", port_file, "Write the bound port here");
  serve->add_option("--log-path", log_path, "Trial log file");

  auto* agent = app.add_subcommand("agent", "Run the simulated execution agent against a server");
  agent->add_option("--config", config_path, "Experiment config file (sim section)")->check(CLI::ExistingFile);
  agent->add_option("--host", host, "Server address");
  agent->add_option("--port", port, "Server port")->required();

  std::string trials_path;
  auto* report = app.add_subcommand("report", "Aggregate a trial log into report files");
  report->add_option("--trials", trials_path, "Trial log file")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto config = load_or_default(config_path);
      if (!out_dir.empty()) config.out_dir = out_dir;
      if (seed) config.seed = *seed;
      if (participants) config.participants = *participants;
      std::optional<sb::Condition> condition;
      if (!condition_name.empty()) {
        condition = sb::parse_condition(condition_name);
        if (!condition) throw sb::Error(sb::ErrorCode::ConfigError, "condition must be hidden or external");
      }
      if (live) {
        sb::LiveOptions options;
        options.condition = condition.value_or(sb::Condition::External);
        if (!utterance.empty()) options.utterance = utterance;
        options.scripted_user = scripted;
        sb::run_live(config, options);
        return 0;
      }
      sb::BatchOptions options;
      options.only_condition = condition;
      options.split_process = split;
      options.self_exe = self_exe(argv[0]);
      const auto result = sb::run_batch(config, options);
      if (result.report) std::cout << result.report->to_text();
      std::cout << "\n" << result.trials.size() << " of " << result.plan.size() << " trials terminal, "
                << result.wall_seconds << " s wall; output in " << config.out_dir.string() << "\n";
      return result.all_terminal ? 0 : 1;
    }

    if (*serve) {
      const auto stop = block_stop_signals();
      auto config = load_or_default(config_path);
      auto server_config = config.server;
      if (serve->count("--host")) server_config.host = host;
      if (serve->count("--port")) server_config.port = port;
      if (!log_path.empty()) server_config.log_path = log_path;
      sb::HttpServer server(server_config);
      const int bound = server.start();
      if (!port_file.empty()) {
        const auto tmp = port_file + ".tmp";
        std::ofstream(tmp) << bound << "\n";
        std::filesystem::rename(tmp, port_file);
      }
      std::cout << "listening on " << server_config.host << ":" << bound << std::endl;
      int sig = 0;
      sigwait(&stop, &sig);
      server.stop();
      return 0;
    }

    if (*agent) {
      const auto stop_set = block_stop_signals();
      auto config = load_or_default(config_path);
      std::atomic<bool> stop{false};
      sb::ExecutionAgent exec(host, port, config.sim);
      std::thread worker([&] { exec.run(stop); });
      int sig = 0;
      sigwait(&stop_set, &sig);
      stop = true;
      worker.join();
      return 0;
    }

    if (*report) {
      const auto trials = sb::TrialLog::read_all(trials_path);
      const auto r = sb::aggregate_report(trials);
      sb::write_report(r, out_dir);
      std::cout << r.to_text();
      return 0;
    }
  } catch (const sb::Error& e) {
    std::cerr << "statebridge: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "statebridge: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
