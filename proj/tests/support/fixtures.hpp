#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "statebridge/client.hpp"
#include "statebridge/protocol.hpp"
#include "statebridge/rng.hpp"
#include "statebridge/server.hpp"
#include "statebridge/state.hpp"

namespace sbtest {

using namespace statebridge;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sbtest-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

template <typename T, std::size_t N>
T pick(const std::array<T, N>& all, Rng& rng) {
  return all[rng.below(N)];
}

inline std::string random_text(Rng& rng) {
  static const char* kPieces[] = {"I'm ", "heading ", "out", " \"quoted\" ", "caf\xc3\xa9 ", "tab\t", "line\nbreak ",
                                  "\\", "{object}", "50%", "\xe2\x9c\x93", ""};
  std::string s;
  const auto n = rng.below(6);
  for (std::uint64_t i = 0; i < n; ++i) s += kPieces[rng.below(std::size(kPieces))];
  return s;
}

/// A schema-valid event of the given kind with random field values.
inline StreamEvent random_event(StreamKind kind, Rng& rng) {
  StreamEvent e;
  e.seq = 1 + rng.below(1'000'000);
  e.ts_ms = static_cast<std::int64_t>(rng.below(10'000'000'000ull));
  e.session_id = "S" + std::to_string(rng.below(10000));
  e.task_id = "T" + std::to_string(rng.below(10000));
  switch (kind) {
    case StreamKind::StateTransition: {
      StateTransitionPayload p;
      p.from = pick(kAllStates, rng);
      std::vector<ExecutionState> succ;
      for (auto s : kAllStates) {
        if (legal_successors(p.from).contains(s)) succ.push_back(s);
      }
      p.to = succ[rng.below(succ.size())];
      if (p.to == ExecutionState::Failed) p.failure_category = pick(kAllFailureCategories, rng);
      e.payload = p;
      break;
    }
    case StreamKind::Externalization: {
      ExternalizationPayload p;
      p.state = pick(kAllStates, rng);
      p.text = random_text(rng);
      p.progress = rng.below(3) == 0 ? static_cast<double>(rng.below(2)) : rng.uniform();
      p.requires_response = rng.bernoulli(0.5);
      e.payload = p;
      break;
    }
    case StreamKind::ConfirmationRequest: {
      ConfirmationRequestPayload p;
      p.failure_category = pick(kAllFailureCategories, rng);
      p.max_retries = static_cast<int>(rng.below(5));
      p.retries_used = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.max_retries) + 1));
      e.payload = p;
      break;
    }
    case StreamKind::ConfirmationResponse:
      e.payload = ConfirmationResponsePayload{rng.bernoulli(0.5) ? Decision::Retry : Decision::Abort};
      break;
    case StreamKind::TaskResult: {
      TaskResultPayload p;
      p.success = rng.bernoulli(0.5);
      if (!p.success) p.failure_category = pick(kAllFailureCategories, rng);
      p.grasp_attempts = static_cast<int>(rng.below(10));
      e.payload = p;
      break;
    }
  }
  return e;
}

/// Server plus an execution agent thread on loopback.
class LiveStack {
 public:
  LiveStack(ServerConfig server, SimConfig sim) : server_(std::move(server)) {
    port_ = server_.start();
    agent_ = std::make_unique<ExecutionAgent>("127.0.0.1", port_, std::move(sim));
    thread_ = std::thread([this] { agent_->run(stop_); });
  }
  ~LiveStack() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
    server_.stop();
  }

  int port() const { return port_; }
  Coordinator& coordinator() { return server_.coordinator(); }

  /// Blocks until the agent has registered.
  void wait_for_agent() {
    for (int i = 0; i < 500 && !server_.coordinator().agent_registered(); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

 private:
  HttpServer server_;
  int port_ = 0;
  std::atomic<bool> stop_{false};
  std::unique_ptr<ExecutionAgent> agent_;
  std::thread thread_;
};

}  // namespace sbtest
