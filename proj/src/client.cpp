#include "statebridge/client.hpp"

#include <httplib.h>

#include <thread>

#include "statebridge/api.hpp"
#include "statebridge/error.hpp"
#include "statebridge/log.hpp"

namespace statebridge {

namespace {

constexpr auto kLongPollSlice = std::chrono::milliseconds(5000);

[[noreturn]] void raise_from(const httplib::Result& r, const std::string& what) {
  if (!r) throw Error(ErrorCode::ServerUnreachable, what + ": " + httplib::to_string(r.error()));
  auto j = nlohmann::json::parse(r->body, nullptr, false);
  ErrorCode code = ErrorCode::StorageError;
  std::string message = what + ": HTTP " + std::to_string(r->status);
  if (j.is_object() && j.contains("error") && j["error"].is_string()) {
    if (auto c = parse_error_code(j["error"].get<std::string>())) code = *c;
    if (j.contains("message") && j["message"].is_string()) {
      message = j["message"].get<std::string>();
      const std::string prefix = std::string(to_string(code)) + ": ";
      if (message.rfind(prefix, 0) == 0) message = message.substr(prefix.size());
    }
  }
  throw Error(code, message);
}

nlohmann::json ok_json(const httplib::Result& r, const std::string& what) {
  if (!r || r->status >= 300) raise_from(r, what);
  auto j = nlohmann::json::parse(r->body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseError, what + ": response is not JSON");
  return j;
}

std::string body(const nlohmann::ordered_json& j) { return j.dump(); }

constexpr const char* kJson = "application/json";

}  // namespace

ApiClient::ApiClient(std::string host, int port)
    : host_(std::move(host)), port_(port), http_(std::make_unique<httplib::Client>(host_, port_)) {
  http_->set_keep_alive(true);
  http_->set_connection_timeout(std::chrono::seconds(5));
  http_->set_read_timeout(std::chrono::seconds(40));
}

ApiClient::~ApiClient() = default;

void ApiClient::close() { http_->stop(); }

std::string ApiClient::create_session(const SessionSpec& spec) {
  auto j = ok_json(http_->Post("/api/v1/sessions", body(session_spec_to_json(spec)), kJson), "create session");
  return j.at("session_id").get<std::string>();
}

SubmitResult ApiClient::submit_task(const std::string& session_id, const SubmitRequest& request) {
  auto j = ok_json(http_->Post("/api/v1/sessions/" + session_id + "/tasks", body(submit_request_to_json(request)), kJson),
                   "submit task");
  return submit_result_from_json(j);
}

void ApiClient::confirm(const std::string& task_id, Decision decision, std::optional<std::int64_t> ts_ms) {
  nlohmann::ordered_json j;
  j["decision"] = to_string(decision);
  if (ts_ms) j["ts_ms"] = *ts_ms;
  ok_json(http_->Post("/api/v1/tasks/" + task_id + "/confirm", body(j), kJson), "confirm");
}

nlohmann::json ApiClient::session_summary(const std::string& session_id) {
  return ok_json(http_->Get("/api/v1/sessions/" + session_id), "session summary");
}

void ApiClient::stream(const std::string& session_id, std::uint64_t from_seq, StreamView view, bool until_result,
                       const std::function<bool(const StreamEvent&)>& on_event) {
  // A dedicated connection: a quiet stream can stay open for a long time.
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(std::chrono::seconds(5));
  cli.set_read_timeout(std::chrono::hours(24));
  std::string path = "/api/v1/sessions/" + session_id + "/stream?from_seq=" + std::to_string(from_seq) +
                     "&view=" + (view == StreamView::Full ? "full" : "user");
  if (until_result) path += "&until=result";

  std::string buffer;
  std::string error_body;
  int status = 0;
  auto r = cli.Get(
      path,
      [&](const httplib::Response& res) {
        status = res.status;
        return true;
      },
      [&](const char* data, std::size_t len) {
        if (status >= 300) {
          error_body.append(data, len);
          return true;
        }
        buffer.append(data, len);
        std::size_t pos;
        while ((pos = buffer.find('\n')) != std::string::npos) {
          const std::string line = buffer.substr(0, pos);
          buffer.erase(0, pos + 1);
          if (line.empty()) continue;
          if (!on_event(decode_event(line))) return false;
        }
        return true;
      });
  if (r && r->status >= 300) {
    r->body = error_body;
    raise_from(r, "stream");
  }
  if (!r && r.error() != httplib::Error::Canceled) raise_from(r, "stream");
}

std::vector<StreamEvent> ApiClient::transcript(const std::string& session_id) {
  auto r = http_->Get("/api/v1/sessions/" + session_id + "/stream?from_seq=1&view=full&follow=0");
  if (!r || r->status >= 300) raise_from(r, "transcript");
  std::vector<StreamEvent> events;
  std::size_t start = 0;
  const std::string& b = r->body;
  while (start < b.size()) {
    auto end = b.find('\n', start);
    if (end == std::string::npos) end = b.size();
    if (end > start) events.push_back(decode_event(std::string_view(b).substr(start, end - start)));
    start = end + 1;
  }
  return events;
}

int ApiClient::register_agent() {
  auto j = ok_json(http_->Post("/agent/v1/register", "{}", kJson), "register agent");
  return j.value("max_retries", kDefaultMaxRetries);
}

std::optional<DispatchedTask> ApiClient::next_task(std::chrono::milliseconds wait) {
  auto r = http_->Get("/agent/v1/next?wait_ms=" + std::to_string(wait.count()));
  if (r && r->status == 204) return std::nullopt;
  return dispatched_task_from_json(ok_json(r, "next task"));
}

void ApiClient::post_state(const std::string& task_id, const StateUpdate& update) {
  ok_json(http_->Post("/agent/v1/tasks/" + task_id + "/state", body(state_update_to_json(update)), kJson), "post state");
}

std::optional<TimedDecision> ApiClient::decision(const std::string& task_id, std::chrono::milliseconds wait) {
  auto r = http_->Get("/agent/v1/tasks/" + task_id + "/decision?wait_ms=" + std::to_string(wait.count()));
  if (r && r->status == 204) return std::nullopt;
  return decision_from_json(ok_json(r, "decision"));
}

void HttpAgentLink::report(const ReportedTransition& t) {
  client_.post_state(task_id_, {t.from, t.to, t.failure_category, t.ts_ms, t.grasp_attempts});
}

TimedDecision HttpAgentLink::await_decision(const ReportedTransition&) {
  while (true) {
    if (auto d = client_.decision(task_id_, kLongPollSlice)) return *d;
  }
}

ExecutionAgent::ExecutionAgent(std::string host, int port, SimConfig config)
    : client_(std::move(host), port), config_(std::move(config)) {
  config_.validate();
}

void ExecutionAgent::connect() { config_.max_retries = client_.register_agent(); }

bool ExecutionAgent::run_once(std::chrono::milliseconds wait) {
  auto task = client_.next_task(wait);
  if (!task) return false;
  const std::uint64_t seed = task->seed ? *task->seed : mix_seed(config_.rng_seed, counter_);
  ++counter_;
  HttpAgentLink link(client_, task->task_id);
  try {
    const SimOutcome out = run_task(task->intent, config_, seed, link, task->dispatch_ts_ms);
    log_at(LogLevel::Info, task->task_id + " finished " + (out.outcome.success ? "SUCCESS" : "FAILURE"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ServerUnreachable) throw;
    // The server rejected a report; it has already closed the task.
    log_at(LogLevel::Warn, task->task_id + " aborted: " + e.what());
  }
  ++tasks_run_;
  return true;
}

void ExecutionAgent::run(const std::atomic<bool>& stop) {
  bool connected = false;
  while (!stop) {
    try {
      if (!connected) {
        connect();
        connected = true;
      }
      run_once(std::chrono::milliseconds(500));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ServerUnreachable) throw;
      log_at(LogLevel::Warn, std::string("agent: ") + e.what());
      connected = false;
      std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
  }
  client_.close();
}

}  // namespace statebridge
