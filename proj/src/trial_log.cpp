#include "statebridge/trial_log.hpp"

#include <fstream>
#include <json.hpp>

#include "statebridge/error.hpp"

namespace statebridge {

using ojson = nlohmann::ordered_json;

namespace {

ojson optional_ts(const std::optional<std::int64_t>& ts) { return ts ? ojson(*ts) : ojson(nullptr); }

std::optional<std::int64_t> read_ts(const ojson& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number_integer()) throw Error(ErrorCode::SchemaViolation, std::string(key) + " must be an integer");
  return v.get<std::int64_t>();
}

}  // namespace

std::string encode_trial(const TrialRecord& r) {
  ojson j;
  j["trial_id"] = r.trial_id;
  j["participant_id"] = r.participant_id;
  j["condition"] = to_string(r.condition);
  j["period"] = r.period;
  j["object"] = to_string(r.object);
  j["outcome"] = r.success ? "SUCCESS" : "FAILURE";
  j["failure_category"] = r.failure_category ? ojson(to_string(*r.failure_category)) : ojson(nullptr);
  j["ready_ts_ms"] = optional_ts(r.ready_ts_ms);
  j["dispatch_ts_ms"] = optional_ts(r.dispatch_ts_ms);
  j["terminal_ts_ms"] = optional_ts(r.terminal_ts_ms);
  j["grasp_attempts"] = r.grasp_attempts;
  ojson transitions = ojson::array();
  for (const auto& t : r.transitions) {
    ojson tj;
    tj["to"] = to_string(t.to);
    tj["ts_ms"] = t.ts_ms;
    transitions.push_back(std::move(tj));
  }
  j["transitions"] = std::move(transitions);
  return j.dump();
}

TrialRecord decode_trial(std::string_view line) {
  ojson j;
  try {
    j = ojson::parse(line.begin(), line.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  try {
    TrialRecord r;
    r.trial_id = j.at("trial_id").get<std::string>();
    r.participant_id = j.at("participant_id").get<std::string>();
    auto cond = parse_condition(j.at("condition").get<std::string>());
    if (!cond) throw Error(ErrorCode::SchemaViolation, "unknown condition");
    r.condition = *cond;
    r.period = j.at("period").get<int>();
    auto object = parse_object(j.at("object").get<std::string>());
    if (!object) throw Error(ErrorCode::SchemaViolation, "unknown object");
    r.object = *object;
    const auto outcome = j.at("outcome").get<std::string>();
    if (outcome != "SUCCESS" && outcome != "FAILURE") throw Error(ErrorCode::SchemaViolation, "unknown outcome");
    r.success = outcome == "SUCCESS";
    if (!j.at("failure_category").is_null()) {
      r.failure_category = parse_failure_category(j.at("failure_category").get<std::string>());
      if (!r.failure_category) throw Error(ErrorCode::SchemaViolation, "unknown failure_category");
    }
    r.ready_ts_ms = read_ts(j, "ready_ts_ms");
    r.dispatch_ts_ms = read_ts(j, "dispatch_ts_ms");
    r.terminal_ts_ms = read_ts(j, "terminal_ts_ms");
    r.grasp_attempts = j.at("grasp_attempts").get<int>();
    for (const auto& tj : j.at("transitions")) {
      auto to = parse_state(tj.at("to").get<std::string>());
      if (!to) throw Error(ErrorCode::SchemaViolation, "unknown state in transitions");
      r.transitions.push_back({*to, tj.at("ts_ms").get<std::int64_t>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
}

TrialLog::TrialLog(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    for (const auto& r : read_all(path_)) persisted_.insert(r.trial_id);
  } else if (path_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
  }
}

bool TrialLog::append(const TrialRecord& record) {
  std::lock_guard lock(mu_);
  if (persisted_.count(record.trial_id)) return false;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(ErrorCode::StorageError, "cannot open " + path_.string());
  out << encode_trial(record) << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::StorageError, "write failed for " + path_.string());
  persisted_.insert(record.trial_id);
  return true;
}

std::vector<TrialRecord> TrialLog::read_all(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StorageError, "cannot open " + path.string());
  std::vector<TrialRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(decode_trial(line));
  }
  return out;
}

}  // namespace statebridge
