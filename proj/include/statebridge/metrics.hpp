#pragma once

// Objective metrics per trial and the paired condition comparison over a batch.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "statebridge/stats.hpp"
#include "statebridge/trial_log.hpp"

namespace statebridge {

// Durations are kept in integer ms so that end_to_end = initiation + execution
// holds exactly; the *_s() accessors convert for reporting.
struct TrialMetrics {
  std::int64_t initiation_ms = 0;
  std::int64_t execution_ms = 0;
  std::int64_t end_to_end_ms = 0;
  int grasp_attempts = 0;
  bool success = false;
  std::optional<FailureCategory> failure_category;

  double initiation_s() const { return initiation_ms / 1000.0; }
  double execution_s() const { return execution_ms / 1000.0; }
  double end_to_end_s() const { return end_to_end_ms / 1000.0; }
};

/// Throws Error{MalformedTrial} for missing or non-monotone timestamps.
TrialMetrics extract_metrics(const TrialRecord& trial);

struct MetricRow {
  std::string name;
  SampleSummary hidden;
  SampleSummary external;
  PairedTestResult test;  // external - hidden
};

struct PeriodRow {
  std::string name;
  double first_mean = 0.0;
  double second_mean = 0.0;
  double hidden_first_mean = 0.0;
  double hidden_second_mean = 0.0;
  double external_first_mean = 0.0;
  double external_second_mean = 0.0;
};

struct BatchReport {
  int n_pairs = 0;
  std::vector<MetricRow> rows;  // Init, Exec, Total, Grasp
  double success_rate_hidden = 0.0;
  double success_rate_external = 0.0;
  double success_p = 1.0;  // exact McNemar
  std::map<FailureCategory, int> failures_hidden;
  std::map<FailureCategory, int> failures_external;
  std::vector<PeriodRow> period_split;

  const MetricRow& row(const std::string& name) const;
  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

/// Pairs trials by participant (one HIDDEN and one EXTERNAL each). Throws
/// Error{UnpairedData} when the pairing is incomplete.
BatchReport aggregate_report(const std::vector<TrialRecord>& trials);

}  // namespace statebridge
