#include "statebridge/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "statebridge/error.hpp"

namespace statebridge {

TrialMetrics extract_metrics(const TrialRecord& trial) {
  if (!trial.ready_ts_ms || !trial.dispatch_ts_ms || !trial.terminal_ts_ms) {
    throw Error(ErrorCode::MalformedTrial, "trial " + trial.trial_id + " is missing timestamps");
  }
  const auto ready = *trial.ready_ts_ms;
  const auto dispatch = *trial.dispatch_ts_ms;
  const auto terminal = *trial.terminal_ts_ms;
  if (ready < 0 || dispatch < ready || terminal < dispatch) {
    throw Error(ErrorCode::MalformedTrial, "trial " + trial.trial_id + " has non-monotone timestamps");
  }
  TrialMetrics m;
  m.initiation_ms = dispatch - ready;
  m.execution_ms = terminal - dispatch;
  m.end_to_end_ms = terminal - ready;
  m.grasp_attempts = trial.grasp_attempts;
  m.success = trial.success;
  m.failure_category = trial.failure_category;
  return m;
}

namespace {

struct Pair {
  const TrialRecord* hidden = nullptr;
  const TrialRecord* external = nullptr;
};

using Extractor = std::function<double(const TrialMetrics&)>;

const std::vector<std::pair<std::string, Extractor>>& metric_extractors() {
  static const std::vector<std::pair<std::string, Extractor>> k = {
      {"Init (s)", [](const TrialMetrics& m) { return m.initiation_s(); }},
      {"Exec (s)", [](const TrialMetrics& m) { return m.execution_s(); }},
      {"Total (s)", [](const TrialMetrics& m) { return m.end_to_end_s(); }},
      {"Grasp Att.", [](const TrialMetrics& m) { return static_cast<double>(m.grasp_attempts); }},
  };
  return k;
}

double mean_of(const std::vector<double>& v) { return summarize(v).mean; }

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string p_text(double p) {
  if (p < 0.001) return "<0.001";
  return fixed(p, 3);
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

BatchReport aggregate_report(const std::vector<TrialRecord>& trials) {
  std::map<std::string, Pair> pairs;
  for (const auto& t : trials) {
    auto& p = pairs[t.participant_id];
    auto& slot = t.condition == Condition::Hidden ? p.hidden : p.external;
    if (slot) throw Error(ErrorCode::UnpairedData, "participant " + t.participant_id + " has duplicate trials");
    slot = &t;
  }
  for (const auto& [id, p] : pairs) {
    if (!p.hidden || !p.external) throw Error(ErrorCode::UnpairedData, "participant " + id + " lacks a condition");
  }
  if (pairs.size() < 2) throw Error(ErrorCode::UnpairedData, "need at least two paired participants");

  std::vector<TrialMetrics> hidden;
  std::vector<TrialMetrics> external;
  std::vector<int> hidden_period;
  std::vector<int> external_period;
  for (const auto& [id, p] : pairs) {
    hidden.push_back(extract_metrics(*p.hidden));
    external.push_back(extract_metrics(*p.external));
    hidden_period.push_back(p.hidden->period);
    external_period.push_back(p.external->period);
  }

  BatchReport r;
  r.n_pairs = static_cast<int>(pairs.size());
  for (const auto& [name, get] : metric_extractors()) {
    std::vector<double> a;
    std::vector<double> b;
    for (const auto& m : hidden) a.push_back(get(m));
    for (const auto& m : external) b.push_back(get(m));
    r.rows.push_back({name, summarize(a), summarize(b), paired_t_test(a, b)});

    PeriodRow pr{name};
    std::vector<double> first, second, hf, hs, ef, es;
    for (std::size_t i = 0; i < a.size(); ++i) {
      (hidden_period[i] == 1 ? first : second).push_back(a[i]);
      (hidden_period[i] == 1 ? hf : hs).push_back(a[i]);
      (external_period[i] == 1 ? first : second).push_back(b[i]);
      (external_period[i] == 1 ? ef : es).push_back(b[i]);
    }
    pr.first_mean = mean_of(first);
    pr.second_mean = mean_of(second);
    pr.hidden_first_mean = mean_of(hf);
    pr.hidden_second_mean = mean_of(hs);
    pr.external_first_mean = mean_of(ef);
    pr.external_second_mean = mean_of(es);
    r.period_split.push_back(pr);
  }

  std::vector<bool> sa;
  std::vector<bool> sb;
  for (auto c : kAllFailureCategories) {
    r.failures_hidden[c] = 0;
    r.failures_external[c] = 0;
  }
  for (const auto& m : hidden) {
    sa.push_back(m.success);
    if (!m.success && m.failure_category) r.failures_hidden[*m.failure_category] += 1;
  }
  for (const auto& m : external) {
    sb.push_back(m.success);
    if (!m.success && m.failure_category) r.failures_external[*m.failure_category] += 1;
  }
  auto rate = [](const std::vector<bool>& v) {
    double k = 0;
    for (bool x : v) k += x ? 1 : 0;
    return k / static_cast<double>(v.size());
  };
  r.success_rate_hidden = rate(sa);
  r.success_rate_external = rate(sb);
  r.success_p = success_rate_test(sa, sb);
  return r;
}

const MetricRow& BatchReport::row(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw Error(ErrorCode::UnpairedData, "no report row '" + name + "'");
}

nlohmann::ordered_json BatchReport::to_json() const {
  using oj = nlohmann::ordered_json;
  auto finite = [](double v) { return std::isfinite(v) ? oj(v) : oj(v > 0 ? "inf" : "-inf"); };
  oj j;
  j["n_pairs"] = n_pairs;
  j["difference_convention"] = "external - hidden";
  oj metrics = oj::array();
  for (const auto& row : rows) {
    oj m;
    m["metric"] = row.name;
    m["hidden"] = {{"mean", row.hidden.mean}, {"sd", row.hidden.sd}, {"n", row.hidden.n}};
    m["external"] = {{"mean", row.external.mean}, {"sd", row.external.sd}, {"n", row.external.n}};
    m["t"] = finite(row.test.t_stat);
    m["df"] = row.test.df;
    m["p"] = row.test.p_two_sided;
    m["mean_diff"] = row.test.mean_diff;
    m["cohens_d"] = finite(row.test.cohens_d);
    metrics.push_back(std::move(m));
  }
  j["metrics"] = std::move(metrics);
  j["success"] = {{"hidden_rate", success_rate_hidden},
                  {"external_rate", success_rate_external},
                  {"test", "exact McNemar"},
                  {"p", success_p}};
  oj failures;
  for (auto c : kAllFailureCategories) {
    failures[std::string(to_string(c))] = {{"hidden", failures_hidden.at(c)},
                                           {"external", failures_external.at(c)}};
  }
  j["failure_breakdown"] = std::move(failures);
  oj periods = oj::array();
  for (const auto& p : period_split) {
    periods.push_back({{"metric", p.name},
                       {"first_mean", p.first_mean},
                       {"second_mean", p.second_mean},
                       {"hidden_first_mean", p.hidden_first_mean},
                       {"hidden_second_mean", p.hidden_second_mean},
                       {"external_first_mean", p.external_first_mean},
                       {"external_second_mean", p.external_second_mean}});
  }
  j["period_split"] = std::move(periods);
  return j;
}

std::string BatchReport::to_text() const {
  std::ostringstream out;
  const std::string t_header = "t(" + std::to_string(n_pairs - 1) + ")";
  out << "Objective performance, A = hidden, B = external (n = " << n_pairs << " pairs; t on B - A)\n";
  out << pad("Metric", 12) << pad("A Mean (SD)", 20) << pad("B Mean (SD)", 20) << pad(t_header, 10)
      << pad("p", 10) << "d\n";
  for (const auto& row : rows) {
    out << pad(row.name, 12)
        << pad(fixed(row.hidden.mean, 2) + " (" + fixed(row.hidden.sd, 2) + ")", 20)
        << pad(fixed(row.external.mean, 2) + " (" + fixed(row.external.sd, 2) + ")", 20)
        << pad(fixed(row.test.t_stat, 2), 10) << pad(p_text(row.test.p_two_sided), 10)
        << fixed(row.test.cohens_d, 2) << "\n";
  }
  out << pad("Suc. Rate", 12) << pad(fixed(100.0 * success_rate_hidden, 1) + "%", 20)
      << pad(fixed(100.0 * success_rate_external, 1) + "%", 20) << pad("--", 10)
      << pad(p_text(success_p), 10) << "(exact McNemar)\n";

  out << "\nFailure breakdown (failed trials by category)\n";
  out << pad("Category", 20) << pad("A", 6) << "B\n";
  for (auto c : kAllFailureCategories) {
    out << pad(std::string(to_string(c)), 20) << pad(std::to_string(failures_hidden.at(c)), 6)
        << failures_external.at(c) << "\n";
  }

  out << "\nPeriod split (first vs second exposure means)\n";
  out << pad("Metric", 12) << pad("P1", 10) << pad("P2", 10) << pad("A@P1", 10) << pad("A@P2", 10)
      << pad("B@P1", 10) << "B@P2\n";
  for (const auto& p : period_split) {
    out << pad(p.name, 12) << pad(fixed(p.first_mean, 2), 10) << pad(fixed(p.second_mean, 2), 10)
        << pad(fixed(p.hidden_first_mean, 2), 10) << pad(fixed(p.hidden_second_mean, 2), 10)
        << pad(fixed(p.external_first_mean, 2), 10) << fixed(p.external_second_mean, 2) << "\n";
  }
  return out.str();
}

}  // namespace statebridge
