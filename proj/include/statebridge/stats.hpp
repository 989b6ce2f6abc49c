#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace statebridge {

/// Regularized incomplete beta I_x(a, b) by the modified Lentz continued
/// fraction. Requires a, b > 0 and x in [0, 1].
double incomplete_beta(double a, double b, double x);

/// Student-t CDF. Throws Error{InvalidDf} for df < 1 or non-finite df.
double t_cdf(double x, double df);

struct PairedTestResult {
  double t_stat = 0.0;
  int df = 1;
  double p_two_sided = 1.0;
  double mean_diff = 0.0;  // mean of b - a
  double cohens_d = 0.0;   // mean(d) / sd(d)
};

/// Paired t-test on d_i = b_i - a_i. Throws Error{LengthMismatch} for unequal
/// lengths or fewer than two pairs. A zero-variance difference reports
/// t = +/-inf, p = 0 when the mean is non-zero, and t = 0, p = 1 when every
/// difference is zero.
PairedTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Two-sided exact binomial test of `k` successes out of `n` at p = 0.5,
/// p = min(1, 2 * P[X <= min(k, n - k)]).
double binomial_two_sided_p(int k, int n);

/// Exact McNemar test on paired binary outcomes.
double success_rate_test(const std::vector<bool>& a, const std::vector<bool>& b);

struct SampleSummary {
  double mean = 0.0;
  double sd = 0.0;  // n - 1 denominator; 0 when n < 2
  std::size_t n = 0;
};

SampleSummary summarize(std::span<const double> values);

enum class ConditionOrder { HiddenFirst, ExternalFirst };  // A->B, B->A

std::string_view to_string(ConditionOrder o);

struct ScheduleEntry {
  std::string participant_id;
  ConditionOrder order = ConditionOrder::HiddenFirst;
};

/// ceil(n/2) A->B and floor(n/2) B->A sequences, shuffled under `seed`.
std::vector<ScheduleEntry> counterbalance_schedule(int n_participants, std::uint64_t seed);

}  // namespace statebridge
