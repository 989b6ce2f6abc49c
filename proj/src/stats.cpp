#include "statebridge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "statebridge/error.hpp"
#include "statebridge/rng.hpp"

namespace statebridge {

namespace {

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double t_cdf(double x, double df) {
  if (!(df >= 1.0) || !std::isfinite(df)) {
    throw Error(ErrorCode::InvalidDf, "df must be >= 1, got " + std::to_string(df));
  }
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x == 0.0) return 0.5;
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  // Lower tail mass P[T < -|x|] = I_{df/(df+x^2)}(df/2, 1/2) / 2. Computing
  // df/(df+x^2) as 1/(1+x^2/df) keeps precision for small |x|.
  const double z = 1.0 / (1.0 + x * x / df);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, z);
  return x > 0 ? 1.0 - tail : tail;
}

SampleSummary summarize(std::span<const double> values) {
  SampleSummary s;
  s.n = values.size();
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

PairedTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "sample sizes differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.size() < 2) throw Error(ErrorCode::LengthMismatch, "need at least two pairs");

  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
  const SampleSummary s = summarize(d);
  const double n = static_cast<double>(d.size());

  PairedTestResult r;
  r.df = static_cast<int>(d.size()) - 1;
  r.mean_diff = s.mean;
  if (s.sd == 0.0) {
    if (s.mean == 0.0) {
      r.t_stat = 0.0;
      r.p_two_sided = 1.0;
      r.cohens_d = 0.0;
    } else {
      const double inf = std::numeric_limits<double>::infinity();
      r.t_stat = s.mean > 0 ? inf : -inf;
      r.p_two_sided = 0.0;
      r.cohens_d = r.t_stat;
    }
    return r;
  }
  r.t_stat = s.mean / (s.sd / std::sqrt(n));
  r.p_two_sided = std::min(1.0, 2.0 * t_cdf(-std::abs(r.t_stat), r.df));
  r.cohens_d = s.mean / s.sd;
  return r;
}

double binomial_two_sided_p(int k, int n) {
  if (n <= 0) return 1.0;
  const int tail_k = std::min(k, n - k);
  // P[X = i] = C(n, i) / 2^n, accumulated in log space.
  double tail = 0.0;
  for (int i = 0; i <= tail_k; ++i) {
    const double log_p = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                         n * std::log(2.0);
    tail += std::exp(log_p);
  }
  return std::min(1.0, 2.0 * tail);
}

double success_rate_test(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "sample sizes differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  int only_a = 0;
  int only_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !b[i]) ++only_a;
    if (!a[i] && b[i]) ++only_b;
  }
  return binomial_two_sided_p(only_a, only_a + only_b);
}

std::string_view to_string(ConditionOrder o) {
  return o == ConditionOrder::HiddenFirst ? "A->B" : "B->A";
}

std::vector<ScheduleEntry> counterbalance_schedule(int n_participants, std::uint64_t seed) {
  if (n_participants < 2) throw Error(ErrorCode::ConfigError, "need at least two participants");
  const int width = std::max<int>(2, static_cast<int>(std::to_string(n_participants).size()));

  std::vector<ConditionOrder> orders;
  const int first = (n_participants + 1) / 2;
  for (int i = 0; i < n_participants; ++i) {
    orders.push_back(i < first ? ConditionOrder::HiddenFirst : ConditionOrder::ExternalFirst);
  }
  // Fisher-Yates with the project RNG so the permutation is stable across
  // standard library implementations.
  Rng rng(seed);
  for (std::size_t i = orders.size() - 1; i > 0; --i) {
    std::swap(orders[i], orders[rng.below(i + 1)]);
  }

  std::vector<ScheduleEntry> schedule;
  for (int i = 0; i < n_participants; ++i) {
    std::string id = std::to_string(i + 1);
    id.insert(0, static_cast<std::size_t>(width) - std::min<std::size_t>(width, id.size()), '0');
    schedule.push_back({"P" + id, orders[static_cast<std::size_t>(i)]});
  }
  return schedule;
}

}  // namespace statebridge
