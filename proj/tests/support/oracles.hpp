#pragma once

// Reference implementations for the statistics checks. Written separately from
// src/stats.cpp: Boost.Math for the t distribution, long double accumulation,
// exact integer binomial sums.

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "statebridge/rng.hpp"

namespace sbtest {

inline double oracle_t_cdf(double x, double df) {
  return boost::math::cdf(boost::math::students_t_distribution<double>(df), x);
}

struct OraclePaired {
  double t = 0.0;
  double p = 1.0;
  double d = 0.0;
  double mean_diff = 0.0;
};

inline OraclePaired oracle_paired(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  long double sum = 0.0L;
  for (std::size_t i = 0; i < n; ++i) sum += static_cast<long double>(b[i]) - a[i];
  const long double mean = sum / n;
  long double ss = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const long double dev = (static_cast<long double>(b[i]) - a[i]) - mean;
    ss += dev * dev;
  }
  const long double sd = std::sqrt(ss / (n - 1));
  OraclePaired r;
  r.mean_diff = static_cast<double>(mean);
  r.t = static_cast<double>(mean / (sd / std::sqrt(static_cast<long double>(n))));
  r.d = static_cast<double>(mean / sd);
  boost::math::students_t_distribution<double> dist(static_cast<double>(n - 1));
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

inline std::uint64_t choose(int n, int k) {
  std::uint64_t c = 1;
  for (int i = 1; i <= k; ++i) c = c * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return c;
}

/// Two-sided exact McNemar by summing every binomial outcome no more likely
/// than the observed one.
inline double oracle_mcnemar(const std::vector<bool>& a, const std::vector<bool>& b) {
  int only_a = 0;
  int only_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    only_a += a[i] && !b[i];
    only_b += !a[i] && b[i];
  }
  const int n = only_a + only_b;
  if (n == 0) return 1.0;
  const std::uint64_t observed = choose(n, only_a);
  long double mass = 0.0L;
  for (int i = 0; i <= n; ++i) {
    const std::uint64_t c = choose(n, i);
    if (c <= observed) mass += static_cast<long double>(c);
  }
  return std::min(1.0, static_cast<double>(mass / std::ldexp(1.0L, n)));
}

struct PairedVector {
  std::vector<double> a;
  std::vector<double> b;
};

/// Fixed paired samples: hand-picked cases followed by seeded draws.
inline std::vector<PairedVector> fixed_paired_vectors() {
  std::vector<PairedVector> v = {
      {{0, 0, 0}, {1, 2, 3}},
      {{1, 2, 3, 4, 5}, {2, 4, 5, 4, 9}},
      {{33.47, 30.1, 35.2, 29.9}, {49.93, 47.0, 52.4, 44.8}},
      {{10, 20}, {11, 25}},
      {{1e6, 1e6 + 1, 1e6 + 3}, {1e6 + 2, 1e6 + 2, 1e6 + 7}},
      {{0.001, 0.002, 0.004, 0.003}, {0.0011, 0.0019, 0.0045, 0.0036}},
      {{5, 5, 5, 5, 5, 5}, {4, 6, 5, 7, 3, 5.5}},
      {{-3, -1, 2, 8}, {-2.5, 0, 1, 9.25}},
  };
  statebridge::Rng rng(20240601);
  for (int k = 0; k < 16; ++k) {
    const std::size_t n = 3 + rng.below(40);
    const double shift = (rng.uniform() - 0.5) * 40.0;
    const double scale = 1.0 + rng.uniform() * 60.0;
    PairedVector pv;
    for (std::size_t i = 0; i < n; ++i) {
      const double base = 100.0 + scale * rng.normal();
      pv.a.push_back(base);
      pv.b.push_back(base + shift + scale * 0.5 * rng.normal());
    }
    v.push_back(std::move(pv));
  }
  return v;
}

struct BinaryVector {
  std::vector<bool> a;
  std::vector<bool> b;
};

/// Paired outcomes with `only_a` A-only successes, `only_b` B-only successes
/// and `both`/`neither` concordant pairs, interleaved.
inline BinaryVector binary_vector(int only_a, int only_b, int both, int neither) {
  BinaryVector v;
  auto push = [&](bool x, bool y, int count) {
    for (int i = 0; i < count; ++i) {
      v.a.push_back(x);
      v.b.push_back(y);
    }
  };
  push(true, false, only_a);
  push(true, true, both);
  push(false, true, only_b);
  push(false, false, neither);
  return v;
}

inline std::vector<BinaryVector> fixed_binary_vectors() {
  std::vector<BinaryVector> v = {
      binary_vector(0, 0, 5, 5),   binary_vector(1, 0, 3, 0),  binary_vector(8, 1, 10, 2),
      binary_vector(1, 8, 0, 0),   binary_vector(3, 4, 20, 3), binary_vector(2, 3, 24, 1),
      binary_vector(0, 12, 3, 3),  binary_vector(15, 15, 0, 0), binary_vector(5, 0, 25, 0),
      binary_vector(30, 29, 1, 0), binary_vector(7, 2, 0, 21), binary_vector(0, 1, 29, 0),
  };
  statebridge::Rng rng(77);
  for (int k = 0; k < 12; ++k) {
    v.push_back(binary_vector(static_cast<int>(rng.below(25)), static_cast<int>(rng.below(25)),
                              static_cast<int>(rng.below(10)), static_cast<int>(rng.below(10))));
  }
  return v;
}

inline bool close(double x, double y, double tol) { return std::abs(x - y) <= tol * std::max(1.0, std::abs(y)); }

}  // namespace sbtest
