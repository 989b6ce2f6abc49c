#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "statebridge/error.hpp"
#include "statebridge/stats.hpp"
#include "support/oracles.hpp"

using namespace statebridge;

TEST_SUITE("stats") {
  TEST_CASE("t_cdf reference points") {
    for (double df : {1.0, 2.0, 3.5, 10.0, 29.0, 1000.0}) CHECK(t_cdf(0.0, df) == 0.5);
    CHECK(std::abs(t_cdf(1.0, 1.0) - 0.75) < 1e-12);
    CHECK(std::abs(t_cdf(2.0, 10.0) - 0.9633059826146) < 1e-10);
    // df = 2 has the closed form 1/2 + x / (2 sqrt(2 + x^2)).
    for (double x : {-4.0, -0.3, 0.7, 2.5, 11.0}) {
      CHECK(std::abs(t_cdf(x, 2.0) - (0.5 + x / (2.0 * std::sqrt(2.0 + x * x)))) < 1e-12);
    }
  }

  TEST_CASE("t_cdf against boost") {
    for (double df : {1.0, 2.0, 3.0, 5.0, 9.0, 29.0, 59.0, 250.0}) {
      for (double x = -12.0; x <= 12.0; x += 0.37) {
        CHECK(std::abs(t_cdf(x, df) - sbtest::oracle_t_cdf(x, df)) < 1e-10);
        CHECK(std::abs(t_cdf(x, df) + t_cdf(-x, df) - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("t_cdf edge cases") {
    CHECK(t_cdf(std::numeric_limits<double>::infinity(), 3) == 1.0);
    CHECK(t_cdf(-std::numeric_limits<double>::infinity(), 3) == 0.0);
    for (double df : {0.0, 0.5, -1.0, std::numeric_limits<double>::infinity(), std::nan("")}) {
      try {
        t_cdf(1.0, df);
        FAIL("expected InvalidDf");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidDf);
      }
    }
  }

  TEST_CASE("incomplete beta") {
    CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
    CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
    // I_x(1, 1) = x, I_x(a, 1) = x^a
    CHECK(std::abs(incomplete_beta(1, 1, 0.3) - 0.3) < 1e-14);
    CHECK(std::abs(incomplete_beta(3, 1, 0.5) - 0.125) < 1e-14);
  }

  TEST_CASE("paired t on d = 1,2,3") {
    const std::vector<double> a{0, 0, 0};
    const std::vector<double> b{1, 2, 3};
    const auto r = paired_t_test(a, b);
    CHECK(r.df == 2);
    CHECK(std::abs(r.t_stat - 2.0 * std::sqrt(3.0)) < 1e-12);
    CHECK(std::abs(r.p_two_sided - 0.07417990022744858) < 1e-10);
    CHECK(r.mean_diff == 2.0);
    CHECK(std::abs(r.cohens_d - 2.0) < 1e-12);
  }

  TEST_CASE("identical samples") {
    const std::vector<double> a{3, 1, 4, 1, 5};
    const auto r = paired_t_test(a, a);
    CHECK(r.t_stat == 0.0);
    CHECK(r.p_two_sided == 1.0);
    CHECK(r.cohens_d == 0.0);
  }

  TEST_CASE("constant nonzero difference") {
    const std::vector<double> a{1, 2, 3};
    const std::vector<double> b{2, 3, 4};
    const auto r = paired_t_test(a, b);
    CHECK(std::isinf(r.t_stat));
    CHECK(r.t_stat > 0);
    CHECK(r.p_two_sided == 0.0);
  }

  TEST_CASE("paired t against oracle") {
    for (const auto& v : sbtest::fixed_paired_vectors()) {
      const auto r = paired_t_test(v.a, v.b);
      const auto o = sbtest::oracle_paired(v.a, v.b);
      CHECK(sbtest::close(r.t_stat, o.t, 1e-9));
      CHECK(std::abs(r.p_two_sided - o.p) < 1e-9);
      CHECK(sbtest::close(r.cohens_d, o.d, 1e-9));
      CHECK(sbtest::close(r.mean_diff, o.mean_diff, 1e-9));
    }
  }

  TEST_CASE("swapping samples negates t") {
    for (const auto& v : sbtest::fixed_paired_vectors()) {
      const auto ab = paired_t_test(v.a, v.b);
      const auto ba = paired_t_test(v.b, v.a);
      CHECK(sbtest::close(ab.t_stat, -ba.t_stat, 1e-12));
      CHECK(std::abs(ab.p_two_sided - ba.p_two_sided) < 1e-12);
    }
  }

  TEST_CASE("cohen's d is affine invariant") {
    for (const auto& v : sbtest::fixed_paired_vectors()) {
      std::vector<double> a2, b2;
      for (double x : v.a) a2.push_back(3.0 * x + 17.0);
      for (double x : v.b) b2.push_back(3.0 * x + 17.0);
      CHECK(sbtest::close(paired_t_test(v.a, v.b).cohens_d, paired_t_test(a2, b2).cohens_d, 1e-8));
    }
  }

  TEST_CASE("length errors") {
    const std::vector<double> a{1, 2, 3};
    const std::vector<double> b{1, 2};
    try {
      paired_t_test(a, b);
      FAIL("expected LengthMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::LengthMismatch);
    }
    const std::vector<double> one{1};
    CHECK_THROWS_AS(paired_t_test(one, one), Error);
    CHECK_THROWS_AS(success_rate_test({true}, {true, false}), Error);
  }

  TEST_CASE("mcnemar examples") {
    CHECK(success_rate_test({true, false}, {true, false}) == 1.0);
    const auto v10 = sbtest::binary_vector(1, 0, 4, 2);
    CHECK(success_rate_test(v10.a, v10.b) == 1.0);
    const auto v81 = sbtest::binary_vector(8, 1, 0, 0);
    CHECK(std::abs(success_rate_test(v81.a, v81.b) - 0.0390625) < 1e-15);
    CHECK(std::abs(binomial_two_sided_p(1, 9) - 20.0 / 512.0) < 1e-15);
  }

  TEST_CASE("mcnemar against enumeration") {
    for (const auto& v : sbtest::fixed_binary_vectors()) {
      CHECK(std::abs(success_rate_test(v.a, v.b) - sbtest::oracle_mcnemar(v.a, v.b)) < 1e-9);
    }
  }

  TEST_CASE("summaries") {
    const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    const auto s = summarize(v);
    CHECK(s.mean == 5.0);
    CHECK(std::abs(s.sd - std::sqrt(32.0 / 7.0)) < 1e-12);
    CHECK(summarize(std::vector<double>{3.0}).sd == 0.0);
    CHECK(summarize(std::vector<double>{}).n == 0);
  }

  TEST_CASE("counterbalancing") {
    const auto s = counterbalance_schedule(30, 7);
    int ab = 0;
    std::set<std::string> ids;
    for (const auto& e : s) {
      ab += e.order == ConditionOrder::HiddenFirst;
      ids.insert(e.participant_id);
    }
    CHECK(ab == 15);
    CHECK(ids.size() == 30);
    CHECK(s.front().participant_id == "P01");

    const auto two = counterbalance_schedule(2, 123);
    CHECK(two[0].order != two[1].order);

    const auto odd = counterbalance_schedule(7, 1);
    int odd_ab = 0;
    for (const auto& e : odd) odd_ab += e.order == ConditionOrder::HiddenFirst;
    CHECK(odd_ab == 4);

    const auto again = counterbalance_schedule(30, 7);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i].order == again[i].order);

    bool differs = false;
    const auto other = counterbalance_schedule(30, 8);
    for (std::size_t i = 0; i < s.size(); ++i) differs = differs || s[i].order != other[i].order;
    CHECK(differs);
    CHECK_THROWS_AS(counterbalance_schedule(1, 1), Error);
  }
}
