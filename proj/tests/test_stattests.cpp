#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "escore/error.hpp"
#include "escore/numerics.hpp"
#include "escore/rng.hpp"
#include "escore/stattests.hpp"

using namespace escore;

TEST_CASE("wilcoxon signed rank exact cases") {
  // all-positive ranks: smallest attainable two-sided p is 2 / 2^5
  const std::vector<double> all_pos{1, 2, 3, 4, 5};
  const auto r = wilcoxon_signed_rank(all_pos);
  CHECK(r.statistic == doctest::Approx(15.0));
  CHECK(r.p_value == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(r.n_effective == 5);

  // symmetric +/- pairs sit at the null center
  const std::vector<double> sym{1, -1, 2, -2};
  const auto s = wilcoxon_signed_rank(sym);
  CHECK(s.statistic == doctest::Approx(5.0));
  CHECK(s.p_value == doctest::Approx(1.0));

  // zeros are dropped
  const std::vector<double> with_zeros{0, 0, 1, 2, 3, 4, 5};
  CHECK(wilcoxon_signed_rank(with_zeros).n_effective == 5);
  CHECK(wilcoxon_signed_rank(with_zeros).p_value == doctest::Approx(0.0625));

  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{0.0, 0.0}),
                  degenerate_error);
}

TEST_CASE("wilcoxon exact matches the normal approximation near the switch") {
  // same data pushed through both paths by padding with a tiny extra value
  Rng rng(5);
  std::vector<double> d(25);
  for (auto& x : d) x = normal_quantile(rng.next_u01()) + 0.2;
  const auto exact = wilcoxon_signed_rank(d);
  std::vector<double> d26 = d;
  d26.push_back(0.21);
  const auto approx = wilcoxon_signed_rank(d26);
  CHECK(exact.p_value == doctest::Approx(approx.p_value).epsilon(0.25));
}

TEST_CASE("wilcoxon power against a shifted alternative") {
  Rng rng(99);
  int rejections = 0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> d(500);
    for (auto& x : d) x = normal_quantile(rng.next_u01()) + 0.3;
    if (wilcoxon_signed_rank(d).p_value < 0.05) ++rejections;
  }
  CHECK(static_cast<double>(rejections) / reps > 0.9);
}

TEST_CASE("paired t test") {
  CHECK_THROWS_AS(paired_ttest(std::vector<double>{0, 0, 0}), degenerate_error);
  CHECK_THROWS_AS(paired_ttest(std::vector<double>{1.0}), domain_error);

  const auto r = paired_ttest(std::vector<double>{1.0, -1.0});
  CHECK(r.statistic == doctest::Approx(0.0));
  CHECK(r.p_value == doctest::Approx(1.0));

  // n = 685 from N(0.01, 0.05^2): z about 5.2
  Rng rng(31);
  std::vector<double> d(685);
  for (auto& x : d) x = 0.01 + 0.05 * normal_quantile(rng.next_u01());
  CHECK(paired_ttest(d).p_value < 1e-4);
}

TEST_CASE("student t upper tail against a quadrature oracle") {
  for (double dof : {3.0, 10.0, 64.0}) {
    for (double t : {0.5, 1.5, 2.4}) {
      const double norm = std::exp(std::lgamma(0.5 * (dof + 1.0)) -
                                   std::lgamma(0.5 * dof)) /
                          std::sqrt(dof * M_PI);
      const double tail = integrate(
          [&](double x) {
            return norm * std::pow(1.0 + x * x / dof, -0.5 * (dof + 1.0));
          },
          t, t + 400.0, QuadratureSpec{});
      CHECK(student_t_sf(t, dof) == doctest::Approx(tail).epsilon(1e-7));
    }
  }
}

TEST_CASE("sign test") {
  std::vector<double> ten_pos(10, 1.0);
  const auto r = sign_test(ten_pos);
  CHECK(r.statistic == doctest::Approx(10.0));
  CHECK(r.p_value == doctest::Approx(2.0 / 1024.0).epsilon(1e-10));

  std::vector<double> balanced;
  for (int i = 0; i < 5; ++i) balanced.push_back(1.0);
  for (int i = 0; i < 5; ++i) balanced.push_back(-1.0);
  CHECK(sign_test(balanced).p_value == doctest::Approx(1.0));

  // 685 stations, 370 negative differences
  std::vector<double> station_diffs;
  for (int i = 0; i < 315; ++i) station_diffs.push_back(1.0);
  for (int i = 0; i < 370; ++i) station_diffs.push_back(-1.0);
  CHECK(sign_test(station_diffs).p_value == doctest::Approx(0.0357).epsilon(0.02));

  CHECK_THROWS_AS(sign_test(std::vector<double>{0.0}), degenerate_error);

  SUBCASE("rejection proportion line") {
    const double limit = sign_test_rejection_proportion(685, 0.05);
    CHECK(limit < 0.5);
    // the limit itself rejects, one-more-negative-balanced does not
    const int k = static_cast<int>(std::lround(limit * 685));
    std::vector<double> at_limit;
    for (int i = 0; i < k; ++i) at_limit.push_back(1.0);
    for (int i = 0; i < 685 - k; ++i) at_limit.push_back(-1.0);
    CHECK(sign_test(at_limit).p_value <= 0.05);
  }
}

TEST_CASE("tests are invariant under common positive rescaling") {
  Rng rng(12);
  std::vector<double> d(60), d_scaled(60);
  for (int i = 0; i < 60; ++i) {
    d[i] = normal_quantile(rng.next_u01()) + 0.1;
    d_scaled[i] = 3.7 * d[i];
  }
  CHECK(wilcoxon_signed_rank(d).p_value ==
        doctest::Approx(wilcoxon_signed_rank(d_scaled).p_value).epsilon(1e-12));
  CHECK(sign_test(d).p_value ==
        doctest::Approx(sign_test(d_scaled).p_value).epsilon(1e-12));
  CHECK(paired_ttest(d).statistic ==
        doctest::Approx(paired_ttest(d_scaled).statistic).epsilon(1e-12));
}

TEST_CASE("type-I error calibration at alpha = 0.05") {
  Rng rng(2025);
  const int reps = 5000;
  int rej_wilcoxon = 0, rej_t = 0, rej_sign = 0;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> d(40);
    for (auto& x : d) x = normal_quantile(rng.next_u01());
    if (wilcoxon_signed_rank(d).p_value < 0.05) ++rej_wilcoxon;
    if (paired_ttest(d).p_value < 0.05) ++rej_t;
    if (sign_test(d).p_value < 0.05) ++rej_sign;
  }
  for (int rej : {rej_wilcoxon, rej_t, rej_sign}) {
    const double rate = static_cast<double>(rej) / reps;
    CHECK(rate >= 0.03);
    CHECK(rate <= 0.07);
  }
}
