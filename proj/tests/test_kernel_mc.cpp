#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "escore/distributions.hpp"
#include "escore/error.hpp"
#include "escore/kernel_mc.hpp"
#include "escore/numerics.hpp"
#include "escore/rng.hpp"
#include "escore/scoring.hpp"

using namespace escore;

namespace {

std::vector<double> gev_draws(const GevParams& p, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> xs(n);
  for (auto& x : xs) x = gev_quantile(p, rng.next_u01());
  std::sort(xs.begin(), xs.end());
  return xs;
}

// Naive O(m^2) reference used to pin the prefix-sum path.
double naive_kernel_score(const std::vector<double>& sample,
                          const WeightSpec& w, double y, bool plug_in) {
  const auto m = static_cast<double>(sample.size());
  double pair = 0.0, obs = 0.0;
  for (double a : sample) {
    for (double b : sample) pair += std::fabs(w.chain(a) - w.chain(b));
    obs += std::fabs(w.chain(a) - w.chain(y));
  }
  const double pair_norm = plug_in ? m * m : m * (m - 1.0);
  return 0.5 * pair / pair_norm - obs / m;
}

}  // namespace

TEST_CASE("mc_kernel_score hand cases and errors") {
  const std::vector<double> two{0.0, 1.0};
  CHECK(mc_kernel_score(two, WeightSpec::unweighted(), 0.5) ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK(mc_kernel_score(two, WeightSpec::quantile(2.0), 0.5) == 0.0);
  CHECK_THROWS_AS(mc_kernel_score(std::vector<double>{1.0},
                                  WeightSpec::unweighted(), 0.5),
                  domain_error);
  CHECK_THROWS_AS(mc_kernel_score(std::vector<double>{2.0, 1.0},
                                  WeightSpec::unweighted(), 0.5),
                  domain_error);
}

TEST_CASE("fast path equals the naive double sum") {
  Rng rng(7);
  for (int m : {2, 3, 17, 200, 500}) {
    std::vector<double> sample(m);
    for (auto& x : sample) x = 3.0 * rng.next_u01() - 1.0;
    std::sort(sample.begin(), sample.end());
    // inject ties
    if (m > 10) sample[5] = sample[6];
    for (const auto& w :
         {WeightSpec::unweighted(), WeightSpec::quantile(0.2),
          WeightSpec::affine_indicator(1.0, 1.0, 0.4)}) {
      for (bool plug_in : {false, true}) {
        const double y = rng.next_u01();
        CHECK(std::fabs(mc_kernel_score(sample, w, y, plug_in) -
                        naive_kernel_score(sample, w, y, plug_in)) < 1e-10);
      }
    }
  }
}

TEST_CASE("ensemble estimators agree with closed forms within 4 SE") {
  const GevParams p{0, 1, 0.12};
  const auto sample = gev_draws(p, 100000, 99);
  const double q90 = gev_quantile(p, 0.9);
  const auto w = WeightSpec::quantile(q90);
  const double y = 2.0;

  const McEstimate kernel = mc_kernel_score_se(sample, w, y);
  CHECK(std::fabs(kernel.value - wcrps_gev(p, w, y)) < 4.0 * kernel.std_err);
  CHECK(kernel.std_err > 0.0);

  const McEstimate scaled = mc_scaled_kernel_score_se(sample, w, y);
  CHECK(std::fabs(scaled.value - swcrps_gev(p, w, y)) < 4.0 * scaled.std_err);

  const McEstimate unweighted = mc_kernel_score_se(sample, WeightSpec::unweighted(), y);
  CHECK(std::fabs(unweighted.value - crps_gev(p, y)) < 4.0 * unweighted.std_err);
}

TEST_CASE("scaled estimator equals the SCRPS plug-in quantities") {
  const auto sample = gev_draws({1, 2, 0}, 5000, 3);
  const double y = 2.5;
  const double b = mc_kernel_score(sample, WeightSpec::unweighted(), y) * 0.0 +
                   [&] {
                     // recompute the fair pairwise mean directly
                     double pair = 0.0;
                     for (double a : sample)
                       for (double c : sample) pair += std::fabs(a - c);
                     const double m = static_cast<double>(sample.size());
                     return pair / (m * (m - 1.0));
                   }();
  double obs = 0.0;
  for (double a : sample) obs += std::fabs(a - y);
  obs /= static_cast<double>(sample.size());
  const double expected = -obs / b - 0.5 * std::log(b);
  CHECK(mc_scaled_kernel_score(sample, WeightSpec::unweighted(), y) ==
        doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(mc_scaled_kernel_score(std::vector<double>{1.0, 1.0, 1.0},
                                         WeightSpec::unweighted(), 1.0),
                  degenerate_error);
}

TEST_CASE("fair estimator is unbiased over resamples") {
  const GevParams p{0, 1, 0};
  const double y = 0.7;
  const double closed = crps_gev(p, y);
  const int reps = 1000, m = 50;
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto sample = gev_draws(p, m, 5000 + r);
    const double s = mc_kernel_score(sample, WeightSpec::unweighted(), y);
    sum += s;
    sum2 += s * s;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum2 - reps * mean * mean) / (reps - 1.0) / reps);
  CHECK(std::fabs(mean - closed) < 4.0 * se);
}

TEST_CASE("conditional expected score") {
  SUBCASE("unconditional log score of the Gumbel is its negative entropy") {
    ScoreFunction ls;
    ls.kind = ScoreKind::Ls;
    const GevParams g{0, 1, 0};
    const auto est = conditional_expected_score(
        ls, g, g, -std::numeric_limits<double>::infinity(), 400000, 31);
    CHECK(std::fabs(est.value - (-(1.0 + kEulerGamma))) < 4.0 * est.std_err);
  }

  SUBCASE("properness under conditioning") {
    const GevParams truth{0, 1, 0.12};
    const double u = gev_quantile(truth, 0.8);
    for (ScoreKind kind :
         {ScoreKind::Ls, ScoreKind::Crps, ScoreKind::Scrps, ScoreKind::Swcrps}) {
      ScoreFunction s = ScoreFunction::make(kind, truth, 0.8);
      const auto self = conditional_expected_score(s, truth, truth, u, 100000, 7);
      const auto other = conditional_expected_score(
          s, GevParams{0.2, 1.3, 0.12}, truth, u, 100000, 7);
      const double se = std::hypot(self.std_err, other.std_err);
      CHECK(self.value >= other.value - 3.0 * se);
    }
  }

  SUBCASE("censored likelihood at q = u equals the conditional log score") {
    const GevParams p{0, 1, 0.12};
    const double u = gev_quantile(p, 0.9);
    ScoreFunction lsq;
    lsq.kind = ScoreKind::LsQ;
    lsq.threshold = u;
    ScoreFunction ls;
    ls.kind = ScoreKind::Ls;
    const auto a = conditional_expected_score(lsq, p, p, u, 50000, 11);
    const auto b = conditional_expected_score(ls, p, p, u, 50000, 11);
    CHECK(a.value == b.value);  // common random numbers: identical draws
  }

  SUBCASE("threshold too high") {
    ScoreFunction ls;
    ls.kind = ScoreKind::Ls;
    const GevParams bounded{0, 1, -0.3};
    CHECK_THROWS_AS(conditional_expected_score(ls, bounded, bounded,
                                               gev_upper_endpoint(bounded), 1000, 1),
                    numeric_error);
  }

  SUBCASE("n floor") {
    ScoreFunction ls;
    ls.kind = ScoreKind::Ls;
    CHECK_THROWS_AS(conditional_expected_score(ls, {0, 1, 0}, {0, 1, 0}, 0.0,
                                               50, 1),
                    domain_error);
  }
}

TEST_CASE("scale function probe") {
  const std::vector<double> grid{-0.06, -0.04, -0.02, 0.02, 0.04, 0.06};

  SUBCASE("bit-reproducible given a seed, and D(0) = 0 exactly") {
    ScoreFunction ls;
    ls.kind = ScoreKind::Ls;
    const auto a = scale_function_probe(ls, {0, 1, 0.12}, {0.0, 1.0},
                                        std::nullopt, grid, 20000, 77);
    const auto b = scale_function_probe(ls, {0, 1, 0.12}, {0.0, 1.0},
                                        std::nullopt, grid, 20000, 77);
    CHECK(a.value == b.value);
    CHECK(a.std_err == b.std_err);
    // t = 0 contributes an exact zero difference
    ScoreFunction crps;
    crps.kind = ScoreKind::Crps;
    const GevParams base{0, 1, 0.12};
    const auto s0 = conditional_expected_score(
        crps, base, base, -std::numeric_limits<double>::infinity(), 10000, 5);
    const auto s0_again = conditional_expected_score(
        crps, perturbed_params(base, {0.0, 1.0}, 0.0), base,
        -std::numeric_limits<double>::infinity(), 10000, 5);
    CHECK(s0.value == s0_again.value);
  }

  SUBCASE("log score probe is scale free, CRPS probe scales with sigma") {
    ScoreFunction ls;
    ls.kind = ScoreKind::Ls;
    ScoreFunction crps;
    crps.kind = ScoreKind::Crps;
    const int n = 60000;
    std::vector<double> ls_vals, crps_vals;
    for (double sigma : {1.0, 2.0, 4.0}) {
      const GevParams base{0, sigma, 0.12};
      ls_vals.push_back(scale_function_probe(ls, base, {0.0, 1.0}, std::nullopt,
                                             grid, n, 13)
                            .value);
      crps_vals.push_back(scale_function_probe(crps, base, {0.0, 1.0},
                                               std::nullopt, grid, n, 13)
                              .value);
    }
    CHECK(ls_vals[1] == doctest::Approx(ls_vals[0]).epsilon(0.10));
    CHECK(ls_vals[2] == doctest::Approx(ls_vals[0]).epsilon(0.10));
    CHECK(crps_vals[2] / crps_vals[0] > 2.0);
    // properness: fitted linear coefficient within noise of zero
    const auto probe = scale_function_probe(ls, {0, 1, 0.12}, {0.0, 1.0},
                                            std::nullopt, grid, n, 13);
    CHECK(std::fabs(probe.linear_coef) < 4.0 * probe.linear_std_err);
  }

  SUBCASE("probe validates the grid and direction") {
    ScoreFunction ls;
    ls.kind = ScoreKind::Ls;
    const std::vector<double> bad{-0.5, 0.5};
    CHECK_THROWS_AS(scale_function_probe(ls, {0, 1, 0}, {0.0, 1.0},
                                         std::nullopt, bad, 1000, 1),
                    domain_error);
    CHECK_THROWS_AS(perturbed_params({0, 1, 0}, {0.5, 1.0}, 0.01), domain_error);
    CHECK_THROWS_AS(perturbed_params({0, 1, 0}, {0.0, 1.0}, -2.0), domain_error);
  }
}
