#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "escore/distributions.hpp"
#include "escore/error.hpp"
#include "escore/numerics.hpp"
#include "escore/rng.hpp"

using namespace escore;

namespace {

double ks_distance(const std::vector<double>& sorted_sample,
                   const std::function<double(double)>& cdf) {
  const auto n = static_cast<double>(sorted_sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted_sample.size(); ++i) {
    const double f = cdf(sorted_sample[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

}  // namespace

TEST_CASE("gev cdf fixed points and support boundaries") {
  CHECK(gev_cdf({0, 1, 0}, 0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(gev_cdf({0, 1, 0.12}, 0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(gev_cdf({0, 1, 0.5}, -2.0) == 0.0);   // lower endpoint
  CHECK(gev_cdf({0, 1, 0.5}, -5.0) == 0.0);   // beyond it
  CHECK(gev_cdf({0, 1, -0.5}, 2.0) == 1.0);   // upper endpoint
  CHECK(gev_cdf({0, 1, -0.5}, 9.0) == 1.0);

  SUBCASE("monotone in x") {
    const GevParams p{1.0, 2.0, 0.3};
    double prev = -0.1;
    for (double x = -6.0; x < 40.0; x += 0.5) {
      const double f = gev_cdf(p, x);
      CHECK(f >= prev);
      prev = f;
    }
  }
}

TEST_CASE("gev quantile inverts the cdf on all branches") {
  CHECK(gev_quantile({0, 1, 0.12}, std::exp(-1.0)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(gev_quantile({5, 2, 0.0}, std::exp(-1.0)) == doctest::Approx(5.0).epsilon(1e-12));
  // frozen from bisection inversion of gev_cdf: F(2.5835183) = 0.9
  CHECK(gev_quantile({0, 1, 0.12}, 0.9) == doctest::Approx(2.5835183).epsilon(1e-6));
  CHECK(gev_cdf({0, 1, 0.12}, gev_quantile({0, 1, 0.12}, 0.9)) ==
        doctest::Approx(0.9).epsilon(1e-12));

  for (double gamma : {-0.4, -0.12, 0.0, 1e-9, 0.12, 0.4}) {
    const GevParams p{1.3, 0.7, gamma};
    for (int k = 1; k <= 99; k += 7) {
      const double prob = k / 100.0;
      CHECK(gev_cdf(p, gev_quantile(p, prob)) ==
            doctest::Approx(prob).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(gev_quantile({0, 1, 0.1}, 0.0), domain_error);
  CHECK_THROWS_AS(gev_quantile({0, 1, 0.1}, 1.0), domain_error);
}

TEST_CASE("gev log density") {
  CHECK(gev_logpdf({0, 1, 0}, 0.0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(gev_logpdf({0, 1, -0.3}, 10.0) == -std::numeric_limits<double>::infinity());

  SUBCASE("matches central differences of the cdf") {
    const GevParams p{0.0, 2.0, 0.12};
    for (double x : {-1.0, 0.0, 1.0, 3.0, 8.0}) {
      const double h = 1e-6;
      const double fd = (gev_cdf(p, x + h) - gev_cdf(p, x - h)) / (2.0 * h);
      CHECK(std::exp(gev_logpdf(p, x)) == doctest::Approx(fd).epsilon(1e-7));
    }
  }

  SUBCASE("integrates to one over the support") {
    const GevParams p{0.5, 1.5, -0.25};
    double total = 0.0;
    const double lo = gev_lower_endpoint(p);
    const double hi = gev_upper_endpoint(p);
    const int n = 200000;
    const double a = std::isfinite(lo) ? lo : -40.0;
    const double h = (hi - a) / n;
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      total += w * std::exp(gev_logpdf(p, a + i * h));
    }
    CHECK(total * h == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("gumbel branch is continuous at the shape tolerance seam") {
  const GevParams gumbel{0.3, 1.7, 0.0};
  // straddle the branch switch: at |gamma| = tol the Gumbel branch is used,
  // just above it the general branch must still agree
  for (double gamma : {kGammaTol, -kGammaTol, 2.0 * kGammaTol, -2.0 * kGammaTol}) {
    const GevParams p{0.3, 1.7, gamma};
    for (double x = -5.0; x <= 12.0; x += 0.25) {
      CHECK(std::fabs(gev_cdf(p, x) - gev_cdf(gumbel, x)) <= 1e-6);
    }
  }
}

TEST_CASE("pgev mapping") {
  SUBCASE("lambda = 1 is the identity") {
    const GevParams g = pgev_to_gev({1.0, 2.0, 0.3, 5.0});
    CHECK(g.mu == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(g.sigma == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(g.gamma == doctest::Approx(0.3).epsilon(1e-14));
  }
  SUBCASE("gamma -> 0 limit") {
    const GevParams g = pgev_to_gev({2.0, 1.0, 0.0, 0.0});
    CHECK(g.mu == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(g.sigma == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("cdf identity F_GEV(map(p), x) = exp(-lambda (1 + gamma (x-u)/sigma_u)^(-1/gamma))") {
    const PgevParams p{2.0, 1.0, 0.12, 0.0};
    const GevParams g = pgev_to_gev(p);
    for (int i = 0; i < 20; ++i) {
      const double x = -1.5 + 0.6 * i;
      const double base = 1.0 + p.gamma * (x - p.u) / p.sigma_u;
      const double direct =
          base > 0.0 ? std::exp(-p.lambda * std::pow(base, -1.0 / p.gamma))
                     : 0.0;
      CHECK(gev_cdf(g, x) == doctest::Approx(direct).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(pgev_to_gev({-1.0, 1.0, 0.1, 0.0}), domain_error);
}

TEST_CASE("forecast sampling is deterministic, sorted and inverse-cdf") {
  SUBCASE("single gumbel draw is the inverse cdf of the first uniform") {
    Rng rng(977);
    const double u = rng.next_u01();
    const auto sample = forecast_sample(Forecast::gev({0, 1, 0}), 1, 977);
    CHECK(sample[0] == doctest::Approx(-std::log(-std::log(u))).epsilon(1e-14));
  }
  SUBCASE("tau = 1 mixture is indistinguishable from Exp(1)") {
    BenchmarkForecast f;
    f.kind = BenchmarkForecast::Kind::TauInformed;
    f.tau = 1.0;
    f.delta = 1.0;
    f.xi = 0.3;
    const auto sample = forecast_sample(Forecast::benchmark(f), 10000, 11);
    CHECK(ks_distance(sample, [](double x) { return exp_cdf(1.0, x); }) < 0.03);
  }
  SUBCASE("bounded support is respected") {
    const auto sample = forecast_sample(Forecast::gev({0, 1, -0.3}), 10000, 5);
    CHECK(sample.back() <= 1.0 / 0.3 + 1e-12);
    CHECK(std::is_sorted(sample.begin(), sample.end()));
  }
  SUBCASE("repeat call with the same seed is identical") {
    const auto a = forecast_sample(Forecast::gev({1, 2, 0.2}), 512, 42);
    const auto b = forecast_sample(Forecast::gev({1, 2, 0.2}), 512, 42);
    CHECK(a == b);
  }
  SUBCASE("sampling consistency: empirical means within 4 SE of analytic") {
    struct Case {
      Forecast f;
      double mean, sd_guess;
    };
    const double xi = 0.25;
    std::vector<Case> cases;
    cases.push_back({Forecast::gev({0, 1, 0}), kEulerGamma, 1.4});
    cases.push_back({Forecast::gev({1, 2, 0.2}),
                     1.0 + 2.0 * (std::tgamma(0.8) - 1.0) / 0.2, 3.5});
    cases.push_back({Forecast::benchmark({BenchmarkForecast::Kind::Climatological,
                                          1.0, 1.0, xi, 0.0}),
                     1.0 / (1.0 - xi), 2.2});
    int idx = 0;
    for (const auto& c : cases) {
      const int n = 100000;
      const auto sample = forecast_sample(c.f, n, 1000 + idx++);
      double m = 0.0, s2 = 0.0;
      for (double v : sample) m += v;
      m /= n;
      for (double v : sample) s2 += (v - m) * (v - m);
      const double se = std::sqrt(s2 / (n - 1.0) / n);
      CHECK(std::fabs(m - c.mean) < 4.0 * se);
    }
  }
}

TEST_CASE("benchmark generator marginals and determinism") {
  SUBCASE("pooled sample is GP(1, xi)") {
    const auto series = benchmark_generate(0.5, 1, 100000, 2024);
    auto values = series[0].values;
    std::sort(values.begin(), values.end());
    CHECK(ks_distance(values, [](double y) { return gp_cdf(0.5, y); }) < 0.01);
  }
  SUBCASE("xi near zero degenerates to Exp(1)") {
    const auto series = benchmark_generate(0.02, 1, 10000, 7);
    auto values = series[0].values;
    std::sort(values.begin(), values.end());
    CHECK(ks_distance(values, [](double y) { return exp_cdf(1.0, y); }) < 0.03);
  }
  SUBCASE("deterministic on repeat") {
    const auto a = benchmark_generate(0.3, 2, 100, 99);
    const auto b = benchmark_generate(0.3, 2, 100, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].values == b[i].values);
      CHECK(a[i].deltas == b[i].deltas);
    }
  }
  SUBCASE("per-series latent mode holds delta fixed within a series") {
    const auto series =
        benchmark_generate(0.4, 3, 50, 4, LatentMode::PerSeries);
    for (const auto& s : series) {
      for (double d : s.deltas) CHECK(d == s.deltas.front());
    }
  }
  CHECK_THROWS_AS(benchmark_generate(1.2, 1, 10, 0), domain_error);
}

TEST_CASE("ensemble forecasts") {
  const auto f = Forecast::ensemble({3.0, 1.0, 2.0});
  CHECK(forecast_cdf(f, 1.5) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(forecast_logpdf(f, 1.0), domain_error);
  CHECK_THROWS_AS(Forecast::ensemble({}), domain_error);
}
