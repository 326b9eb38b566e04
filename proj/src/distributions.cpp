#include "escore/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "escore/numerics.hpp"

namespace escore {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void gev_validate(const GevParams& p) {
  if (!std::isfinite(p.mu) || !std::isfinite(p.gamma) || !(p.sigma > 0.0) ||
      !std::isfinite(p.sigma))
    throw domain_error("GevParams: require finite mu, gamma and sigma > 0");
}

double gev_lower_endpoint(const GevParams& p) {
  if (p.gamma >= kGammaTol) return p.mu - p.sigma / p.gamma;
  return -kInf;
}

double gev_upper_endpoint(const GevParams& p) {
  if (p.gamma <= -kGammaTol) return p.mu - p.sigma / p.gamma;
  return kInf;
}

double gev_neg_ln_cdf(const GevParams& p, double x) {
  const double z = (x - p.mu) / p.sigma;
  if (gev_is_gumbel(p)) return std::exp(-z);
  const double base = 1.0 + p.gamma * z;
  if (base <= 0.0) return p.gamma > 0.0 ? kInf : 0.0;
  return std::exp(-std::log1p(p.gamma * z) / p.gamma);
}

double gev_cdf(const GevParams& p, double x) {
  return std::exp(-gev_neg_ln_cdf(p, x));
}

double gev_quantile(const GevParams& p, double prob) {
  if (!(prob > 0.0) || !(prob < 1.0))
    throw domain_error("gev_quantile: prob must be in (0,1)");
  const double t = -std::log(prob);  // = s at the quantile
  if (gev_is_gumbel(p)) return p.mu - p.sigma * std::log(t);
  return p.mu + p.sigma * std::expm1(-p.gamma * std::log(t)) / p.gamma;
}

double gev_logpdf(const GevParams& p, double x) {
  const double z = (x - p.mu) / p.sigma;
  if (gev_is_gumbel(p)) return -std::log(p.sigma) - z - std::exp(-z);
  const double base = 1.0 + p.gamma * z;
  if (base <= 0.0) return -kInf;
  const double log_base = std::log1p(p.gamma * z);
  const double s = std::exp(-log_base / p.gamma);
  return -std::log(p.sigma) - (1.0 + 1.0 / p.gamma) * log_base - s;
}

GevParams pgev_to_gev(const PgevParams& p) {
  if (!(p.lambda > 0.0) || !(p.sigma_u > 0.0))
    throw domain_error("PgevParams: require lambda > 0 and sigma_u > 0");
  const double log_lambda = std::log(p.lambda);
  GevParams out;
  out.gamma = p.gamma;
  if (p.gamma >= -kGammaTol && p.gamma <= kGammaTol) {
    out.mu = p.u + p.sigma_u * log_lambda;
    out.sigma = p.sigma_u;
  } else {
    out.mu = p.u + p.sigma_u * std::expm1(p.gamma * log_lambda) / p.gamma;
    out.sigma = p.sigma_u * std::exp(p.gamma * log_lambda);
  }
  return out;
}

void benchmark_validate(const BenchmarkForecast& f) {
  if (!(f.delta > 0.0)) throw domain_error("BenchmarkForecast: delta must be > 0");
  if (f.kind == BenchmarkForecast::Kind::Extremist && !(f.nu >= 1.0))
    throw domain_error("BenchmarkForecast: nu must be >= 1");
  if ((f.kind == BenchmarkForecast::Kind::Climatological ||
       f.kind == BenchmarkForecast::Kind::TauInformed) &&
      !(f.xi > 0.0 && f.xi < 1.0))
    throw domain_error("BenchmarkForecast: xi must be in (0,1)");
  if (f.kind == BenchmarkForecast::Kind::TauInformed &&
      !(f.tau >= 0.0 && f.tau <= 1.0))
    throw domain_error("BenchmarkForecast: tau must be in [0,1]");
}

double exp_cdf(double rate, double x) {
  if (x <= 0.0) return 0.0;
  return -std::expm1(-rate * x);
}

double exp_logpdf(double rate, double x) {
  if (x < 0.0) return -kInf;
  return std::log(rate) - rate * x;
}

double exp_quantile(double rate, double p) {
  return -std::log1p(-p) / rate;
}

double gp_cdf(double xi, double x) {
  if (x <= 0.0) return 0.0;
  return -std::expm1(-std::log1p(xi * x) / xi);
}

double gp_logpdf(double xi, double x) {
  if (x < 0.0) return -kInf;
  return -(1.0 / xi + 1.0) * std::log1p(xi * x);
}

double gp_quantile(double xi, double p) {
  return std::expm1(-xi * std::log1p(-p)) / xi;
}

namespace {

double benchmark_cdf(const BenchmarkForecast& f, double x) {
  using Kind = BenchmarkForecast::Kind;
  switch (f.kind) {
    case Kind::Ideal: return exp_cdf(f.delta, x);
    case Kind::Extremist: return exp_cdf(f.delta / f.nu, x);
    case Kind::Climatological: return gp_cdf(f.xi, x);
    case Kind::TauInformed:
      // The mixture cdf/pdf is always the tau-weighted sum, never simulated.
      return f.tau * exp_cdf(f.delta, x) + (1.0 - f.tau) * gp_cdf(f.xi, x);
  }
  return 0.0;
}

double benchmark_logpdf(const BenchmarkForecast& f, double x) {
  using Kind = BenchmarkForecast::Kind;
  switch (f.kind) {
    case Kind::Ideal: return exp_logpdf(f.delta, x);
    case Kind::Extremist: return exp_logpdf(f.delta / f.nu, x);
    case Kind::Climatological: return gp_logpdf(f.xi, x);
    case Kind::TauInformed: {
      if (x < 0.0) return -kInf;
      if (f.tau == 0.0) return gp_logpdf(f.xi, x);
      if (f.tau == 1.0) return exp_logpdf(f.delta, x);
      const double le = std::log(f.tau) + exp_logpdf(f.delta, x);
      const double lg = std::log1p(-f.tau) + gp_logpdf(f.xi, x);
      const double m = std::max(le, lg);
      return m + std::log(std::exp(le - m) + std::exp(lg - m));
    }
  }
  return -kInf;
}

double benchmark_quantile(const BenchmarkForecast& f, double p) {
  using Kind = BenchmarkForecast::Kind;
  switch (f.kind) {
    case Kind::Ideal: return exp_quantile(f.delta, p);
    case Kind::Extremist: return exp_quantile(f.delta / f.nu, p);
    case Kind::Climatological: return gp_quantile(f.xi, p);
    case Kind::TauInformed: {
      if (f.tau == 0.0) return gp_quantile(f.xi, p);
      if (f.tau == 1.0) return exp_quantile(f.delta, p);
      // Bisection on the mixture cdf; monotone, so this always converges.
      double lo = 0.0;
      double hi = std::max(exp_quantile(f.delta, p), gp_quantile(f.xi, p));
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (benchmark_cdf(f, mid) < p) lo = mid;
        else hi = mid;
        if (hi - lo <= 1e-14 * (1.0 + hi)) break;
      }
      return 0.5 * (lo + hi);
    }
  }
  return 0.0;
}

double ensemble_cdf(const EnsembleSample& s, double x) {
  const auto it = std::upper_bound(s.begin(), s.end(), x);
  return static_cast<double>(it - s.begin()) / static_cast<double>(s.size());
}

double ensemble_quantile(const EnsembleSample& s, double p) {
  const auto n = static_cast<std::size_t>(s.size());
  auto idx = static_cast<std::size_t>(p * static_cast<double>(n));
  if (idx >= n) idx = n - 1;
  return s[idx];
}

}  // namespace

Forecast Forecast::ensemble(EnsembleSample sample) {
  if (sample.empty()) throw domain_error("Forecast: ensemble must be nonempty");
  std::sort(sample.begin(), sample.end());
  return {std::move(sample)};
}

double forecast_cdf(const Forecast& f, double x) {
  return std::visit(
      [&](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, GevParams>) return gev_cdf(law, x);
        else if constexpr (std::is_same_v<T, PgevParams>)
          return gev_cdf(pgev_to_gev(law), x);
        else if constexpr (std::is_same_v<T, BenchmarkForecast>)
          return benchmark_cdf(law, x);
        else return ensemble_cdf(law, x);
      },
      f.law);
}

double forecast_logpdf(const Forecast& f, double x) {
  return std::visit(
      [&](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, GevParams>) return gev_logpdf(law, x);
        else if constexpr (std::is_same_v<T, PgevParams>)
          return gev_logpdf(pgev_to_gev(law), x);
        else if constexpr (std::is_same_v<T, BenchmarkForecast>)
          return benchmark_logpdf(law, x);
        else {
          throw domain_error("forecast_logpdf: ensemble forecasts have no density");
          return -kInf;
        }
      },
      f.law);
}

double forecast_quantile(const Forecast& f, double prob) {
  if (!(prob > 0.0) || !(prob < 1.0))
    throw domain_error("forecast_quantile: prob must be in (0,1)");
  return std::visit(
      [&](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, GevParams>)
          return gev_quantile(law, prob);
        else if constexpr (std::is_same_v<T, PgevParams>)
          return gev_quantile(pgev_to_gev(law), prob);
        else if constexpr (std::is_same_v<T, BenchmarkForecast>)
          return benchmark_quantile(law, prob);
        else return ensemble_quantile(law, prob);
      },
      f.law);
}

std::vector<double> forecast_sample(const Forecast& f, int n,
                                    std::uint64_t seed) {
  if (n < 1) throw domain_error("forecast_sample: n must be >= 1");
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  const auto* bench = std::get_if<BenchmarkForecast>(&f.law);
  const bool mixture =
      bench != nullptr && bench->kind == BenchmarkForecast::Kind::TauInformed &&
      bench->tau > 0.0 && bench->tau < 1.0;
  for (int i = 0; i < n; ++i) {
    if (mixture) {
      // Component indicator first, then inverse cdf within the component.
      const double pick = rng.next_u01();
      const double u = rng.next_u01();
      out.push_back(pick < bench->tau ? exp_quantile(bench->delta, u)
                                      : gp_quantile(bench->xi, u));
    } else {
      out.push_back(forecast_quantile(f, rng.next_u01()));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<BenchmarkSeries> benchmark_generate(double xi, int n_series,
                                                int series_len,
                                                std::uint64_t seed,
                                                LatentMode mode) {
  if (!(xi > 0.0 && xi < 1.0))
    throw domain_error("benchmark_generate: xi must be in (0,1)");
  if (n_series < 1 || series_len < 1)
    throw domain_error("benchmark_generate: sizes must be positive");
  const double shape = 1.0 / xi;
  std::vector<BenchmarkSeries> out(static_cast<std::size_t>(n_series));
  for (int i = 0; i < n_series; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    auto& series = out[static_cast<std::size_t>(i)];
    series.deltas.reserve(static_cast<std::size_t>(series_len));
    series.values.reserve(static_cast<std::size_t>(series_len));
    double fixed_delta = 0.0;
    if (mode == LatentMode::PerSeries)
      fixed_delta = gamma_quantile(shape, shape, rng.next_u01());
    for (int j = 0; j < series_len; ++j) {
      const double delta = mode == LatentMode::PerSeries
                               ? fixed_delta
                               : gamma_quantile(shape, shape, rng.next_u01());
      series.deltas.push_back(delta);
      series.values.push_back(exp_quantile(delta, rng.next_u01()));
    }
  }
  return out;
}

}  // namespace escore
