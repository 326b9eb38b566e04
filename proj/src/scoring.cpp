#include "escore/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "escore/numerics.hpp"

namespace escore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_crps_exists(const GevParams& p) {
  gev_validate(p);
  if (p.gamma >= 1.0)
    throw nonexistence_error("CRPS does not exist for gamma >= 1");
}

// Ei(-s) for s in [0, inf]. `log_s` lets deep Gumbel tails keep precision
// after exp(-z) has underflowed; Ei(-s) ~ C + ln s as s -> 0.
double ei_neg(double s, double log_s) {
  if (std::isinf(s)) return 0.0;
  if (s < 1e-280) return kEulerGamma + log_s;
  return expint_ei(-s);
}

// E[X 1{X > a}] for the GEV law, expressed through s_a = -ln F(a).
double gev_upper_partial_mean(const GevParams& p, double a, double s_a) {
  const double f_a = std::exp(-s_a);
  if (gev_is_gumbel(p)) {
    const double z_a = (a - p.mu) / p.sigma;
    const double ei = ei_neg(s_a, -z_a);
    const double boundary = f_a > 0.0 ? (a - p.mu) * f_a : 0.0;
    return p.mu * (1.0 - f_a) + p.sigma * (kEulerGamma - ei) - boundary;
  }
  const double sg = p.sigma / p.gamma;
  return (p.mu - sg) * (1.0 - f_a) + sg * lower_inc_gamma(1.0 - p.gamma, s_a);
}

double gev_mean(const GevParams& p) {
  if (gev_is_gumbel(p)) return p.mu + p.sigma * kEulerGamma;
  const double sg = p.sigma / p.gamma;
  return p.mu - sg + sg * std::tgamma(1.0 - p.gamma);
}

// E|X - X'| (unweighted kernel expectation).
double gev_mean_abs_diff(const GevParams& p) {
  if (gev_is_gumbel(p)) return 2.0 * p.sigma * std::log(2.0);
  const double sg = p.sigma / p.gamma;
  return 2.0 * sg * std::tgamma(1.0 - p.gamma) * std::expm1(p.gamma * std::log(2.0));
}

// wCRPS with a plain quantile chain; q may sit anywhere (below the support
// it reduces to the CRPS, above it the weight vanishes and the score is 0).
double wcrps_quantile(const GevParams& p, double q, double y) {
  const double m = std::max(q, y);
  if (gev_is_gumbel(p)) {
    const double z_q = (q - p.mu) / p.sigma;
    const double z_m = (m - p.mu) / p.sigma;
    const double s_q = std::exp(-z_q);
    const double s_m = std::exp(-z_m);
    const double ei_2q = ei_neg(2.0 * s_q, std::log(2.0) - z_q);
    const double ei_m = ei_neg(s_m, -z_m);
    return (m - p.mu) - p.sigma * (kEulerGamma - std::log(2.0)) -
           p.sigma * (ei_2q - 2.0 * ei_m);
  }
  const double sg = p.sigma / p.gamma;
  const double s_q = gev_neg_ln_cdf(p, q);
  const double s_m = gev_neg_ln_cdf(p, m);
  const double f_q = std::exp(-s_q);
  const double f_m = std::exp(-s_m);
  const double a = 1.0 - p.gamma;
  double total = -(m - p.mu + sg) * (2.0 * f_m - 1.0);
  if (f_q > 0.0) total += (q - p.mu + sg) * f_q * f_q;
  total += sg * (std::exp2(p.gamma) * lower_inc_gamma(a, 2.0 * s_q) -
                 2.0 * lower_inc_gamma(a, s_m));
  return total;
}

// E|W(X) - W(X')| with a quantile chain; 0 when the weight vanishes on the
// whole support.
double ew_dist_quantile(const GevParams& p, double q) {
  if (gev_is_gumbel(p)) {
    const double z_q = (q - p.mu) / p.sigma;
    const double s_q = std::exp(-z_q);
    const double ei_2q = ei_neg(2.0 * s_q, std::log(2.0) - z_q);
    const double ei_q = ei_neg(s_q, -z_q);
    return 2.0 * p.sigma * std::log(2.0) - 2.0 * p.sigma * (ei_2q - ei_q);
  }
  const double sg = p.sigma / p.gamma;
  const double s_q = gev_neg_ln_cdf(p, q);
  const double f_q = std::exp(-s_q);
  const double a = 1.0 - p.gamma;
  double total = 2.0 * sg * (std::exp2(p.gamma) * lower_inc_gamma(a, 2.0 * s_q) -
                             lower_inc_gamma(a, s_q));
  if (f_q > 0.0 && f_q < 1.0) total -= 2.0 * (q - p.mu + sg) * f_q * (1.0 - f_q);
  return total;
}

// E|W(X) - W(y)| with a quantile chain.
double ew_obs_quantile(const GevParams& p, double q, double y) {
  const double s_q = gev_neg_ln_cdf(p, q);
  const double f_q = std::exp(-s_q);
  const double partial_q = gev_upper_partial_mean(p, q, s_q);
  if (y < q) {
    // W(y) = 0: just E[W(X)] = E[X 1{X>q}] - q P(X > q).
    return partial_q - q * (1.0 - f_q);
  }
  const double s_y = gev_neg_ln_cdf(p, y);
  const double f_y = std::exp(-s_y);
  const double partial_y = gev_upper_partial_mean(p, y, s_y);
  double total = 2.0 * partial_y - partial_q + y * (2.0 * f_y - 1.0);
  if (f_q > 0.0) total -= q * f_q;
  return total;
}

// E|X - y| (unweighted observation kernel term).
double ew_obs_unweighted(const GevParams& p, double y) {
  const double s_y = gev_neg_ln_cdf(p, y);
  const double f_y = std::exp(-s_y);
  return y * (2.0 * f_y - 1.0) - gev_mean(p) + 2.0 * gev_upper_partial_mean(p, y, s_y);
}

}  // namespace

ScoreValue crps_gev(const GevParams& p, double y) {
  require_crps_exists(p);
  if (gev_is_gumbel(p)) {
    const double z = (y - p.mu) / p.sigma;
    const double s = std::exp(-z);
    const double ei = ei_neg(s, -z);
    return (y - p.mu) + 2.0 * p.sigma * ei -
           p.sigma * (kEulerGamma - std::log(2.0));
  }
  const double sg = p.sigma / p.gamma;
  const double s = gev_neg_ln_cdf(p, y);
  const double f = std::exp(-s);
  const double a = 1.0 - p.gamma;
  return -(y - p.mu + sg) * (2.0 * f - 1.0) +
         sg * (std::exp2(p.gamma) * std::tgamma(a) -
               2.0 * lower_inc_gamma(a, s));
}

ScoreValue wcrps_gev(const GevParams& p, const WeightSpec& weight, double y) {
  require_crps_exists(p);
  switch (weight.kind) {
    case WeightSpec::Kind::Unweighted:
      return crps_gev(p, y);
    case WeightSpec::Kind::Quantile:
      return wcrps_quantile(p, weight.q, y);
    case WeightSpec::Kind::AffineIndicator:
      return weight.a * crps_gev(p, y) +
             weight.b * wcrps_quantile(p, weight.u, y);
  }
  return 0.0;
}

double ew_dist_gev(const GevParams& p, const WeightSpec& weight) {
  require_crps_exists(p);
  double e = 0.0;
  switch (weight.kind) {
    case WeightSpec::Kind::Unweighted:
      e = gev_mean_abs_diff(p);
      break;
    case WeightSpec::Kind::Quantile:
      e = ew_dist_quantile(p, weight.q);
      break;
    case WeightSpec::Kind::AffineIndicator:
      e = weight.a * gev_mean_abs_diff(p) +
          weight.b * ew_dist_quantile(p, weight.u);
      break;
  }
  if (!(e > 0.0))
    throw degenerate_error(
        "ew_dist_gev: weight vanishes on the support, kernel expectation is 0");
  return e;
}

double ew_obs_dist_gev(const GevParams& p, const WeightSpec& weight, double y) {
  require_crps_exists(p);
  switch (weight.kind) {
    case WeightSpec::Kind::Unweighted:
      return ew_obs_unweighted(p, y);
    case WeightSpec::Kind::Quantile:
      return ew_obs_quantile(p, weight.q, y);
    case WeightSpec::Kind::AffineIndicator:
      return weight.a * ew_obs_unweighted(p, y) +
             weight.b * ew_obs_quantile(p, weight.u, y);
  }
  return 0.0;
}

ScoreValue swcrps_gev(const GevParams& p, const WeightSpec& weight, double y) {
  const double e = ew_dist_gev(p, weight);
  return wcrps_gev(p, weight, y) / e - 0.5 * std::log(e) - 0.5;
}

ScoreValue scrps_gev(const GevParams& p, double y) {
  return swcrps_gev(p, WeightSpec::unweighted(), y);
}

ScoreValue log_score(const Forecast& f, double y) {
  return forecast_logpdf(f, y);
}

ScoreValue censored_ls(const Forecast& f, double q, double y) {
  if (y > q) return forecast_logpdf(f, y);
  const double f_q = forecast_cdf(f, q);
  return f_q > 0.0 ? std::log(f_q) : -kInf;
}

ScoreValue crps_extremist(double delta, double nu, double y) {
  if (!(delta > 0.0)) throw domain_error("crps_extremist: delta must be > 0");
  if (!(nu >= 1.0)) throw domain_error("crps_extremist: nu must be >= 1");
  if (!(y >= 0.0)) throw domain_error("crps_extremist: y must be >= 0");
  return -y - (2.0 * nu / delta) * std::exp(-delta * y / nu) +
         1.5 * nu / delta;
}

// exp(delta/xi) xi^{-1/xi} delta^{(1-xi)/xi} Gamma_u((xi-1)/xi, delta/xi);
// this is E[min(Exp(delta), GP(1,xi))], shared by the tau-informed CRPS and
// its pairwise expectation. The exponential prefactor and the decaying
// incomplete gamma stay representable up to delta/xi ~ 700; past that, use
// the asymptotic expansion of the scaled tail.
double benchmark_cross_term(double delta, double xi) {
  const double a = (xi - 1.0) / xi;
  const double t = delta / xi;
  const double log_pref = -std::log(xi) / xi + (1.0 - xi) / xi * std::log(delta);
  if (t < 600.0) {
    return std::exp(t + log_pref) * upper_inc_gamma(a, t);
  }
  // e^t Gamma_u(a,t) ~ t^{a-1} (1 + (a-1)/t + (a-1)(a-2)/t^2 + ...)
  double series = 1.0;
  double term = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= (a - k) / t;
    series += term;
  }
  return std::exp(log_pref + (a - 1.0) * std::log(t)) * series;
}

namespace {

void validate_tau_informed(double delta, double xi, double tau) {
  if (!(delta > 0.0)) throw domain_error("tau-informed: delta must be > 0");
  if (!(xi > 0.0 && xi < 1.0)) throw domain_error("tau-informed: xi must be in (0,1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw domain_error("tau-informed: tau must be in [0,1]");
}

}  // namespace

ScoreValue crps_tau_informed(double delta, double xi, double tau, double y,
                             double cross_term) {
  validate_tau_informed(delta, xi, tau);
  if (!(y >= 0.0)) throw domain_error("crps_tau_informed: y must be >= 0");
  double total = -y;
  if (tau > 0.0) {
    total += -tau * tau / (2.0 * delta) -
             (2.0 * tau / delta) * std::expm1(-delta * y);
  }
  if (tau < 1.0) {
    const double one_m = 1.0 - tau;
    const double pow_term = std::exp((xi - 1.0) / xi * std::log1p(xi * y));
    total += 2.0 * one_m / (1.0 - xi) * (1.0 - pow_term) -
             one_m * one_m / (2.0 - xi);
    if (tau > 0.0) total -= 2.0 * tau * one_m * cross_term;
  }
  return total;
}

ScoreValue crps_tau_informed(double delta, double xi, double tau, double y) {
  validate_tau_informed(delta, xi, tau);
  const double cross =
      tau > 0.0 && tau < 1.0 ? benchmark_cross_term(delta, xi) : 0.0;
  return crps_tau_informed(delta, xi, tau, y, cross);
}

double tau_informed_expected_dist(double delta, double xi, double tau,
                                  double cross_term) {
  validate_tau_informed(delta, xi, tau);
  const double one_m = 1.0 - tau;
  double e = tau / delta - tau * tau / (2.0 * delta) + one_m / (1.0 - xi) -
             one_m * one_m / (2.0 - xi);
  if (tau > 0.0 && tau < 1.0) e -= 2.0 * tau * one_m * cross_term;
  return 2.0 * e;
}

double benchmark_expected_dist(const BenchmarkForecast& f) {
  benchmark_validate(f);
  using Kind = BenchmarkForecast::Kind;
  switch (f.kind) {
    case Kind::Ideal: return 1.0 / f.delta;
    case Kind::Extremist: return f.nu / f.delta;
    case Kind::Climatological:
      return 2.0 / ((2.0 - f.xi) * (1.0 - f.xi));
    case Kind::TauInformed: {
      const double cross = f.tau > 0.0 && f.tau < 1.0
                               ? benchmark_cross_term(f.delta, f.xi)
                               : 0.0;
      return tau_informed_expected_dist(f.delta, f.xi, f.tau, cross);
    }
  }
  return 0.0;
}

ScoreValue crps_benchmark(const BenchmarkForecast& f, double y) {
  benchmark_validate(f);
  using Kind = BenchmarkForecast::Kind;
  switch (f.kind) {
    case Kind::Ideal: return crps_extremist(f.delta, 1.0, y);
    case Kind::Extremist: return crps_extremist(f.delta, f.nu, y);
    case Kind::Climatological: return crps_tau_informed(f.delta, f.xi, 0.0, y);
    case Kind::TauInformed: return crps_tau_informed(f.delta, f.xi, f.tau, y);
  }
  return 0.0;
}

ScoreValue scrps_benchmark(const BenchmarkForecast& f, double y) {
  const double e = benchmark_expected_dist(f);
  return crps_benchmark(f, y) / e - 0.5 * std::log(e) - 0.5;
}

ScoreFunction ScoreFunction::make(ScoreKind kind, const GevParams& p,
                                  double threshold_prob) {
  ScoreFunction s;
  s.kind = kind;
  if (kind == ScoreKind::Wcrps || kind == ScoreKind::Swcrps) {
    s.weight = resolve_quantile_weight(p, threshold_prob);
    s.threshold = resolve_threshold(p, threshold_prob);
  } else if (kind == ScoreKind::LsQ) {
    s.threshold = resolve_threshold(p, threshold_prob);
  }
  return s;
}

ScoreValue score_gev(const ScoreFunction& score, const GevParams& p, double y) {
  switch (score.kind) {
    case ScoreKind::Ls: return gev_logpdf(p, y);
    case ScoreKind::LsQ: return censored_ls(Forecast::gev(p), score.threshold, y);
    case ScoreKind::Crps: return crps_gev(p, y);
    case ScoreKind::Scrps: return scrps_gev(p, y);
    case ScoreKind::Wcrps: return wcrps_gev(p, score.weight, y);
    case ScoreKind::Swcrps: return swcrps_gev(p, score.weight, y);
  }
  return 0.0;
}

double resolve_threshold(const GevParams& p, double threshold_prob) {
  if (std::isinf(threshold_prob) && threshold_prob < 0.0) {
    return gev_lower_endpoint(p);
  }
  if (!(threshold_prob > 0.0) || !(threshold_prob < 1.0))
    throw domain_error("resolve_threshold: probability must be in (0,1) or -inf");
  return gev_quantile(p, threshold_prob);
}

WeightSpec resolve_quantile_weight(const GevParams& p, double threshold_prob) {
  if (std::isinf(threshold_prob) && threshold_prob < 0.0) {
    // Bounded-below supports get the finite endpoint (F = 0 there), which
    // keeps W finite and reproduces the unweighted scores exactly.
    const double lo = gev_lower_endpoint(p);
    return std::isfinite(lo) ? WeightSpec::quantile(lo)
                             : WeightSpec::unweighted();
  }
  return WeightSpec::quantile(resolve_threshold(p, threshold_prob));
}

}  // namespace escore
