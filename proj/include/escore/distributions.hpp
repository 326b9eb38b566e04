#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "escore/error.hpp"
#include "escore/rng.hpp"

namespace escore {

/// Shapes closer to zero than this are evaluated on the Gumbel branch
/// everywhere (cdf, quantile, density, closed-form scores); avoids the
/// cancellation in (x^gamma - 1) / gamma.
inline constexpr double kGammaTol = 1e-8;

/// Location / scale / shape of a generalized extreme value law.
struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double gamma = 0.0;
};

inline bool gev_is_gumbel(const GevParams& p) {
  return p.gamma >= -kGammaTol && p.gamma <= kGammaTol;
}

void gev_validate(const GevParams& p);

/// Support endpoints; -inf / +inf when unbounded.
double gev_lower_endpoint(const GevParams& p);
double gev_upper_endpoint(const GevParams& p);

/// s(x) = -ln F(x), computed in log space so deep tails keep precision.
/// Returns +inf below the support and 0 above it.
double gev_neg_ln_cdf(const GevParams& p, double x);

double gev_cdf(const GevParams& p, double x);
double gev_quantile(const GevParams& p, double prob);
double gev_logpdf(const GevParams& p, double x);

/// Frequency-based reparameterisation: lambda exceedances of level u with
/// excess scale sigma_u.
struct PgevParams {
  double lambda = 1.0;
  double sigma_u = 1.0;
  double gamma = 0.0;
  double u = 0.0;
};

GevParams pgev_to_gev(const PgevParams& p);

/// The four benchmark forecasters. The true model draws a latent rate X
/// from Gamma(1/xi, 1/xi) and the observation from Exp(rate X); marginally
/// the observation is GP(1, xi).
struct BenchmarkForecast {
  enum class Kind { Ideal, Extremist, Climatological, TauInformed };
  Kind kind = Kind::Ideal;
  double delta = 1.0;  // exponential rate, the (observed) latent X
  double nu = 1.0;     // extremist inflation, > 1 fattens the forecast tail
  double xi = 0.25;    // GP shape, in (0,1)
  double tau = 0.5;    // mixture weight on the ideal component
};

void benchmark_validate(const BenchmarkForecast& f);

/// Sorted ensemble sample used for sample-based scoring.
using EnsembleSample = std::vector<double>;

/// Tagged union over the closed-form laws and empirical ensembles.
struct Forecast {
  std::variant<GevParams, PgevParams, BenchmarkForecast, EnsembleSample> law;

  static Forecast gev(const GevParams& p) { return {p}; }
  static Forecast pgev(const PgevParams& p) { return {p}; }
  static Forecast benchmark(const BenchmarkForecast& f) { return {f}; }
  static Forecast ensemble(EnsembleSample sample);
};

double forecast_cdf(const Forecast& f, double x);
double forecast_logpdf(const Forecast& f, double x);
double forecast_quantile(const Forecast& f, double prob);

/// Inverse-cdf sampling (mixtures draw a component indicator first);
/// deterministic given the seed, returned sorted ascending.
std::vector<double> forecast_sample(const Forecast& f, int n,
                                    std::uint64_t seed);

/// Exponential(rate) and unit-scale generalized Pareto helpers used by the
/// benchmark laws.
double exp_cdf(double rate, double x);
double exp_logpdf(double rate, double x);
double exp_quantile(double rate, double p);
double gp_cdf(double xi, double x);
double gp_logpdf(double xi, double x);
double gp_quantile(double xi, double p);

/// One simulated series from the hierarchical benchmark truth. `deltas`
/// carries the latent rate used for each observation (all equal when the
/// latent rate is fixed per series).
struct BenchmarkSeries {
  std::vector<double> deltas;
  std::vector<double> values;
};

enum class LatentMode { PerObservation, PerSeries };

std::vector<BenchmarkSeries> benchmark_generate(
    double xi, int n_series, int series_len, std::uint64_t seed,
    LatentMode mode = LatentMode::PerObservation);

}  // namespace escore
