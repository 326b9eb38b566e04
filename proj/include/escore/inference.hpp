#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "escore/io.hpp"

namespace escore {

/// The four case-study model families. Trend families read the per-year
/// covariate carried by the series.
enum class ModelFamily { Gumbel, Gev, GevMuTrend, PgevLambdaTrend };

struct ModelSpec {
  ModelFamily family = ModelFamily::Gev;

  bool covariate_required() const {
    return family == ModelFamily::GevMuTrend ||
           family == ModelFamily::PgevLambdaTrend;
  }
  /// Natural-scale parameter names for a single station.
  std::vector<std::string> param_names() const;
};

struct FitResult {
  std::vector<std::string> param_names;
  std::vector<double> params;                       // natural scale
  std::optional<std::vector<double>> std_errs;      // absent if Hessian singular
  double neg_loglik = 0.0;
  bool converged = false;
  int n_restarts_used = 0;
};

struct OptimizerConfig {
  int max_iter = 4000;
  double f_tol = 1e-12;
  int n_restarts = 5;       // jittered restarts beyond the moment start
  double jitter = 0.10;     // relative jitter of the restart points
  int min_obs = 20;         // per-series observation floor
  double gamma_lo = -0.9;   // profile search window for the shared shape
  double gamma_hi = 0.9;
};

/// Negative log-likelihood at natural-scale parameters. Multi-station
/// layouts concatenate per-station blocks and append the single shared
/// shape parameter (families with a shape only). Support violations and
/// out-of-domain parameters return +inf so the simplex can retreat.
double model_negloglik(const ModelSpec& spec, std::span<const double> params,
                       std::span<const StationSeries> data, bool shared_shape);

/// Maximum likelihood via Nelder-Mead downhill simplex from a moment-based
/// start with jittered restarts. Multi-station shared-shape fits profile
/// the likelihood over the shape with per-station inner fits. Standard
/// errors are attached when the numerical Hessian is positive definite and
/// small enough to invert cheaply.
FitResult fit_mle(const ModelSpec& spec, std::span<const StationSeries> data,
                  bool shared_shape, const OptimizerConfig& config,
                  std::uint64_t seed);

/// Central-difference Hessian of the negative log-likelihood at the fitted
/// optimum; returns sqrt of the inverse diagonal. Throws numeric_error when
/// the Hessian is singular.
std::vector<double> standard_errors(const ModelSpec& spec, const FitResult& fit,
                                    std::span<const StationSeries> data,
                                    bool shared_shape);

/// Two-sided normal test of a trend parameter against zero: (z, p).
std::pair<double, double> trend_significance(const FitResult& fit,
                                             std::string_view trend_param);

/// PGEV reference level: the empirical 75% quantile of the series.
double pgev_reference_level(const StationSeries& series);

/// Per-observation GEV parameters implied by a single-station parameter
/// block (resolves trends through the covariate). Exposed for the scoring
/// pipeline.
struct ResolvedObservation {
  double mu, sigma, gamma;
};
ResolvedObservation resolve_observation(const ModelSpec& spec,
                                        std::span<const double> station_params,
                                        double shape, double covariate,
                                        double reference_level);

}  // namespace escore
