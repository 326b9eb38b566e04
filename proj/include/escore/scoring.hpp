#pragma once

#include <limits>

#include "escore/distributions.hpp"
#include "escore/weights.hpp"

namespace escore {

/// All scores are oriented higher-is-better, exactly as the formulas print
/// them (negative values are normal). The library never flips signs; the
/// CLI offers a display-only negation flag.
using ScoreValue = double;

/// CRPS for the GEV family, gamma < 1. Both shape branches.
ScoreValue crps_gev(const GevParams& p, double y);

/// Threshold-weighted CRPS for the GEV family with a quantile or
/// affine-indicator chain; the affine kind decomposes exactly as
/// a * CRPS + b * wCRPS(Quantile(u)).
ScoreValue wcrps_gev(const GevParams& p, const WeightSpec& weight, double y);

/// Pairwise kernel expectation E|W(X) - W(X')| for the GEV family.
/// Throws degenerate_error when the weight kills the whole support.
double ew_dist_gev(const GevParams& p, const WeightSpec& weight);

/// Observation kernel expectation E|W(X) - W(y)|; second route into the
/// swCRPS used to test the reformulation identity.
double ew_obs_dist_gev(const GevParams& p, const WeightSpec& weight, double y);

/// Scaled weighted CRPS: wCRPS/E - log(E)/2 - 1/2 with E = E|W(X)-W(X')|.
ScoreValue swcrps_gev(const GevParams& p, const WeightSpec& weight, double y);

/// Scaled CRPS (unweighted kernel).
ScoreValue scrps_gev(const GevParams& p, double y);

/// Logarithmic score; -inf outside the support. Ensembles have no density.
ScoreValue log_score(const Forecast& f, double y);

/// Censored likelihood score: log F(q) for y <= q, log f(y) above.
ScoreValue censored_ls(const Forecast& f, double q, double y);

/// Closed-form benchmark scores (exponential-rate convention: Exp(delta)
/// has mean 1/delta). nu = 1 gives the ideal forecast.
ScoreValue crps_extremist(double delta, double nu, double y);
ScoreValue crps_tau_informed(double delta, double xi, double tau, double y);

/// E[min(Exp(delta), GP(1, xi))], the term shared by the tau-informed CRPS
/// and its pairwise expectation; exposed so a draw loop can reuse it
/// across tau values.
double benchmark_cross_term(double delta, double xi);
ScoreValue crps_tau_informed(double delta, double xi, double tau, double y,
                             double cross_term);
double tau_informed_expected_dist(double delta, double xi, double tau,
                                  double cross_term);

/// E|X - X'| for a benchmark forecast; feeds the SCRPS construction.
double benchmark_expected_dist(const BenchmarkForecast& f);

ScoreValue crps_benchmark(const BenchmarkForecast& f, double y);
ScoreValue scrps_benchmark(const BenchmarkForecast& f, double y);

/// Score selector used by the Monte Carlo probes and the experiment
/// drivers. `threshold` is the censoring level for LsQ; `weight` is the
/// chain for Wcrps/Swcrps. Both are ignored by the unweighted kinds.
enum class ScoreKind { Ls, LsQ, Crps, Scrps, Wcrps, Swcrps };

struct ScoreFunction {
  ScoreKind kind = ScoreKind::Crps;
  WeightSpec weight = WeightSpec::unweighted();
  double threshold = -std::numeric_limits<double>::infinity();

  static ScoreFunction make(ScoreKind kind, const GevParams& p,
                            double threshold_prob);
};

ScoreValue score_gev(const ScoreFunction& score, const GevParams& p, double y);

/// Resolve a threshold probability against a GEV law. The marker
/// p = -inf maps to the finite lower endpoint when the support is bounded
/// below (F = 0 there), which reproduces the unweighted scores exactly.
double resolve_threshold(const GevParams& p, double threshold_prob);
WeightSpec resolve_quantile_weight(const GevParams& p, double threshold_prob);

}  // namespace escore
