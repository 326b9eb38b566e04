#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "escore/distributions.hpp"
#include "escore/scoring.hpp"
#include "escore/weights.hpp"

namespace escore {

struct McEstimate {
  double value = 0.0;
  double std_err = 0.0;
};

/// Fair (unbiased) ensemble estimator of the kernel score
///   1/2 * (1/(m(m-1))) sum_{i != j} |W(x_i)-W(x_j)| - (1/m) sum |W(x_i)-W(y)|
/// computed in O(m log m) from the sorted sample. `plug_in` switches the
/// pairwise term to the 1/m^2 plug-in normalization for comparison.
ScoreValue mc_kernel_score(std::span<const double> sorted_sample,
                           const WeightSpec& weight, double y,
                           bool plug_in = false);

/// Same estimator with a jackknife standard error.
McEstimate mc_kernel_score_se(std::span<const double> sorted_sample,
                              const WeightSpec& weight, double y,
                              bool plug_in = false);

/// Generalized-kernel (scaled) estimator -A/B - log(B)/2, with A and B the
/// fair plug-in quantities above. Throws degenerate_error when every
/// chained value coincides (B = 0).
ScoreValue mc_scaled_kernel_score(std::span<const double> sorted_sample,
                                  const WeightSpec& weight, double y);

/// Scaled estimator with a delta-method standard error built from the
/// jackknife covariance of (A, B).
McEstimate mc_scaled_kernel_score_se(std::span<const double> sorted_sample,
                                     const WeightSpec& weight, double y);

/// Location-scale perturbation theta + t * sigma * r of a base law.
struct PerturbationSpec {
  std::array<double, 2> direction{0.0, 1.0};  // unit vector (r1, r2)
  double magnitude = 0.0;                     // t
  GevParams base{};
};

GevParams perturbed_params(const GevParams& base,
                           const std::array<double, 2>& r, double t);

/// Monte Carlo estimate of S_u(P, Q) = E_Q[ S(P^u, Y) | Y > u ], the
/// expected score of the conditional forecast law P^u under truth draws
/// conditioned on exceeding u. Pass u = -inf for the unconditional score.
/// Exceedance draws use u' = F(u) + (1 - F(u)) * uniform, so conditioning
/// is exact; kernel scores split into their pairwise and observation
/// expectations, each estimated without ensemble bias.
McEstimate conditional_expected_score(const ScoreFunction& score,
                                      const GevParams& forecast,
                                      const GevParams& truth, double u, int n,
                                      std::uint64_t seed);

struct ScaleFunctionEstimate {
  double value = 0.0;    // fitted coefficient of t^2: sigma^2 r' s_u r
  double std_err = 0.0;
  std::optional<double> u;  // tail threshold, when conditioning was used
  double linear_coef = 0.0;  // diagnostic: must sit within noise of zero
  double linear_std_err = 0.0;
};

/// Fits D(t) = S_u(Q_theta, Q_theta) - S_u(Q_{theta + t sigma r}, Q_theta)
/// to c t^2 over the grid, using common random numbers across t so D(0)
/// is exactly zero. Returns c; a locally (tail-)scale invariant score
/// produces a c that does not depend on base.sigma.
ScaleFunctionEstimate scale_function_probe(const ScoreFunction& score,
                                           const GevParams& base,
                                           const std::array<double, 2>& r,
                                           std::optional<double> u,
                                           std::span<const double> t_grid,
                                           int n, std::uint64_t seed);

}  // namespace escore
