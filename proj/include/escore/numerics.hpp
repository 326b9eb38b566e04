#pragma once

#include <functional>

#include "escore/weights.hpp"

namespace escore {

inline constexpr double kEulerGamma = 0.57721566490153286061;

/// Tolerances for the adaptive quadrature oracle.
struct QuadratureSpec {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_subdivisions = 2000;
};

/// Lower incomplete gamma Gamma_l(a, tau) = int_0^tau t^{a-1} e^{-t} dt,
/// unnormalized. Requires a > 0, tau >= 0; tau = +inf gives Gamma(a).
double lower_inc_gamma(double a, double tau);

/// Upper incomplete gamma Gamma_u(a, tau) = int_tau^inf t^{a-1} e^{-t} dt
/// for tau > 0 and any real a. Nonpositive a is reached through the
/// recurrence Gamma_u(a, tau) = (Gamma_u(a+1, tau) - tau^a e^{-tau}) / a.
double upper_inc_gamma(double a, double tau);

/// Exponential integral Ei(x) (Cauchy principal value for x > 0), x != 0.
double expint_ei(double x);

/// Regularized incomplete gamma P(a, x), Q(a, x).
double reg_lower_gamma(double a, double x);
double reg_upper_gamma(double a, double x);

/// Quantile of Gamma(shape, rate).
double gamma_quantile(double shape, double rate, double p);

/// Regularized incomplete beta I_x(a, b).
double reg_inc_beta(double a, double b, double x);

double normal_cdf(double x);
double normal_quantile(double p);

/// Adaptive Gauss-Kronrod (7,15) integration on a finite interval.
/// Throws convergence_error when max_subdivisions is exhausted.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureSpec& spec = {});

/// Quadrature oracle for the weighted CRPS,
///   wCRPS(P, y) = -int w(x) (F(x) - 1{y <= x})^2 dx,
/// evaluated directly from a cdf callable. Slow and independent of every
/// closed form; used as the reference in tests.
double quad_wcrps_oracle(const std::function<double(double)>& cdf,
                         const WeightSpec& weight, double y,
                         const QuadratureSpec& spec = {});

}  // namespace escore
