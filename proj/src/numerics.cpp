#include "escore/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "escore/error.hpp"

namespace escore {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Regularized lower incomplete gamma by its power series; reliable and
// cancellation-free for x < a + 1.
double gamma_p_series(double a, double x) {
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 1; n < 10000; ++n) {
    del *= x / (a + n);
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) {
      return sum * std::exp(a * std::log(x) - x - std::lgamma(a));
    }
  }
  throw convergence_error("reg_lower_gamma: series did not converge");
}

// Regularized upper incomplete gamma by modified Lentz continued fraction;
// for x >= a + 1.
double gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) {
      return h * std::exp(a * std::log(x) - x - std::lgamma(a));
    }
  }
  throw convergence_error("reg_upper_gamma: continued fraction did not converge");
}

// E1(x) = int_x^inf e^-t / t dt for x > 0, by modified Lentz.
double expint_e1_cf(double x) {
  double b = x + 1.0;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) return h * std::exp(-x);
  }
  throw convergence_error("expint_ei: continued fraction did not converge");
}

// Lentz continued fraction for the incomplete beta.
double beta_cf(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < 10000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) return h;
  }
  throw convergence_error("reg_inc_beta: continued fraction did not converge");
}

// Gauss-Kronrod (7,15) nodes and weights on [-1,1]; nonnegative abscissae.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkResult {
  double integral;
  double error;
};

GkResult gk15(const std::function<double(double)>& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double result_gauss = fc * kWg[3];
  double result_kronrod = fc * kWgk[7];
  for (int j = 0; j < 7; ++j) {
    const double x = half * kXgk[j];
    const double fsum = f(center - x) + f(center + x);
    result_kronrod += kWgk[j] * fsum;
    if (j % 2 == 1) result_gauss += kWg[j / 2] * fsum;
  }
  return {result_kronrod * half,
          std::fabs((result_kronrod - result_gauss) * half)};
}

struct Interval {
  double a, b, integral, error;
  bool operator<(const Interval& other) const { return error < other.error; }
};

// Worst-interval-first adaptive refinement; `budget` counts subdivisions
// across calls so a multi-piece integral honors one global limit.
double adaptive_gk(const std::function<double(double)>& f, double a, double b,
                   const QuadratureSpec& spec, int& budget) {
  if (a == b) return 0.0;
  std::priority_queue<Interval> work;
  GkResult first = gk15(f, a, b);
  work.push({a, b, first.integral, first.error});
  double total = first.integral;
  double total_err = first.error;
  while (total_err > std::max(spec.abs_tol, spec.rel_tol * std::fabs(total))) {
    if (--budget < 0)
      throw convergence_error(
          "integrate: exceeded max_subdivisions before reaching tolerance");
    Interval worst = work.top();
    work.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b)
      throw convergence_error("integrate: interval too small to subdivide");
    GkResult left = gk15(f, worst.a, mid);
    GkResult right = gk15(f, mid, worst.b);
    total += left.integral + right.integral - worst.integral;
    total_err += left.error + right.error - worst.error;
    work.push({worst.a, mid, left.integral, left.error});
    work.push({mid, worst.b, right.integral, right.error});
  }
  return total;
}

}  // namespace

double reg_lower_gamma(double a, double x) {
  if (!(a > 0.0) || x < 0.0)
    throw domain_error("reg_lower_gamma: need a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double reg_upper_gamma(double a, double x) { return 1.0 - reg_lower_gamma(a, x); }

double lower_inc_gamma(double a, double tau) {
  if (!(a > 0.0)) throw domain_error("lower_inc_gamma: a must be > 0");
  if (std::isnan(tau) || tau < 0.0)
    throw domain_error("lower_inc_gamma: tau must be >= 0");
  if (tau == 0.0) return 0.0;
  if (std::isinf(tau)) return std::tgamma(a);
  // Series below the a+1 crossover, continued fraction above.
  if (tau < a + 1.0) return std::tgamma(a) * gamma_p_series(a, tau);
  return std::tgamma(a) * (1.0 - gamma_q_cf(a, tau));
}

double upper_inc_gamma(double a, double tau) {
  if (std::isnan(tau) || !(tau > 0.0))
    throw domain_error("upper_inc_gamma: tau must be > 0");
  if (std::isinf(tau)) return 0.0;
  if (a > 0.0) {
    if (tau >= a + 1.0) return std::tgamma(a) * gamma_q_cf(a, tau);
    return std::tgamma(a) * (1.0 - gamma_p_series(a, tau));
  }
  // a <= 0: walk down from a positive (or zero) base argument with
  //   Gamma_u(b - 1, tau) = (Gamma_u(b, tau) - tau^{b-1} e^{-tau}) / (b - 1).
  const double frac = a - std::floor(a);
  double b;
  double g;
  if (frac == 0.0) {
    b = 0.0;
    g = -expint_ei(-tau);  // Gamma_u(0, tau) = E1(tau)
  } else {
    b = frac;
    g = upper_inc_gamma(frac, tau);
  }
  const double log_tau = std::log(tau);
  const long long steps = std::llround(b - a);
  for (long long k = 1; k <= steps; ++k) {
    const double bn = b - static_cast<double>(k);
    g = (g - std::exp(bn * log_tau - tau)) / bn;
  }
  return g;
}

double expint_ei(double x) {
  if (std::isnan(x) || x == 0.0)
    throw domain_error("expint_ei: x = 0 is a logarithmic singularity");
  if (x < -6.0) return -expint_e1_cf(-x);
  // Convergent series Ei(x) = C + ln|x| + sum_{n>=1} x^n / (n n!). For
  // negative x down to -6 the alternating cancellation stays benign.
  double sum = 0.0;
  double term = 1.0;
  for (int n = 1; n < 4000; ++n) {
    term *= x / n;
    const double contrib = term / n;
    sum += contrib;
    if (std::fabs(contrib) < kEps * (std::fabs(sum) + 1e-30)) break;
  }
  return kEulerGamma + std::log(std::fabs(x)) + sum;
}

double reg_inc_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw domain_error("reg_inc_beta: need a, b > 0");
  if (x < 0.0 || x > 1.0) throw domain_error("reg_inc_beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw domain_error("normal_quantile: p must be in (0,1)");
  // Acklam's rational approximation, then one Halley step.
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

double gamma_quantile(double shape, double rate, double p) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw domain_error("gamma_quantile: shape and rate must be > 0");
  if (!(p > 0.0) || !(p < 1.0))
    throw domain_error("gamma_quantile: p must be in (0,1)");
  // Wilson-Hilferty start, then safeguarded Newton on P(shape, x) = p.
  const double z = normal_quantile(p);
  const double cube = 1.0 - 1.0 / (9.0 * shape) + z / (3.0 * std::sqrt(shape));
  double x = shape * cube * cube * cube;
  if (!(x > 0.0) || !std::isfinite(x)) {
    x = std::exp((std::log(p) + std::lgamma(shape + 1.0)) / shape);
  }
  double lo = 0.0;
  double hi = kInf;
  for (int it = 0; it < 100; ++it) {
    const double f = reg_lower_gamma(shape, x) - p;
    if (f > 0.0) hi = std::min(hi, x);
    else lo = std::max(lo, x);
    const double logpdf = (shape - 1.0) * std::log(x) - x - std::lgamma(shape);
    const double step = f / std::exp(logpdf);
    double next = x - step;
    if (!(next > lo) || !(next < hi)) {
      next = std::isinf(hi) ? 2.0 * x : 0.5 * (lo + hi);
    }
    if (std::fabs(next - x) <= 1e-14 * (std::fabs(x) + 1e-300)) {
      x = next;
      break;
    }
    x = next;
  }
  return x / rate;
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureSpec& spec) {
  int budget = spec.max_subdivisions;
  return adaptive_gk(f, a, b, spec, budget);
}

double quad_wcrps_oracle(const std::function<double(double)>& cdf,
                         const WeightSpec& weight, double y,
                         const QuadratureSpec& spec) {
  const auto integrand = [&](double x) {
    const double w = weight.weight(x);
    if (w == 0.0) return 0.0;
    const double d = cdf(x) - (y <= x ? 1.0 : 0.0);
    return w * d * d;
  };

  // The weight fixes the lower limit when it vanishes below a threshold;
  // otherwise scan down until the cdf is numerically zero.
  double lo;
  bool scan_left = true;
  if (weight.kind == WeightSpec::Kind::Quantile && std::isfinite(weight.q)) {
    lo = weight.q;
    scan_left = false;
  } else if (weight.kind == WeightSpec::Kind::AffineIndicator &&
             weight.a == 0.0) {
    lo = weight.u;
    scan_left = false;
  } else {
    lo = y;
    if (weight.kind == WeightSpec::Kind::AffineIndicator)
      lo = std::min(lo, weight.u);
  }
  if (scan_left) {
    double step = 1.0 + 0.1 * std::fabs(lo);
    int iters = 0;
    while (cdf(lo) > 1e-13 && iters++ < 500) {
      lo -= step;
      step *= 1.4;
    }
  }

  std::vector<double> breaks;
  breaks.push_back(lo);
  if (y > lo) breaks.push_back(y);
  if (weight.kind == WeightSpec::Kind::AffineIndicator && weight.u > lo)
    breaks.push_back(weight.u);
  double hi = *std::max_element(breaks.begin(), breaks.end());
  hi += std::max(1.0, 0.1 * (std::fabs(hi) + std::fabs(lo)));
  breaks.push_back(hi);
  std::sort(breaks.begin(), breaks.end());

  int budget = spec.max_subdivisions;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    total += adaptive_gk(integrand, breaks[i], breaks[i + 1], spec, budget);
  }
  // Extend to the right in widening chunks until contributions fall below
  // the truncation cutoff. Requires the squared survival to be integrable
  // (shape < 1 for the laws considered here).
  double width = std::max(1.0, 0.5 * (hi - lo));
  for (int it = 0; it < 120; ++it) {
    const double chunk =
        adaptive_gk(integrand, hi, hi + width, spec, budget);
    total += chunk;
    hi += width;
    width *= 1.6;
    if (std::fabs(chunk) < spec.abs_tol / 10.0) break;
    if (it == 119)
      throw convergence_error("quad_wcrps_oracle: right tail did not decay");
  }
  return -total;
}

}  // namespace escore
