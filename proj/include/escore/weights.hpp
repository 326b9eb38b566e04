#pragma once

#include <algorithm>
#include <limits>

#include "escore/error.hpp"

namespace escore {

/// Chaining weight for threshold-weighted kernel scores.
///
/// Three kinds are supported:
///   Unweighted       w(x) = 1,              W(x) = x
///   Quantile(q)      w(x) = 1{x >= q},      W(x) = max(x - q, 0)
///   Affine(a,b,u)    w(x) = a + b 1{x>=u},  W(x) = a x + b max(x - u, 0)
///
/// Affine(1,0,.) is the unweighted case; Affine(0,1,u) is Quantile(u).
struct WeightSpec {
  enum class Kind { Unweighted, Quantile, AffineIndicator };

  Kind kind = Kind::Unweighted;
  double q = -std::numeric_limits<double>::infinity();  // Quantile threshold
  double a = 1.0;                                       // affine base weight
  double b = 0.0;                                       // affine jump
  double u = 0.0;                                       // affine threshold

  static WeightSpec unweighted() { return {}; }

  static WeightSpec quantile(double q) {
    WeightSpec w;
    w.kind = Kind::Quantile;
    w.q = q;
    return w;
  }

  static WeightSpec affine_indicator(double a, double b, double u) {
    if (a < 0.0 || b < 0.0)
      throw domain_error("WeightSpec: affine coefficients must be >= 0");
    WeightSpec w;
    w.kind = Kind::AffineIndicator;
    w.a = a;
    w.b = b;
    w.u = u;
    return w;
  }

  double weight(double x) const {
    switch (kind) {
      case Kind::Unweighted: return 1.0;
      case Kind::Quantile: return x >= q ? 1.0 : 0.0;
      case Kind::AffineIndicator: return a + (x >= u ? b : 0.0);
    }
    return 1.0;
  }

  /// Antiderivative W, pinned to W(threshold) = 0 for the quantile kind.
  double chain(double x) const {
    switch (kind) {
      case Kind::Unweighted: return x;
      case Kind::Quantile: return std::max(x - q, 0.0);
      case Kind::AffineIndicator: return a * x + b * std::max(x - u, 0.0);
    }
    return x;
  }
};

}  // namespace escore
