#pragma once

#include <span>

namespace escore {

/// Outcome of a two-sided paired comparison test. `n_effective` counts the
/// nonzero differences actually used (zeros are dropped by the rank and
/// sign tests).
struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int n_effective = 0;
};

/// Two-sided Wilcoxon signed-rank test. Exact null distribution (with
/// midranks) for n_effective <= 25; normal approximation with tie and
/// continuity corrections above. Statistic is W+, the positive-rank sum.
TestResult wilcoxon_signed_rank(std::span<const double> diffs);

/// Two-sided paired t test; statistic is Student's t with n-1 dof.
TestResult paired_ttest(std::span<const double> diffs);

/// Two-sided exact binomial sign test; statistic is the count of positive
/// differences.
TestResult sign_test(std::span<const double> diffs);

/// Largest proportion k/n (k <= n/2) that a two-sided exact sign test still
/// rejects at level alpha; the rejection line drawn under proportion plots.
double sign_test_rejection_proportion(int n, double alpha);

/// Upper tail P(T > t) of Student's t with `dof` degrees of freedom.
double student_t_sf(double t, double dof);

}  // namespace escore
