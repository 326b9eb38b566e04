#include "escore/stattests.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "escore/error.hpp"
#include "escore/numerics.hpp"

namespace escore {

namespace {

// log C(n, k)
double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// P(K <= k) for K ~ Binomial(n, 1/2).
double binom_half_cdf(int n, int k) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  const double log_half_n = -n * std::log(2.0);
  double acc = 0.0;
  for (int i = 0; i <= k; ++i) acc += std::exp(log_choose(n, i) + log_half_n);
  return std::min(acc, 1.0);
}

struct RankedDiffs {
  std::vector<double> ranks;       // midranks of |d|, aligned with nonzero diffs
  std::vector<bool> positive;
  double tie_correction = 0.0;     // sum over tie groups of (t^3 - t)
};

RankedDiffs midrank(std::span<const double> diffs) {
  std::vector<double> abs_vals;
  std::vector<bool> pos;
  for (double d : diffs) {
    if (d == 0.0) continue;  // zeros dropped, not split
    abs_vals.push_back(std::fabs(d));
    pos.push_back(d > 0.0);
  }
  const std::size_t n = abs_vals.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return abs_vals[a] < abs_vals[b]; });
  RankedDiffs out;
  out.ranks.resize(n);
  out.positive = std::move(pos);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && abs_vals[order[j + 1]] == abs_vals[order[i]]) ++j;
    const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    const double t = static_cast<double>(j - i + 1);
    out.tie_correction += t * t * t - t;
    for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = mid;
    i = j + 1;
  }
  return out;
}

// Exact two-sided p-value for W+ given the observed (mid)ranks; the 2^n sign
// assignments are enumerated by dynamic programming over doubled ranks,
// which are integers even in the presence of ties.
double wilcoxon_exact_p(const std::vector<double>& ranks, double w_plus) {
  const std::size_t n = ranks.size();
  long long total = 0;
  std::vector<long long> doubled(n);
  for (std::size_t i = 0; i < n; ++i) {
    doubled[i] = std::llround(2.0 * ranks[i]);
    total += doubled[i];
  }
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  long long reach = 0;
  for (std::size_t i = 0; i < n; ++i) {
    reach += doubled[i];
    for (long long s = reach; s >= doubled[i]; --s)
      count[static_cast<std::size_t>(s)] +=
          count[static_cast<std::size_t>(s - doubled[i])];
  }
  const double denom = std::ldexp(1.0, static_cast<int>(n));  // 2^n
  const long long w2 = std::llround(2.0 * w_plus);
  double lower = 0.0, upper = 0.0;
  for (long long s = 0; s <= total; ++s) {
    if (s <= w2) lower += count[static_cast<std::size_t>(s)];
    if (s >= w2) upper += count[static_cast<std::size_t>(s)];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / denom);
}

}  // namespace

TestResult wilcoxon_signed_rank(std::span<const double> diffs) {
  const RankedDiffs rd = midrank(diffs);
  const int n = static_cast<int>(rd.ranks.size());
  if (n == 0)
    throw degenerate_error("wilcoxon_signed_rank: all differences are zero");
  double w_plus = 0.0;
  for (std::size_t i = 0; i < rd.ranks.size(); ++i)
    if (rd.positive[i]) w_plus += rd.ranks[i];

  TestResult res;
  res.statistic = w_plus;
  res.n_effective = n;
  if (n <= 25) {
    res.p_value = wilcoxon_exact_p(rd.ranks, w_plus);
    return res;
  }
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - rd.tie_correction / 48.0;
  const double shift = w_plus - mean;
  const double cc = shift > 0.0 ? -0.5 : (shift < 0.0 ? 0.5 : 0.0);
  const double z = (shift + cc) / std::sqrt(var);
  res.p_value = std::erfc(std::fabs(z) * M_SQRT1_2);
  return res;
}

TestResult paired_ttest(std::span<const double> diffs) {
  const auto n = static_cast<int>(diffs.size());
  if (n < 2) throw domain_error("paired_ttest: need at least two differences");
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= n;
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  if (!(ss > 0.0))
    throw degenerate_error("paired_ttest: zero sample variance");
  const double sd = std::sqrt(ss / (n - 1.0));
  const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  TestResult res;
  res.statistic = t;
  res.n_effective = n;
  res.p_value = std::min(1.0, 2.0 * student_t_sf(std::fabs(t), n - 1.0));
  return res;
}

TestResult sign_test(std::span<const double> diffs) {
  int pos = 0, n = 0;
  for (double d : diffs) {
    if (d == 0.0) continue;
    ++n;
    if (d > 0.0) ++pos;
  }
  if (n == 0) throw degenerate_error("sign_test: all differences are zero");
  TestResult res;
  res.statistic = pos;
  res.n_effective = n;
  const double lower = binom_half_cdf(n, pos);
  const double upper = 1.0 - binom_half_cdf(n, pos - 1);
  res.p_value = std::min(1.0, 2.0 * std::min(lower, upper));
  return res;
}

double sign_test_rejection_proportion(int n, double alpha) {
  if (n < 1) throw domain_error("sign_test_rejection_proportion: n must be >= 1");
  int best = -1;
  for (int k = 0; 2 * k <= n; ++k) {
    if (2.0 * binom_half_cdf(n, k) <= alpha) best = k;
    else break;
  }
  return best < 0 ? 0.0 : static_cast<double>(best) / n;
}

double student_t_sf(double t, double dof) {
  if (!(dof > 0.0)) throw domain_error("student_t_sf: dof must be > 0");
  if (t < 0.0) return 1.0 - student_t_sf(-t, dof);
  const double x = dof / (dof + t * t);
  return 0.5 * reg_inc_beta(0.5 * dof, 0.5, x);
}

}  // namespace escore
