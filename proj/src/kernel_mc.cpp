#include "escore/kernel_mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "escore/error.hpp"
#include "escore/numerics.hpp"
#include "escore/rng.hpp"

namespace escore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sorted chained values with their prefix sums; the workhorse behind every
// O(m log m) estimator here.
struct ChainedSample {
  std::vector<double> v;       // W(x_i), nondecreasing
  std::vector<double> prefix;  // prefix[k] = sum of v[0..k-1]
  double pair_sum = 0.0;       // sum_{i<j} (v_j - v_i)

  explicit ChainedSample(std::span<const double> sorted_sample,
                         const WeightSpec& weight) {
    const std::size_t m = sorted_sample.size();
    v.resize(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = weight.chain(sorted_sample[i]);
    prefix.resize(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) prefix[i + 1] = prefix[i] + v[i];
    for (std::size_t i = 0; i < m; ++i) {
      pair_sum += (2.0 * static_cast<double>(i) - static_cast<double>(m) + 1.0) * v[i];
    }
  }

  std::size_t size() const { return v.size(); }

  // sum_i |v_i - w|
  double abs_sum(double w) const {
    const auto m = v.size();
    const auto idx = static_cast<std::size_t>(
        std::lower_bound(v.begin(), v.end(), w) - v.begin());
    const double below = static_cast<double>(idx) * w - prefix[idx];
    const double above = (prefix[m] - prefix[idx]) -
                         static_cast<double>(m - idx) * w;
    return below + above;
  }

  // sum_j |v_k - v_j|
  double row_sum(std::size_t k) const {
    const auto m = v.size();
    const double left = static_cast<double>(k) * v[k] - prefix[k];
    const double right = (prefix[m] - prefix[k + 1]) -
                         static_cast<double>(m - k - 1) * v[k];
    return left + right;
  }
};

struct KernelTerms {
  double pair_mean;  // estimate of E|W(X) - W(X')|
  double obs_mean;   // estimate of E|W(X) - W(y)|
};

KernelTerms kernel_terms(const ChainedSample& cs, double wy, bool plug_in) {
  const auto m = static_cast<double>(cs.size());
  const double pair_norm = plug_in ? m * m : m * (m - 1.0);
  return {2.0 * cs.pair_sum / pair_norm, cs.abs_sum(wy) / m};
}

void require_sample(std::span<const double> sample, std::size_t min_size) {
  if (sample.size() < min_size)
    throw domain_error("mc kernel score: sample too small");
  if (!std::is_sorted(sample.begin(), sample.end()))
    throw domain_error("mc kernel score: sample must be sorted ascending");
}

// Leave-one-out values of (pair_mean, obs_mean); used by the jackknife.
struct LooTerms {
  std::vector<double> pair_mean;
  std::vector<double> obs_mean;
};

LooTerms loo_terms(const ChainedSample& cs, double wy, bool plug_in) {
  const std::size_t m = cs.size();
  LooTerms out;
  out.pair_mean.resize(m);
  out.obs_mean.resize(m);
  const double abs_total = cs.abs_sum(wy);
  const double mm = static_cast<double>(m);
  const double pair_norm = plug_in ? (mm - 1.0) * (mm - 1.0) : (mm - 1.0) * (mm - 2.0);
  for (std::size_t k = 0; k < m; ++k) {
    const double pair_k = cs.pair_sum - cs.row_sum(k);
    out.pair_mean[k] = 2.0 * pair_k / pair_norm;
    out.obs_mean[k] = (abs_total - std::fabs(cs.v[k] - wy)) / (mm - 1.0);
  }
  return out;
}

double jackknife_se(const std::vector<double>& values) {
  const double m = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= m;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt((m - 1.0) / m * ss);
}

}  // namespace

ScoreValue mc_kernel_score(std::span<const double> sorted_sample,
                           const WeightSpec& weight, double y, bool plug_in) {
  require_sample(sorted_sample, 2);
  const ChainedSample cs(sorted_sample, weight);
  const auto [pair_mean, obs_mean] = kernel_terms(cs, weight.chain(y), plug_in);
  return 0.5 * pair_mean - obs_mean;
}

McEstimate mc_kernel_score_se(std::span<const double> sorted_sample,
                              const WeightSpec& weight, double y,
                              bool plug_in) {
  require_sample(sorted_sample, 2);
  const ChainedSample cs(sorted_sample, weight);
  const double wy = weight.chain(y);
  const auto [pair_mean, obs_mean] = kernel_terms(cs, wy, plug_in);
  McEstimate est;
  est.value = 0.5 * pair_mean - obs_mean;
  if (sorted_sample.size() < 3) {
    est.std_err = kInf;
    return est;
  }
  const LooTerms loo = loo_terms(cs, wy, plug_in);
  std::vector<double> scores(cs.size());
  for (std::size_t k = 0; k < cs.size(); ++k)
    scores[k] = 0.5 * loo.pair_mean[k] - loo.obs_mean[k];
  est.std_err = jackknife_se(scores);
  return est;
}

ScoreValue mc_scaled_kernel_score(std::span<const double> sorted_sample,
                                  const WeightSpec& weight, double y) {
  require_sample(sorted_sample, 2);
  const ChainedSample cs(sorted_sample, weight);
  const auto [pair_mean, obs_mean] = kernel_terms(cs, weight.chain(y), false);
  if (!(pair_mean > 0.0))
    throw degenerate_error(
        "mc_scaled_kernel_score: all chained sample values are equal");
  return -obs_mean / pair_mean - 0.5 * std::log(pair_mean);
}

McEstimate mc_scaled_kernel_score_se(std::span<const double> sorted_sample,
                                     const WeightSpec& weight, double y) {
  require_sample(sorted_sample, 3);
  const ChainedSample cs(sorted_sample, weight);
  const double wy = weight.chain(y);
  const auto [pair_mean, obs_mean] = kernel_terms(cs, wy, false);
  if (!(pair_mean > 0.0))
    throw degenerate_error(
        "mc_scaled_kernel_score: all chained sample values are equal");
  McEstimate est;
  est.value = -obs_mean / pair_mean - 0.5 * std::log(pair_mean);

  // Delta method on S(A, B) = -A/B - log(B)/2 with the jackknife
  // covariance of (A, B) = (obs_mean, pair_mean).
  const LooTerms loo = loo_terms(cs, wy, false);
  const double m = static_cast<double>(cs.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t k = 0; k < cs.size(); ++k) {
    mean_a += loo.obs_mean[k];
    mean_b += loo.pair_mean[k];
  }
  mean_a /= m;
  mean_b /= m;
  double var_a = 0.0, var_b = 0.0, cov_ab = 0.0;
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const double da = loo.obs_mean[k] - mean_a;
    const double db = loo.pair_mean[k] - mean_b;
    var_a += da * da;
    var_b += db * db;
    cov_ab += da * db;
  }
  const double scale = (m - 1.0) / m;
  var_a *= scale;
  var_b *= scale;
  cov_ab *= scale;
  const double ga = -1.0 / pair_mean;
  const double gb = obs_mean / (pair_mean * pair_mean) - 0.5 / pair_mean;
  est.std_err = std::sqrt(std::max(
      0.0, ga * ga * var_a + 2.0 * ga * gb * cov_ab + gb * gb * var_b));
  return est;
}

GevParams perturbed_params(const GevParams& base, const std::array<double, 2>& r,
                           double t) {
  const double norm = std::sqrt(r[0] * r[0] + r[1] * r[1]);
  if (std::fabs(norm - 1.0) > 1e-9)
    throw domain_error("perturbed_params: direction must be a unit vector");
  GevParams p = base;
  p.mu = base.mu + t * base.sigma * r[0];
  p.sigma = base.sigma * (1.0 + t * r[1]);
  if (!(p.sigma > 0.0))
    throw domain_error("perturbed_params: perturbation makes sigma nonpositive");
  return p;
}

namespace {

// Quantile of a law conditioned on exceeding u.
struct TruncatedSampler {
  GevParams law;
  double p_u;  // F(u)

  double draw(Rng& rng) const {
    return gev_quantile(law, p_u + (1.0 - p_u) * rng.next_u01());
  }
};

McEstimate mean_and_se(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

McEstimate conditional_expected_score(const ScoreFunction& score,
                                      const GevParams& forecast,
                                      const GevParams& truth, double u, int n,
                                      std::uint64_t seed) {
  if (n < 100)
    throw domain_error("conditional_expected_score: need n >= 100 draws");
  gev_validate(forecast);
  gev_validate(truth);
  const double fq_u = gev_cdf(truth, u);
  const double fp_u = gev_cdf(forecast, u);
  if (1.0 - fq_u < 1e-12 || 1.0 - fp_u < 1e-12)
    throw numeric_error(
        "conditional_expected_score: threshold too high, exceedance "
        "probability below 1e-12");

  const TruncatedSampler truth_tail{truth, fq_u};
  const TruncatedSampler fc_tail{forecast, fp_u};

  // Derived streams: 0 drives truth draws, 1 the forecast ensemble for the
  // pairwise term, 2 the paired forecast draws for the cross term. Streams
  // depend only on the seed, so probes get common random numbers across
  // perturbed forecasts.
  Rng truth_rng(derive_seed(seed, 0));

  switch (score.kind) {
    case ScoreKind::Ls:
    case ScoreKind::LsQ: {
      const double log_tail = std::log1p(-fp_u);
      std::vector<double> vals(static_cast<std::size_t>(n));
      for (auto& v : vals) {
        const double y = truth_tail.draw(truth_rng);
        if (score.kind == ScoreKind::Ls || y > score.threshold) {
          v = gev_logpdf(forecast, y) - log_tail;
        } else {
          const double mass = gev_cdf(forecast, score.threshold) - fp_u;
          v = mass > 0.0 ? std::log(mass) - log_tail : -kInf;
        }
      }
      return mean_and_se(vals);
    }
    case ScoreKind::Crps:
    case ScoreKind::Wcrps:
    case ScoreKind::Scrps:
    case ScoreKind::Swcrps: {
      // Pairwise term B = E|W(X)-W(X')| over the conditional forecast law.
      Rng ens_rng(derive_seed(seed, 1));
      std::vector<double> xs(static_cast<std::size_t>(n));
      for (auto& x : xs) x = fc_tail.draw(ens_rng);
      std::sort(xs.begin(), xs.end());
      const ChainedSample cs(xs, score.weight);
      const double m = static_cast<double>(n);
      const double b_hat = 2.0 * cs.pair_sum / (m * (m - 1.0));
      if (!(b_hat > 0.0))
        throw degenerate_error(
            "conditional_expected_score: degenerate kernel expectation");
      // Jackknife variance of B.
      std::vector<double> loo_b(static_cast<std::size_t>(n));
      for (std::size_t k = 0; k < xs.size(); ++k)
        loo_b[k] = 2.0 * (cs.pair_sum - cs.row_sum(k)) / ((m - 1.0) * (m - 2.0));
      double mean_b = 0.0;
      for (double v : loo_b) mean_b += v;
      mean_b /= m;
      double ss_b = 0.0;
      for (double v : loo_b) ss_b += (v - mean_b) * (v - mean_b);
      const double var_b = (m - 1.0) / m * ss_b;

      // Cross term C = E|W(X)-W(Y)| over independent forecast/truth pairs.
      Rng pair_rng(derive_seed(seed, 2));
      std::vector<double> cross(static_cast<std::size_t>(n));
      for (auto& c : cross) {
        const double y = truth_tail.draw(truth_rng);
        const double x = fc_tail.draw(pair_rng);
        c = std::fabs(score.weight.chain(x) - score.weight.chain(y));
      }
      const McEstimate c_est = mean_and_se(cross);
      const double var_c = c_est.std_err * c_est.std_err;

      McEstimate out;
      if (score.kind == ScoreKind::Crps || score.kind == ScoreKind::Wcrps) {
        out.value = 0.5 * b_hat - c_est.value;
        out.std_err = std::sqrt(0.25 * var_b + var_c);
      } else {
        out.value = -c_est.value / b_hat - 0.5 * std::log(b_hat);
        const double gc = -1.0 / b_hat;
        const double gb = c_est.value / (b_hat * b_hat) - 0.5 / b_hat;
        out.std_err = std::sqrt(gc * gc * var_c + gb * gb * var_b);
      }
      return out;
    }
  }
  return {};
}

ScaleFunctionEstimate scale_function_probe(const ScoreFunction& score,
                                           const GevParams& base,
                                           const std::array<double, 2>& r,
                                           std::optional<double> u,
                                           std::span<const double> t_grid,
                                           int n, std::uint64_t seed) {
  for (double t : t_grid) {
    if (!(std::fabs(t) <= 0.1))
      throw domain_error("scale_function_probe: |t| must be <= 0.1");
  }
  const double u_cond = u.value_or(-kInf);
  const McEstimate base_score =
      conditional_expected_score(score, base, base, u_cond, n, seed);

  double sum_dt2 = 0.0, sum_t4 = 0.0, sum_dt = 0.0, sum_t2 = 0.0;
  double var_c_num = 0.0, var_b_num = 0.0;
  for (double t : t_grid) {
    const GevParams pert = perturbed_params(base, r, t);
    const McEstimate st =
        conditional_expected_score(score, pert, base, u_cond, n, seed);
    const double d = base_score.value - st.value;
    // Common random numbers correlate the two estimates; summing the
    // variances is a conservative bound used only for reporting.
    const double var_d = base_score.std_err * base_score.std_err +
                         st.std_err * st.std_err;
    sum_dt2 += d * t * t;
    sum_t4 += t * t * t * t;
    sum_dt += d * t;
    sum_t2 += t * t;
    var_c_num += t * t * t * t * var_d;
    var_b_num += t * t * var_d;
  }
  ScaleFunctionEstimate est;
  est.value = sum_dt2 / sum_t4;
  est.std_err = std::sqrt(var_c_num) / sum_t4;
  est.u = u;
  est.linear_coef = sum_dt / sum_t2;
  est.linear_std_err = std::sqrt(var_b_num) / sum_t2;
  return est;
}

}  // namespace escore
