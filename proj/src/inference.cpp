#include "escore/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "escore/distributions.hpp"
#include "escore/error.hpp"
#include "escore/numerics.hpp"
#include "escore/rng.hpp"

namespace escore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGammaClamp = 0.99;  // keeps the CRPS-existence domain honest

// Station-block size, excluding any shape parameter.
int block_size(ModelFamily family) {
  switch (family) {
    case ModelFamily::Gumbel: return 2;
    case ModelFamily::Gev: return 2;
    case ModelFamily::GevMuTrend: return 3;
    case ModelFamily::PgevLambdaTrend: return 3;
  }
  return 0;
}

bool has_shape(ModelFamily family) { return family != ModelFamily::Gumbel; }

std::vector<std::string> block_names(ModelFamily family) {
  switch (family) {
    case ModelFamily::Gumbel: return {"mu", "sigma"};
    case ModelFamily::Gev: return {"mu", "sigma"};
    case ModelFamily::GevMuTrend: return {"mu0", "mu1", "sigma"};
    case ModelFamily::PgevLambdaTrend: return {"lambda0", "lambda1", "sigma_u"};
  }
  return {};
}

void require_covariate(const ModelSpec& spec,
                       std::span<const StationSeries> data) {
  if (!spec.covariate_required()) return;
  for (const auto& s : data) {
    if (!s.covariate || s.covariate->size() != s.values.size())
      throw data_error("model requires a covariate aligned to every series");
  }
}

// Negative log-likelihood of one station block at a fixed shape.
double station_negloglik(const ModelSpec& spec,
                         std::span<const double> block, double shape,
                         const StationSeries& series, double reference_level) {
  const int sigma_idx = block_size(spec.family) - 1;
  if (!(block[sigma_idx] > 0.0)) return kInf;
  if (has_shape(spec.family) && !(std::fabs(shape) < kGammaClamp)) return kInf;
  double nll = 0.0;
  for (std::size_t j = 0; j < series.values.size(); ++j) {
    const double cov = series.covariate ? (*series.covariate)[j] : 0.0;
    const ResolvedObservation obs =
        resolve_observation(spec, block, shape, cov, reference_level);
    if (!(obs.sigma > 0.0) || !std::isfinite(obs.mu)) return kInf;
    const double lp =
        gev_logpdf({obs.mu, obs.sigma, obs.gamma}, series.values[j]);
    if (!std::isfinite(lp)) return kInf;  // outside support: soft barrier
    nll -= lp;
  }
  return nll;
}

struct NmOutcome {
  std::vector<double> x;
  double f = kInf;
  bool converged = false;
};

// Classic downhill simplex in the transformed space.
NmOutcome nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                      const std::vector<double>& x0, int max_iter,
                      double f_tol) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double step = 0.1 * std::max(std::fabs(x0[i]), 0.25);
    simplex[i + 1][i] += step;
  }
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  NmOutcome out;
  for (int iter = 0; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t lo = order[0], hi = order[n], second_hi = order[n - 1];

    if (std::isfinite(fv[lo]) &&
        fv[hi] - fv[lo] <= f_tol * (std::fabs(fv[lo]) + f_tol)) {
      out.converged = true;
      out.x = simplex[lo];
      out.f = fv[lo];
      return out;
    }
    // Entirely infeasible region (every vertex violates the support):
    // give the simplex a short window to escape, then bail out.
    if (!std::isfinite(fv[lo]) && iter > 40) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == hi) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k];
    }
    for (auto& c : centroid) c /= static_cast<double>(n);

    auto along = [&](double coef) {
      std::vector<double> x(n);
      for (std::size_t k = 0; k < n; ++k)
        x[k] = centroid[k] + coef * (simplex[hi][k] - centroid[k]);
      return x;
    };

    const std::vector<double> reflected = along(-1.0);
    const double fr = f(reflected);
    if (fr < fv[order[0]]) {
      const std::vector<double> expanded = along(-2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[hi] = expanded;
        fv[hi] = fe;
      } else {
        simplex[hi] = reflected;
        fv[hi] = fr;
      }
    } else if (fr < fv[second_hi]) {
      simplex[hi] = reflected;
      fv[hi] = fr;
    } else {
      const std::vector<double> contracted = along(fr < fv[hi] ? -0.5 : 0.5);
      const double fc = f(contracted);
      if (fc < std::min(fr, fv[hi])) {
        simplex[hi] = contracted;
        fv[hi] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == lo) continue;
          for (std::size_t k = 0; k < n; ++k)
            simplex[i][k] = simplex[lo][k] + 0.5 * (simplex[i][k] - simplex[lo][k]);
          fv[i] = f(simplex[i]);
        }
      }
    }
  }
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
  out.x = simplex[order[0]];
  out.f = fv[order[0]];
  out.converged = false;
  return out;
}

// Transform between natural and optimizer space: log on scale parameters,
// everything else raw. The shape travels raw and is clamped by the
// likelihood barrier.
std::vector<double> to_optimizer(const ModelSpec& spec,
                                 std::vector<double> natural,
                                 bool includes_shape) {
  const int sigma_idx = block_size(spec.family) - 1;
  natural[sigma_idx] = std::log(natural[sigma_idx]);
  (void)includes_shape;
  return natural;
}

std::vector<double> to_natural(const ModelSpec& spec, std::vector<double> opt,
                               bool includes_shape) {
  const int sigma_idx = block_size(spec.family) - 1;
  opt[sigma_idx] = std::exp(opt[sigma_idx]);
  (void)includes_shape;
  return opt;
}

// Moment-based start on the natural scale (single station block + shape).
std::vector<double> moment_start(const ModelSpec& spec,
                                 const StationSeries& series) {
  double mean = 0.0;
  for (double v : series.values) mean += v;
  mean /= static_cast<double>(series.values.size());
  double ss = 0.0;
  for (double v : series.values) ss += (v - mean) * (v - mean);
  const double sd =
      std::sqrt(ss / std::max<std::size_t>(series.values.size() - 1, 1));
  const double sigma0 = std::max(std::sqrt(6.0) * sd / M_PI, 1e-8);
  const double mu0 = mean - kEulerGamma * sigma0;
  switch (spec.family) {
    case ModelFamily::Gumbel: return {mu0, sigma0};
    case ModelFamily::Gev: return {mu0, sigma0};
    case ModelFamily::GevMuTrend: return {mu0, 0.0, sigma0};
    case ModelFamily::PgevLambdaTrend:
      // F(u) = 0.75 at the reference level gives lambda = -ln 0.75.
      return {std::log(-std::log(0.75)), 0.0, sigma0};
  }
  return {};
}

struct SingleFit {
  std::vector<double> block;  // natural, without shape
  double shape = 0.0;
  double nll = kInf;
  bool converged = false;
};

// Fit one station; when fixed_shape is set the shape is held there and only
// the block parameters move.
SingleFit fit_station(const ModelSpec& spec, const StationSeries& series,
                      std::optional<double> fixed_shape,
                      const OptimizerConfig& config, std::uint64_t seed,
                      const std::vector<double>* warm_block = nullptr) {
  const double u_ref = spec.family == ModelFamily::PgevLambdaTrend
                           ? pgev_reference_level(series)
                           : 0.0;
  const bool fit_shape = has_shape(spec.family) && !fixed_shape;
  const double base_shape = fixed_shape.value_or(0.1);

  std::vector<double> start = moment_start(spec, series);
  if (warm_block) start = *warm_block;
  if (fit_shape) start.push_back(0.1);

  auto objective = [&](const std::vector<double>& opt) {
    std::vector<double> x = opt;
    double shape = base_shape;
    if (fit_shape) {
      shape = x.back();
      x.pop_back();
    }
    const std::vector<double> block = to_natural(spec, std::move(x), false);
    return station_negloglik(spec, block, has_shape(spec.family) ? shape : 0.0,
                             series, u_ref);
  };

  std::vector<double> start_opt = to_optimizer(
      spec,
      [&] {
        std::vector<double> s = start;
        if (fit_shape) s.pop_back();
        return s;
      }(),
      false);
  if (fit_shape) start_opt.push_back(start.back());

  SingleFit best;
  const int n_starts = std::max(1, config.n_restarts);
  for (int r = 0; r < n_starts; ++r) {
    std::vector<double> x0 = start_opt;
    if (r > 0) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
      for (auto& v : x0) {
        const double u = 2.0 * rng.next_u01() - 1.0;
        v += config.jitter * (std::fabs(v) + 0.25) * u;
      }
    }
    const NmOutcome nm = nelder_mead(objective, x0, config.max_iter, config.f_tol);
    if (nm.f < best.nll || best.block.empty()) {
      std::vector<double> x = nm.x;
      double shape = base_shape;
      if (fit_shape) {
        shape = x.back();
        x.pop_back();
      }
      best.block = to_natural(spec, std::move(x), false);
      best.shape = has_shape(spec.family) ? shape : 0.0;
      best.nll = nm.f;
      best.converged = nm.converged;
    }
  }
  return best;
}

}  // namespace

std::vector<std::string> ModelSpec::param_names() const {
  std::vector<std::string> names = block_names(family);
  if (has_shape(family)) names.push_back("gamma");
  return names;
}

ResolvedObservation resolve_observation(const ModelSpec& spec,
                                        std::span<const double> station_params,
                                        double shape, double covariate,
                                        double reference_level) {
  switch (spec.family) {
    case ModelFamily::Gumbel:
      return {station_params[0], station_params[1], 0.0};
    case ModelFamily::Gev:
      return {station_params[0], station_params[1], shape};
    case ModelFamily::GevMuTrend:
      return {station_params[0] + station_params[1] * covariate,
              station_params[2], shape};
    case ModelFamily::PgevLambdaTrend: {
      const double lambda =
          std::exp(station_params[0] + station_params[1] * covariate);
      const GevParams g = pgev_to_gev(
          {lambda, station_params[2], shape, reference_level});
      return {g.mu, g.sigma, g.gamma};
    }
  }
  return {0.0, 1.0, 0.0};
}

double pgev_reference_level(const StationSeries& series) {
  return empirical_quantile(series.values, 0.75);
}

double model_negloglik(const ModelSpec& spec, std::span<const double> params,
                       std::span<const StationSeries> data, bool shared_shape) {
  if (data.empty()) throw data_error("model_negloglik: no data");
  require_covariate(spec, data);
  const int bs = block_size(spec.family);
  const bool shape = has_shape(spec.family);

  if (data.size() == 1) {
    const std::size_t expected = static_cast<std::size_t>(bs) + (shape ? 1 : 0);
    if (params.size() != expected)
      throw domain_error("model_negloglik: wrong parameter count");
    const double sh = shape ? params[bs] : 0.0;
    const double u_ref = spec.family == ModelFamily::PgevLambdaTrend
                             ? pgev_reference_level(data[0])
                             : 0.0;
    return station_negloglik(spec, params.subspan(0, bs), sh, data[0], u_ref);
  }

  if (shape && !shared_shape)
    throw domain_error(
        "model_negloglik: multi-station fits require a shared shape");
  const std::size_t expected =
      static_cast<std::size_t>(bs) * data.size() + (shape ? 1 : 0);
  if (params.size() != expected)
    throw domain_error("model_negloglik: wrong parameter count");
  const double sh = shape ? params[expected - 1] : 0.0;
  double total = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const double u_ref = spec.family == ModelFamily::PgevLambdaTrend
                             ? pgev_reference_level(data[s])
                             : 0.0;
    total += station_negloglik(spec, params.subspan(s * bs, bs), sh, data[s], u_ref);
    if (!std::isfinite(total)) return kInf;
  }
  return total;
}

FitResult fit_mle(const ModelSpec& spec, std::span<const StationSeries> data,
                  bool shared_shape, const OptimizerConfig& config,
                  std::uint64_t seed) {
  if (data.empty()) throw data_error("fit_mle: no data");
  require_covariate(spec, data);
  for (const auto& s : data) {
    if (static_cast<int>(s.values.size()) < config.min_obs)
      throw data_error("fit_mle: series '" + s.station_id +
                       "' is below the observation floor");
  }

  FitResult result;
  const int bs = block_size(spec.family);

  if (data.size() == 1) {
    const SingleFit fit = fit_station(spec, data[0], std::nullopt, config, seed);
    result.params = fit.block;
    if (has_shape(spec.family)) result.params.push_back(fit.shape);
    result.param_names = spec.param_names();
    result.neg_loglik = fit.nll;
    result.converged = fit.converged && std::isfinite(fit.nll);
    result.n_restarts_used = std::max(1, config.n_restarts);
  } else if (!has_shape(spec.family)) {
    // Gumbel stations decouple.
    result.neg_loglik = 0.0;
    result.converged = true;
    for (std::size_t s = 0; s < data.size(); ++s) {
      const SingleFit fit = fit_station(spec, data[s], std::nullopt, config,
                                        derive_seed(seed, s));
      for (int k = 0; k < bs; ++k) {
        result.params.push_back(fit.block[k]);
        result.param_names.push_back(block_names(spec.family)[k] + "[" +
                                     data[s].station_id + "]");
      }
      result.neg_loglik += fit.nll;
      result.converged = result.converged && fit.converged;
    }
    result.n_restarts_used = std::max(1, config.n_restarts);
  } else {
    if (!shared_shape)
      throw domain_error("fit_mle: multi-station fits require a shared shape");
    // Profile likelihood over the shared shape: stations decouple at fixed
    // shape, so the inner problem is a cheap per-station simplex. The
    // search runs warm-started single fits; the final assembly gets the
    // jittered restarts.
    OptimizerConfig inner = config;
    inner.n_restarts = 1;
    OptimizerConfig polish = config;
    polish.n_restarts = std::max(2, config.n_restarts / 2);
    std::vector<std::vector<double>> warm(data.size());
    bool warm_ready = false;

    const auto expected_block = static_cast<std::size_t>(bs);
    auto profile = [&](double gamma) {
      double total = 0.0;
      for (std::size_t s = 0; s < data.size(); ++s) {
        const bool use_warm =
            warm_ready && warm[s].size() == expected_block;
        const SingleFit fit =
            fit_station(spec, data[s], gamma, inner, derive_seed(seed, s),
                        use_warm ? &warm[s] : nullptr);
        if (fit.block.size() == expected_block) warm[s] = fit.block;
        total += fit.nll;
      }
      warm_ready = true;
      return total;
    };

    double best_gamma = 0.0, best_f = kInf;
    for (double g = config.gamma_lo; g <= config.gamma_hi + 1e-12; g += 0.1) {
      const double f = profile(g);
      if (f < best_f) {
        best_f = f;
        best_gamma = g;
      }
    }
    // Golden-section refinement inside the bracketing cell.
    double a = std::max(config.gamma_lo, best_gamma - 0.1);
    double b = std::min(config.gamma_hi, best_gamma + 0.1);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = profile(c), fd = profile(d);
    while (b - a > 5e-4) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - invphi * (b - a);
        fc = profile(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + invphi * (b - a);
        fd = profile(d);
      }
    }
    const double gamma_hat = fc < fd ? c : d;

    result.neg_loglik = 0.0;
    result.converged = true;
    for (std::size_t s = 0; s < data.size(); ++s) {
      const bool use_warm = warm[s].size() == expected_block;
      const SingleFit fit =
          fit_station(spec, data[s], gamma_hat, polish, derive_seed(seed, s),
                      use_warm ? &warm[s] : nullptr);
      for (int k = 0; k < bs; ++k) {
        result.params.push_back(fit.block[k]);
        result.param_names.push_back(block_names(spec.family)[k] + "[" +
                                     data[s].station_id + "]");
      }
      result.neg_loglik += fit.nll;
      result.converged = result.converged && fit.converged;
    }
    result.params.push_back(gamma_hat);
    result.param_names.push_back("gamma");
    result.n_restarts_used = std::max(1, config.n_restarts);
  }

  if (result.converged && result.params.size() <= 40) {
    try {
      result.std_errs = standard_errors(spec, result, data, shared_shape);
    } catch (const numeric_error&) {
      result.std_errs.reset();  // singular Hessian: SEs omitted
    }
  }
  return result;
}

std::vector<double> standard_errors(const ModelSpec& spec, const FitResult& fit,
                                    std::span<const StationSeries> data,
                                    bool shared_shape) {
  if (!fit.converged)
    throw domain_error("standard_errors: fit did not converge");
  const std::size_t n = fit.params.size();
  auto f = [&](const std::vector<double>& x) {
    return model_negloglik(spec, x, data, shared_shape);
  };
  std::vector<double> x = fit.params;
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i)
    h[i] = std::max(1e-4 * std::fabs(x[i]), 1e-6);

  const double f0 = f(x);
  std::vector<std::vector<double>> hess(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    auto at = [&](double di) {
      std::vector<double> y = x;
      y[i] += di;
      return f(y);
    };
    hess[i][i] = (at(h[i]) - 2.0 * f0 + at(-h[i])) / (h[i] * h[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      auto at2 = [&](double di, double dj) {
        std::vector<double> y = x;
        y[i] += di;
        y[j] += dj;
        return f(y);
      };
      const double v = (at2(h[i], h[j]) - at2(h[i], -h[j]) -
                        at2(-h[i], h[j]) + at2(-h[i], -h[j])) /
                       (4.0 * h[i] * h[j]);
      hess[i][j] = hess[j][i] = v;
    }
  }
  for (const auto& row : hess)
    for (double v : row)
      if (!std::isfinite(v))
        throw numeric_error("standard_errors: Hessian stencil left the support");

  // Gauss-Jordan inverse with partial pivoting.
  std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(hess[r][col]) > std::fabs(hess[pivot][col])) pivot = r;
    if (std::fabs(hess[pivot][col]) < 1e-120)
      throw numeric_error("standard_errors: singular Hessian");
    std::swap(hess[pivot], hess[col]);
    std::swap(inv[pivot], inv[col]);
    const double scale = hess[col][col];
    for (std::size_t k = 0; k < n; ++k) {
      hess[col][k] /= scale;
      inv[col][k] /= scale;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = hess[r][col];
      if (factor == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        hess[r][k] -= factor * hess[col][k];
        inv[r][k] -= factor * inv[col][k];
      }
    }
  }
  std::vector<double> ses(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(inv[i][i] > 0.0))
      throw numeric_error("standard_errors: Hessian not positive definite");
    ses[i] = std::sqrt(inv[i][i]);
  }
  return ses;
}

std::pair<double, double> trend_significance(const FitResult& fit,
                                             std::string_view trend_param) {
  const auto it = std::find(fit.param_names.begin(), fit.param_names.end(),
                            std::string(trend_param));
  if (it == fit.param_names.end())
    throw domain_error("trend_significance: unknown parameter name");
  if (!fit.std_errs)
    throw numeric_error("trend_significance: standard errors unavailable");
  const auto idx = static_cast<std::size_t>(it - fit.param_names.begin());
  const double se = (*fit.std_errs)[idx];
  const double z = se > 0.0 ? fit.params[idx] / se : 0.0;
  const double p = std::erfc(std::fabs(z) * M_SQRT1_2);
  return {z, p};
}

}  // namespace escore
