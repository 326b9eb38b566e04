// extremescore: scoring library CLI.
//
// Subcommands: score, fit, bench, sim-scale, sim-paired, sim-lakes, eval,
// perm-trend. Exit codes: 0 success, 2 config error, 3 data error,
// 4 numerical error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "escore/config.hpp"
#include "escore/distributions.hpp"
#include "escore/error.hpp"
#include "escore/experiments.hpp"
#include "escore/inference.hpp"
#include "escore/io.hpp"
#include "escore/kernel_mc.hpp"
#include "escore/scoring.hpp"
#include "escore/version.hpp"

namespace {

using namespace escore;

struct GlobalOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "results";
  bool plots = false;
  std::optional<int> threads;
  bool negate_display = false;
};

int resolve_threads(const GlobalOpts& g) {
  if (g.threads) return *g.threads;
  if (const char* env = std::getenv("EXTREMESCORE_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw config_error("EXTREMESCORE_THREADS is not an integer");
    }
  }
  return 1;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double display(double v, const GlobalOpts& g) {
  return g.negate_display ? -v : v;
}

ExperimentConfig build_config(const GlobalOpts& g, Experiment exp) {
  ExperimentConfig cfg;
  if (!g.config_path.empty()) {
    cfg = parse_config(g.config_path, exp, g.seed);
  } else {
    cfg = default_config(exp);
    if (g.seed) {
      cfg.master_seed = *g.seed;
      cfg.seed_provided = true;
    }
    if (!cfg.seed_provided)
      throw config_error("master_seed is required (config file or --seed)");
  }
  cfg.threads = resolve_threads(g);
  return cfg;
}

int run_config_experiment(const GlobalOpts& g, Experiment exp,
                          const std::string& data_path,
                          const std::string& covariate_path) {
  const ExperimentConfig cfg = build_config(g, exp);
  std::vector<StationSeries> stations;
  int dropped = 0;
  RunManifest manifest;
  if (!data_path.empty()) {
    StationLoad load = load_station_csv(data_path);
    stations = std::move(load.stations);
    dropped = load.dropped_rows;
    manifest.input_digests.emplace_back(data_path, fnv1a64_file(data_path));
    if (!covariate_path.empty()) {
      attach_covariate(stations, load_covariate_csv(covariate_path));
      manifest.input_digests.emplace_back(covariate_path,
                                          fnv1a64_file(covariate_path));
    }
  }
  if (!g.config_path.empty())
    manifest.input_digests.emplace_back(g.config_path,
                                        fnv1a64_file(g.config_path));

  const ExperimentResult result = run_experiment(cfg, stations);

  manifest.tool_version = kToolVersion;
  manifest.experiment = result.experiment;
  manifest.master_seed = cfg.master_seed;
  manifest.config_echo = config_echo(cfg);
  manifest.dropped_rows = dropped;
  manifest.created_utc = utc_now();
  emit_results(result, manifest, g.out_dir, g.plots);
  std::printf("wrote %s results to %s (%zu rows, %zu summary stats)\n",
              result.experiment.c_str(), g.out_dir.c_str(), result.rows.size(),
              result.summary.size());
  return 0;
}

int cmd_score(const GlobalOpts& g, const std::string& score_name, double mu,
              double sigma, double gamma, double y, std::optional<double> q,
              std::optional<double> p, const std::string& ensemble_path) {
  const ScoreKind kind = score_kind_from_name(score_name);
  WeightSpec weight = WeightSpec::unweighted();
  double threshold = -std::numeric_limits<double>::infinity();
  const GevParams params{mu, sigma, gamma};
  if (q && p) throw config_error("give either --q or --p, not both");
  if (p) {
    weight = resolve_quantile_weight(params, *p);
    threshold = resolve_threshold(params, *p);
  } else if (q) {
    weight = WeightSpec::quantile(*q);
    threshold = *q;
  }

  double value = 0.0;
  if (!ensemble_path.empty()) {
    StationLoad dummy;  // ensemble files are plain newline-separated reals
    std::ifstream in(ensemble_path);
    if (!in) throw data_error("cannot open ensemble file '" + ensemble_path + "'");
    std::vector<double> sample;
    double v;
    while (in >> v) sample.push_back(v);
    if (sample.size() < 2) throw data_error("ensemble needs at least 2 members");
    std::sort(sample.begin(), sample.end());
    switch (kind) {
      case ScoreKind::Crps:
      case ScoreKind::Wcrps:
        value = mc_kernel_score(sample, weight, y);
        break;
      case ScoreKind::Scrps:
      case ScoreKind::Swcrps:
        value = mc_scaled_kernel_score(sample, weight, y);
        break;
      default:
        throw config_error("ensemble scoring supports crps/scrps/wcrps/swcrps");
    }
    (void)dummy;
  } else {
    ScoreFunction fn;
    fn.kind = kind;
    fn.weight = weight;
    fn.threshold = threshold;
    value = score_gev(fn, params, y);
  }
  std::printf("%s\n", format_real(display(value, g)).c_str());
  return 0;
}

int cmd_fit(const GlobalOpts& g, const std::string& data_path,
            const std::string& covariate_path, const std::string& family_name,
            bool shared_shape) {
  ModelSpec spec;
  if (family_name == "gumbel") spec.family = ModelFamily::Gumbel;
  else if (family_name == "gev") spec.family = ModelFamily::Gev;
  else if (family_name == "gev-mu") spec.family = ModelFamily::GevMuTrend;
  else if (family_name == "pgev-lambda") spec.family = ModelFamily::PgevLambdaTrend;
  else throw config_error("unknown family '" + family_name + "'");

  StationLoad load = load_station_csv(data_path);
  if (!covariate_path.empty())
    attach_covariate(load.stations, load_covariate_csv(covariate_path));

  OptimizerConfig opt;
  const std::uint64_t seed = g.seed.value_or(1);
  const FitResult fit = fit_mle(spec, load.stations, shared_shape, opt, seed);

  std::printf("family: %s  stations: %zu  neg_loglik: %s  converged: %s\n",
              family_name.c_str(), load.stations.size(),
              format_real(fit.neg_loglik).c_str(),
              fit.converged ? "yes" : "no");
  for (std::size_t i = 0; i < fit.params.size(); ++i) {
    std::printf("  %-24s %14.6f", fit.param_names[i].c_str(), fit.params[i]);
    if (fit.std_errs) std::printf("  (%.6f)", (*fit.std_errs)[i]);
    std::printf("\n");
  }
  if (spec.covariate_required() && fit.std_errs) {
    const char* trend = spec.family == ModelFamily::GevMuTrend ? "mu1" : "lambda1";
    const std::string name =
        load.stations.size() == 1 ? trend
                                  : std::string(trend) + "[" +
                                        load.stations[0].station_id + "]";
    const auto [z, p] = trend_significance(fit, name);
    std::printf("trend %s: z = %.4f, p = %.6f\n", name.c_str(), z, p);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proper scoring rules for extreme-value forecasts"};
  app.set_version_flag("--version", escore::kToolVersion);
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "key = value config file");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "master seed");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_flag("--plots", g.plots, "emit SVG figure analogues");
  int threads_value = 0;
  auto* threads_opt =
      app.add_option("--threads", threads_value,
                     "worker threads (or EXTREMESCORE_THREADS)");
  app.add_flag("--negate-display", g.negate_display,
               "print scores negated (display only)");

  // score
  auto* score_cmd = app.add_subcommand("score", "evaluate one score");
  std::string score_name = "crps";
  double mu = 0.0, sigma = 1.0, gamma = 0.0, y = 0.0;
  std::optional<double> q_opt, p_opt;
  std::string ensemble_path;
  score_cmd->add_option("--score", score_name,
                        "ls|ls_q|crps|scrps|wcrps|swcrps");
  score_cmd->add_option("--mu", mu, "location");
  score_cmd->add_option("--sigma", sigma, "scale");
  score_cmd->add_option("--gamma", gamma, "shape");
  score_cmd->add_option("--y", y, "observation")->required();
  double q_val = 0.0, p_val = 0.0;
  auto* qf = score_cmd->add_option("--q", q_val, "threshold value");
  auto* pf = score_cmd->add_option("--p", p_val, "threshold probability");
  score_cmd->add_option("--ensemble", ensemble_path,
                        "newline-separated ensemble file");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "maximum likelihood fit");
  std::string data_path, covariate_path, family_name = "gev";
  bool shared_shape = false;
  fit_cmd->add_option("--data", data_path, "station CSV")->required();
  fit_cmd->add_option("--covariate", covariate_path, "year,covariate CSV");
  fit_cmd->add_option("--family", family_name,
                      "gumbel|gev|gev-mu|pgev-lambda");
  fit_cmd->add_flag("--shared-shape", shared_shape,
                    "single regional shape across stations");

  // experiment subcommands
  auto* bench_cmd = app.add_subcommand("bench", "benchmark study");
  auto* scale_cmd = app.add_subcommand("sim-scale", "scale/threshold sweep");
  auto* paired_cmd = app.add_subcommand("sim-paired", "paired-scale grid");
  auto* lakes_cmd = app.add_subcommand("sim-lakes", "Great Lakes simulation");
  auto* eval_cmd = app.add_subcommand("eval", "multi-model station evaluation");
  auto* perm_cmd = app.add_subcommand("perm-trend", "permutation trend diagnostic");
  std::string eval_data, eval_cov, perm_data, perm_cov;
  eval_cmd->add_option("--data", eval_data, "station CSV (synthetic worlds if absent)");
  eval_cmd->add_option("--covariate", eval_cov, "year,covariate CSV");
  perm_cmd->add_option("--data", perm_data, "station CSV (synthetic worlds if absent)");
  perm_cmd->add_option("--covariate", perm_cov, "year,covariate CSV");

  try {
    app.parse(argc, argv);
    if (*seed_opt) g.seed = seed_value;
    if (*threads_opt) g.threads = threads_value;
    if (*qf) q_opt = q_val;
    if (*pf) p_opt = p_val;

    if (score_cmd->parsed())
      return cmd_score(g, score_name, mu, sigma, gamma, y, q_opt, p_opt,
                       ensemble_path);
    if (fit_cmd->parsed())
      return cmd_fit(g, data_path, covariate_path, family_name, shared_shape);
    if (bench_cmd->parsed())
      return run_config_experiment(g, escore::Experiment::Benchmark, "", "");
    if (scale_cmd->parsed())
      return run_config_experiment(g, escore::Experiment::ScaleThreshold, "", "");
    if (paired_cmd->parsed())
      return run_config_experiment(g, escore::Experiment::PairedScale, "", "");
    if (lakes_cmd->parsed())
      return run_config_experiment(g, escore::Experiment::LakesSim, "", "");
    if (eval_cmd->parsed())
      return run_config_experiment(g, escore::Experiment::StationEval,
                                   eval_data, eval_cov);
    if (perm_cmd->parsed())
      return run_config_experiment(g, escore::Experiment::PermTrend, perm_data,
                                   perm_cov);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const escore::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const escore::data_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const escore::numeric_error& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 4;
  }
}
