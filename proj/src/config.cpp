#include "escore/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "escore/error.hpp"
#include "escore/io.hpp"

namespace escore {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

const std::vector<std::pair<Experiment, const char*>> kExperimentNames = {
    {Experiment::Benchmark, "benchmark"},
    {Experiment::ScaleThreshold, "scale_threshold"},
    {Experiment::PairedScale, "paired_scale"},
    {Experiment::LakesSim, "lakes_sim"},
    {Experiment::StationEval, "station_eval"},
    {Experiment::PermTrend, "perm_trend"},
};

const std::vector<std::pair<ScoreKind, const char*>> kScoreNames = {
    {ScoreKind::Ls, "ls"},       {ScoreKind::LsQ, "ls_q"},
    {ScoreKind::Crps, "crps"},   {ScoreKind::Scrps, "scrps"},
    {ScoreKind::Wcrps, "wcrps"}, {ScoreKind::Swcrps, "swcrps"},
};

bool score_kind_weighted(ScoreKind kind) {
  return kind == ScoreKind::LsQ || kind == ScoreKind::Wcrps ||
         kind == ScoreKind::Swcrps;
}

double parse_threshold_prob(const std::string& s, const std::string& key) {
  if (s == "-inf") return kNegInf;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    if (!(v >= 0.0 && v < 1.0))
      throw config_error(key + ": threshold probability " + s +
                         " outside [0,1) (use -inf for unweighted)");
    return v;
  } catch (const config_error&) {
    throw;
  } catch (const std::exception&) {
    throw config_error(key + ": cannot parse threshold probability '" + s + "'");
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<GevParams> table3_lakes() {
  return {{175.108, 0.349, -0.285},
          {176.469, 0.395, -0.283},
          {74.990, 0.322, -0.285},
          {183.524, 0.175, -0.404},
          {174.280, 0.355, -0.348}};
}

std::vector<std::string> lake_station_names() {
  return {"st_clair", "michigan_huron", "ontario", "superior", "erie"};
}

struct Setter {
  ExperimentConfig* cfg;
  std::string key, value;

  double real(double lo, double hi) const {
    try {
      std::size_t pos = 0;
      const double v = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
      if (!(v >= lo && v <= hi))
        throw config_error(key + ": value " + value + " outside [" +
                           std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return v;
    } catch (const config_error&) {
      throw;
    } catch (const std::exception&) {
      throw config_error(key + ": cannot parse real '" + value + "'");
    }
  }

  long long integer(long long lo, long long hi) const {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
      if (v < lo || v > hi)
        throw config_error(key + ": value " + value + " out of range");
      return v;
    } catch (const config_error&) {
      throw;
    } catch (const std::exception&) {
      throw config_error(key + ": cannot parse integer '" + value + "'");
    }
  }

  std::vector<double> real_list(double lo, double hi) const {
    std::vector<double> out;
    for (const auto& tok : split_list(value)) {
      Setter item{cfg, key, tok};
      out.push_back(item.real(lo, hi));
    }
    if (out.empty()) throw config_error(key + ": empty list");
    return out;
  }
};

void apply_key(ExperimentConfig& cfg, const std::string& key,
               const std::string& value) {
  Setter set{&cfg, key, value};
  const double inf = std::numeric_limits<double>::infinity();
  if (key == "experiment") {
    cfg.experiment = experiment_from_name(value);
  } else if (key == "master_seed") {
    cfg.master_seed = static_cast<std::uint64_t>(
        set.integer(0, std::numeric_limits<long long>::max()));
    cfg.seed_provided = true;
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(set.integer(1, 1024));
  } else if (key == "n_replicates") {
    cfg.n_replicates = static_cast<int>(set.integer(1, 1000000));
  } else if (key == "series_length") {
    cfg.series_length = static_cast<int>(set.integer(2, 10000000));
  } else if (key == "n_draws") {
    cfg.n_draws = set.integer(2, 2000000000LL);
  } else if (key == "score_set") {
    cfg.score_set.clear();
    for (const auto& tok : split_list(value)) {
      ScoreSetEntry entry;
      const auto at = tok.find('@');
      const std::string name = tok.substr(0, at);
      entry.kind = score_kind_from_name(name);
      if (at != std::string::npos) {
        if (!score_kind_weighted(entry.kind))
          throw config_error("score_set: '" + name + "' takes no threshold");
        entry.threshold_p = parse_threshold_prob(tok.substr(at + 1), key);
      } else if (score_kind_weighted(entry.kind)) {
        entry.threshold_p = 0.9;
      }
      cfg.score_set.push_back(entry);
    }
    if (cfg.score_set.empty()) throw config_error("score_set: empty list");
  } else if (key == "xi") {
    cfg.xi = set.real(1e-6, 1.0 - 1e-6);
  } else if (key == "xi_grid") {
    cfg.xi_grid = set.real_list(1e-6, 1.0 - 1e-6);
  } else if (key == "nu_list") {
    cfg.nu_list = set.real_list(1.0, 100.0);
  } else if (key == "tau_list") {
    cfg.tau_list = set.real_list(0.0, 1.0);
  } else if (key == "nu_power_grid") {
    cfg.nu_power_grid = set.real_list(1.0, 100.0);
  } else if (key == "latent_mode") {
    if (value == "per_observation") cfg.latent_per_series = false;
    else if (value == "per_series") cfg.latent_per_series = true;
    else throw config_error("latent_mode: expected per_observation|per_series");
  } else if (key == "ratio_draws") {
    cfg.ratio_draws = set.integer(100, 2000000000LL);
  } else if (key == "sigma_grid") {
    cfg.sigma_grid = set.real_list(1e-9, 1e9);
  } else if (key == "threshold_probs") {
    cfg.threshold_probs.clear();
    for (const auto& tok : split_list(value))
      cfg.threshold_probs.push_back(parse_threshold_prob(tok, key));
  } else if (key == "scale_factor") {
    cfg.scale_factor = set.real(1e-6, 1e6);
  } else if (key == "shape") {
    cfg.shape = set.real(-0.99, 0.99);
  } else if (key == "sigma1") {
    cfg.sigma1 = set.real(1e-9, 1e9);
  } else if (key == "sigma2") {
    cfg.sigma2 = set.real(1e-9, 1e9);
  } else if (key == "k_grid") {
    cfg.k_grid = set.real_list(1e-6, 1e6);
  } else if (key == "paired_threshold_p") {
    cfg.paired_threshold_p = parse_threshold_prob(value, key);
  } else if (key == "k") {
    cfg.k = set.real(1e-6, 1e6);
  } else if (key == "lakes_preset") {
    if (value == "table3") cfg.lakes_text_sigmas = false;
    else if (value == "text") cfg.lakes_text_sigmas = true;
    else throw config_error("lakes_preset: expected table3|text");
  } else if (key == "ab_common_shape") {
    if (value == "true") cfg.ab_common_shape = true;
    else if (value == "false") cfg.ab_common_shape = false;
    else throw config_error("ab_common_shape: expected true|false");
  } else if (key == "min_years") {
    cfg.min_years = static_cast<int>(set.integer(2, 100000));
  } else if (key == "n_stations") {
    cfg.n_stations = static_cast<int>(set.integer(1, 100000));
  } else if (key == "n_worlds") {
    cfg.n_worlds = static_cast<int>(set.integer(1, 100000));
  } else if (key == "n_years") {
    cfg.n_years = static_cast<int>(set.integer(2, 100000));
  } else if (key == "trend_lambda1") {
    cfg.trend_lambda1 = set.real(-20.0, 20.0);
  } else if (key == "synth_shape") {
    cfg.synth_shape = set.real(-0.99, 0.99);
  } else if (key == "n_permutations") {
    cfg.n_permutations = static_cast<int>(set.integer(1, 10000));
  } else {
    throw config_error("unknown config key '" + key + "'");
  }
  (void)inf;
}

void finalize(ExperimentConfig& cfg) {
  if (!cfg.seed_provided)
    throw config_error(
        "master_seed is required (config key master_seed or --seed)");
  if (cfg.lakes_text_sigmas) {
    cfg.lake_params[1].sigma = 0.47;
    cfg.lake_params[3].sigma = 0.22;
  }
}

}  // namespace

std::string experiment_name(Experiment e) {
  for (const auto& [exp, name] : kExperimentNames)
    if (exp == e) return name;
  return "unknown";
}

Experiment experiment_from_name(const std::string& name) {
  for (const auto& [exp, n] : kExperimentNames)
    if (name == n) return exp;
  throw config_error("unknown experiment '" + name + "'");
}

std::string score_kind_name(ScoreKind kind) {
  for (const auto& [k, name] : kScoreNames)
    if (k == kind) return name;
  return "unknown";
}

ScoreKind score_kind_from_name(const std::string& name) {
  for (const auto& [k, n] : kScoreNames)
    if (name == n) return k;
  throw config_error("unknown score '" + name + "'");
}

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig cfg;
  cfg.experiment = e;
  cfg.lake_params = table3_lakes();
  cfg.lake_names = lake_station_names();
  cfg.nu_list = {1.1, 1.4, 1.8};
  cfg.tau_list = {0.75, 0.5, 0.25};
  cfg.xi_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  for (int i = 0; i <= 9; ++i) cfg.nu_power_grid.push_back(1.1 + 0.1 * i);
  cfg.sigma_grid = {1.0, 2.0, 4.0, 8.0};
  cfg.threshold_probs = {kNegInf, 0.5, 0.9, 0.99};
  cfg.k_grid = {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};

  switch (e) {
    case Experiment::Benchmark:
      cfg.n_draws = 1000000;
      cfg.score_set = {{ScoreKind::Crps, kNegInf}, {ScoreKind::Scrps, kNegInf}};
      break;
    case Experiment::ScaleThreshold:
      cfg.n_draws = 50000;
      cfg.score_set = {{ScoreKind::Wcrps, kNegInf}, {ScoreKind::Swcrps, kNegInf}};
      break;
    case Experiment::PairedScale:
      cfg.n_draws = 100000;
      cfg.score_set = {{ScoreKind::Wcrps, 0.9}, {ScoreKind::Swcrps, 0.9}};
      break;
    case Experiment::LakesSim:
      cfg.score_set = {{ScoreKind::Wcrps, kNegInf}, {ScoreKind::Wcrps, 0.5},
                       {ScoreKind::Wcrps, 0.9},     {ScoreKind::Swcrps, kNegInf},
                       {ScoreKind::Swcrps, 0.5},    {ScoreKind::Swcrps, 0.9}};
      break;
    case Experiment::StationEval:
      cfg.score_set = {{ScoreKind::Ls, kNegInf},  {ScoreKind::Crps, kNegInf},
                       {ScoreKind::Scrps, kNegInf}, {ScoreKind::LsQ, 0.9},
                       {ScoreKind::LsQ, 0.99},    {ScoreKind::Wcrps, 0.9},
                       {ScoreKind::Wcrps, 0.99},  {ScoreKind::Swcrps, 0.9},
                       {ScoreKind::Swcrps, 0.99}};
      break;
    case Experiment::PermTrend:
      cfg.score_set = {{ScoreKind::Ls, kNegInf},
                       {ScoreKind::Crps, kNegInf},
                       {ScoreKind::Scrps, kNegInf},
                       {ScoreKind::Swcrps, 0.9}};
      break;
  }
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text,
                                   std::optional<Experiment> experiment_override,
                                   std::optional<std::uint64_t> seed_override) {
  // Two passes: the experiment key decides the defaults, then every other
  // key overrides them.
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(line_no) +
                         ": expected key = value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw config_error("line " + std::to_string(line_no) +
                         ": empty key or value");
    pairs.emplace_back(key, value);
  }

  Experiment exp = experiment_override.value_or(Experiment::Benchmark);
  bool exp_known = experiment_override.has_value();
  for (const auto& [key, value] : pairs) {
    if (key == "experiment") {
      if (!experiment_override) {
        exp = experiment_from_name(value);
      }
      exp_known = true;
    }
  }
  if (!exp_known)
    throw config_error("experiment is required (config key or subcommand)");

  ExperimentConfig cfg = default_config(exp);
  for (const auto& [key, value] : pairs) {
    if (key == "experiment" && experiment_override) continue;
    apply_key(cfg, key, value);
  }
  cfg.experiment = exp;
  if (seed_override) {
    cfg.master_seed = *seed_override;
    cfg.seed_provided = true;
  }
  finalize(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::string& path,
                              std::optional<Experiment> experiment_override,
                              std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), experiment_override, seed_override);
}

std::vector<std::pair<std::string, std::string>> config_echo(
    const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  auto add = [&](const std::string& k, const std::string& v) {
    out.emplace_back(k, v);
  };
  auto real_str = [](double v) { return format_real(v); };
  auto list_str = [&](const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) s += ',';
      s += real_str(xs[i]);
    }
    return s;
  };
  add("experiment", experiment_name(cfg.experiment));
  add("master_seed", std::to_string(cfg.master_seed));
  add("threads", std::to_string(cfg.threads));
  add("n_replicates", std::to_string(cfg.n_replicates));
  add("series_length", std::to_string(cfg.series_length));
  add("n_draws", std::to_string(cfg.n_draws));
  std::string scores;
  for (std::size_t i = 0; i < cfg.score_set.size(); ++i) {
    if (i) scores += ',';
    scores += score_kind_name(cfg.score_set[i].kind);
    if (std::isfinite(cfg.score_set[i].threshold_p))
      scores += "@" + real_str(cfg.score_set[i].threshold_p);
  }
  add("score_set", scores);
  switch (cfg.experiment) {
    case Experiment::Benchmark:
      add("xi", real_str(cfg.xi));
      add("xi_grid", list_str(cfg.xi_grid));
      add("nu_list", list_str(cfg.nu_list));
      add("tau_list", list_str(cfg.tau_list));
      add("nu_power_grid", list_str(cfg.nu_power_grid));
      add("latent_mode",
          cfg.latent_per_series ? "per_series" : "per_observation");
      add("ratio_draws", std::to_string(cfg.ratio_draws));
      break;
    case Experiment::ScaleThreshold:
      add("sigma_grid", list_str(cfg.sigma_grid));
      add("threshold_probs", list_str(cfg.threshold_probs));
      add("scale_factor", real_str(cfg.scale_factor));
      add("shape", real_str(cfg.shape));
      break;
    case Experiment::PairedScale:
      add("sigma1", real_str(cfg.sigma1));
      add("sigma2", real_str(cfg.sigma2));
      add("k_grid", list_str(cfg.k_grid));
      add("paired_threshold_p", real_str(cfg.paired_threshold_p));
      add("shape", real_str(cfg.shape));
      break;
    case Experiment::LakesSim:
      add("k", real_str(cfg.k));
      add("lakes_preset", cfg.lakes_text_sigmas ? "text" : "table3");
      add("ab_common_shape", cfg.ab_common_shape ? "true" : "false");
      break;
    case Experiment::StationEval:
    case Experiment::PermTrend:
      add("min_years", std::to_string(cfg.min_years));
      add("n_stations", std::to_string(cfg.n_stations));
      add("n_worlds", std::to_string(cfg.n_worlds));
      add("n_years", std::to_string(cfg.n_years));
      add("trend_lambda1", real_str(cfg.trend_lambda1));
      add("synth_shape", real_str(cfg.synth_shape));
      add("n_permutations", std::to_string(cfg.n_permutations));
      break;
  }
  return out;
}

}  // namespace escore
