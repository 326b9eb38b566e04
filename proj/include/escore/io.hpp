#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace escore {

/// One station's annual-maximum series, year-sorted, no missing values.
struct StationSeries {
  std::string station_id;
  std::vector<int> years;
  std::vector<double> values;
  std::optional<std::vector<double>> covariate;
};

struct StationLoad {
  std::vector<StationSeries> stations;
  int dropped_rows = 0;  // rows with blank values, dropped and counted
};

/// CSV with header station_id,year,value[,covariate]. Groups rows into
/// year-sorted series; duplicate (station, year) pairs and malformed rows
/// raise data_error with the offending line number.
StationLoad load_station_csv(const std::string& path);

/// CSV with header year,covariate.
std::map<int, double> load_covariate_csv(const std::string& path);

/// Joins a year -> covariate mapping onto every station; any station year
/// missing from the mapping raises data_error.
void attach_covariate(std::vector<StationSeries>& stations,
                      const std::map<int, double>& covariate);

/// Type-7 (linear interpolation) empirical quantile of an unsorted sample.
double empirical_quantile(std::span<const double> values, double p);

/// Long-format record: one scored unit (replicate, station, grid cell).
struct LongRecord {
  std::string score;
  double threshold_p;
  std::string label;
  long long replicate = 0;
  double value = 0.0;
};

/// Summary record: one aggregate statistic per cell.
struct SummaryRecord {
  std::string score;
  double threshold_p;
  std::string label;
  std::string stat;
  double value = 0.0;
};

struct Figure {
  std::string name;  // file stem, e.g. "fig2_scale_threshold"
  std::string svg;
};

struct ExperimentResult {
  std::string experiment;
  std::uint64_t master_seed = 0;
  std::vector<LongRecord> rows;
  std::vector<SummaryRecord> summary;
  std::vector<Figure> figures;
};

/// Reproducibility sidecar written next to every result set.
struct RunManifest {
  std::string tool_version;
  std::string experiment;
  std::uint64_t master_seed = 0;
  std::vector<std::pair<std::string, std::string>> config_echo;
  std::vector<std::pair<std::string, std::string>> input_digests;
  int dropped_rows = 0;
  std::string created_utc;
};

/// Shortest text that round-trips the double exactly (17 significant
/// digits), so reruns produce byte-identical CSVs.
std::string format_real(double v);

std::string fnv1a64_file(const std::string& path);

/// Writes <experiment>_long.csv, <experiment>_summary.csv, manifest.json
/// and, when requested, the figure SVGs into out_dir.
void emit_results(const ExperimentResult& result, const RunManifest& manifest,
                  const std::string& out_dir, bool plots);

}  // namespace escore
