#pragma once

#include <functional>
#include <span>

#include "escore/config.hpp"
#include "escore/io.hpp"

namespace escore {

/// Drivers for the five studies. Each returns long-format records plus the
/// summary statistics the acceptance suite asserts on; reruns with the
/// same config and master seed produce byte-identical CSVs regardless of
/// thread count (per-unit seeds are derived, aggregation is ordered).
ExperimentResult run_benchmark(const ExperimentConfig& cfg);
ExperimentResult run_scale_threshold(const ExperimentConfig& cfg);
ExperimentResult run_paired_scale(const ExperimentConfig& cfg);
ExperimentResult run_lakes_sim(const ExperimentConfig& cfg);

/// Case-study drivers: with real station data they evaluate that single
/// world; with an empty span they generate cfg.n_worlds synthetic worlds.
ExperimentResult run_station_eval(std::span<const StationSeries> data,
                                  const ExperimentConfig& cfg);
ExperimentResult run_permutation_trend(std::span<const StationSeries> data,
                                       const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                std::span<const StationSeries> data = {});

/// Synthetic multi-station world: PGEV truth with station-wise levels and
/// scales, a common shape, and a log-linear frequency trend driven by a
/// smooth covariate.
std::vector<StationSeries> synth_world(const ExperimentConfig& cfg,
                                       std::uint64_t seed);

/// Runs fn(0..n_units) across threads; work items own disjoint output
/// slots, so results do not depend on scheduling.
void parallel_for(int n_units, int threads, const std::function<void(int)>& fn);

}  // namespace escore
