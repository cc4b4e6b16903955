#pragma once

// Seeded comparisons of the Kalman baseline against the IMM bank, and the
// detector + tracker throughput measurement.

#include <cstdint>
#include <vector>

#include "vtrack/scenario_config.hpp"

namespace vtrack {

struct MonteCarloComparison {
  std::vector<double> kf_max_errors;   // m, one per run
  std::vector<double> imm_max_errors;  // m
  std::vector<double> kf_rmse;
  std::vector<double> imm_rmse;
  double kf_median = 0;
  double imm_median = 0;
  int imm_wins = 0;  // runs with imm max error strictly below kf

  int runs() const { return static_cast<int>(kf_max_errors.size()); }
  double ratio() const { return kf_median > 0 ? imm_median / kf_median : 0.0; }
};

/// Run i draws its measurement noise from derive_seed(seed, i); both filters
/// see the same measurements.
MonteCarloComparison monte_carlo_compare(const RunConfig& cfg, int runs, std::uint64_t seed);

double median(std::vector<double> values);

struct Throughput {
  int frames = 0;
  int width = 0;
  int height = 0;
  double pipeline_ms = 0;          // mean detect + track step per frame
  int full_frame_samples = 0;
  double full_frame_detect_ms = 0;  // mean full-frame detection, for reference
};

/// Renders `frames` camera frames of the scenario and times the frame
/// pipeline (track-guided detection plus one IMM step) on each, then times
/// full-frame detection on up to `full_frame_samples` of them. Rendering is
/// excluded from all timings.
Throughput measure_throughput(const RunConfig& cfg, int frames, std::uint64_t seed, int full_frame_samples = 10);

}  // namespace vtrack
