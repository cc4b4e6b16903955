#pragma once

// Single-target tracking loop: gated nearest-neighbour association against
// the fused IMM prior, IMM update on a hit, predict-only coasting on a miss.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtrack/imm.hpp"
#include "vtrack/log_detector.hpp"
#include "vtrack/simulator.hpp"

namespace vtrack {

enum class FilterKind { kKalman, kImm };

std::string_view to_string(FilterKind kind);
std::optional<FilterKind> parse_filter_kind(std::string_view name);

struct TrackerConfig {
  double gate_threshold = 9.21;  // chi-square 99%, 2 dof
  int max_misses = 5;
  int tentative_updates = 3;            // associations before the gate applies
  double measurement_std = 0.02;        // m, sets R = std² I
  double initial_velocity_std = 30.0;   // m/s, wide enough for fast targets
  double initial_accel_std = 1.0;       // m/s², ca modes only
  double kf_q = 1.0;                    // intensity of the single-cv baseline
  int window_px = 128;                  // track-guided detection window, 0 = full frame
  std::vector<MotionModelSpec<double>> imm_modes = default_imm_modes();
  Eigen::MatrixXd imm_transition = uniform_switching<double>(4, 0.95);
  Eigen::VectorXd imm_initial_probabilities = Eigen::VectorXd::Constant(4, 0.25);
  MissingFill missing_fill = MissingFill::kOwnEstimate;
  double padding_variance = kDefaultPaddingVariance;

  /// {cv, ca, ct(+omega), ct(-omega)}.
  static std::vector<MotionModelSpec<double>> default_imm_modes(double omega = 0.5);
  void validate() const;
};

struct TrackPoint {
  double t = 0;
  GaussianBelief<double> fused;  // [x, vx, y, vy]
  Eigen::VectorXd mode_probabilities;
  bool associated = false;
};

struct Track {
  int id = 0;
  FilterKind kind = FilterKind::kImm;
  ImmBank<double> bank;  // a single cv mode for the Kalman baseline
  double time = 0;         // time of the latest step
  double last_update = 0;  // time of the latest associated measurement
  int consecutive_misses = 0;
  int updates = 1;         // associated measurements, including the first
  std::vector<TrackPoint> history;
};

struct Association {
  std::size_t index;
  double mahalanobis_squared;
};

struct StepReport {
  double t = 0;
  std::optional<Association> association;
  bool dropped = false;  // consecutive_misses exceeded max_misses
  ImmStepReport imm;
};

/// Nearest detection by d² = νᵀS⁻¹ν against the fused prior. A detection
/// passes the gate when d² <= gate under the fused prior or under any single
/// mode's prior. Ties break on the measurement values, then list position.
std::optional<Association> gate_and_associate(const ImmPrediction<double>& predicted,
                                              std::span<const Measurement<double>> detections,
                                              double gate_threshold);

/// New track at the measurement's position with zero velocity.
Track start_track(int id, const Measurement<double>& first, const TrackerConfig& cfg, FilterKind kind);

struct StepOutcome {
  Track track;
  StepReport report;
};

/// A track with fewer than cfg.tentative_updates associations takes the
/// nearest detection without gating; a two-point velocity can be off by
/// several sigma, and gating on it loses the target for good.
StepOutcome pipeline_step(const Track& track, std::span<const Measurement<double>> detections, double dt,
                          const TrackerConfig& cfg);

/// Frame variant: the strongest blob is back-projected with `depth` and mapped
/// to the ground plane before association. Detection runs in a window of
/// cfg.window_px around the predicted target pixel and falls back to the full
/// frame when the window holds no blob. No blob counts as a miss.
StepOutcome pipeline_step(const Track& track, const GrayImage& frame, const CameraRig& camera, double depth,
                          const DetectorConfig& detector, double dt, const TrackerConfig& cfg);

/// Strongest blob mapped to a world-frame (x, y) measurement, searched first
/// in a window_px square around `window_center` when one is given.
std::optional<Measurement<double>> frame_measurement(const GrayImage& frame, const CameraRig& camera, double depth,
                                                     const DetectorConfig& detector, double timestamp,
                                                     const std::optional<Eigen::Vector2d>& window_center = std::nullopt,
                                                     int window_px = 0);

struct TrackMetrics {
  double max_error = 0;        // m
  double rmse = 0;             // m
  double mean_step_time = 0;   // ms
  int miss_count = 0;
};

/// Position error statistics of `history` against truth on the same dt grid.
TrackMetrics compute_metrics(std::span<const TrackPoint> history, std::span<const GroundTruthSample> truth);

struct TrackingRun {
  std::vector<TrackPoint> history;  // concatenated over all tracks started
  std::vector<StepReport> reports;
  TrackMetrics metrics;
  int tracks_started = 0;
  int tracks_dropped = 0;
};

/// Runs one filter over a measurement stream aligned with `truth`. A track
/// starts at the first measurement and restarts after a drop.
TrackingRun run_tracker(std::span<const GroundTruthSample> truth,
                        std::span<const std::optional<Measurement<double>>> measurements, const TrackerConfig& cfg,
                        FilterKind kind);

}  // namespace vtrack
