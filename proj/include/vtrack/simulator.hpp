#pragma once

// Deterministic ground truth, noisy position measurements and synthetic
// camera frames for a single planar target on the ground plane z = 0.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vtrack/gaussian.hpp"
#include "vtrack/geometry.hpp"
#include "vtrack/image.hpp"
#include "vtrack/rng.hpp"

namespace vtrack {

enum class SegmentKind { kCruise, kTurn, kAccelerate };

std::string_view to_string(SegmentKind kind);
std::optional<SegmentKind> parse_segment_kind(std::string_view name);

/// One piece of the trajectory. Heading and speed carry over between
/// segments; only the first segment may set `speed`.
struct SegmentSpec {
  SegmentKind kind = SegmentKind::kCruise;
  double duration = 1.0;                // s
  std::optional<double> speed;          // m/s, cruise only
  double accel = 0.0;                   // m/s², along the heading
  double turn_rate = 0.0;               // rad/s, positive = counter-clockwise
};

struct SensorModel {
  double position_noise_std = 0.02;  // m per axis
  double dropout_prob = 0.0;
};

struct CameraRig {
  CameraIntrinsics<double> intrinsics;
  RigidPose<double> pose = nadir_pose(0.0, 0.0, 10.0);
  int width = 640;
  int height = 480;
};

enum class TargetShape { kGaussian, kSquare };

struct Appearance {
  TargetShape shape = TargetShape::kGaussian;
  double blob_sigma_px = 5.0;
  double square_side_px = 16.0;
  double rotation_deg = 0.0;
  double gain = 1.0;
  double background = 0.0;
  double pixel_noise_std = 0.0;  // applied by add_pixel_noise, not by synthesize_frame
};

struct Scenario {
  std::string name = "custom";
  std::vector<SegmentSpec> segments;
  double dt = 0.05;
  std::uint64_t seed = 1;
  SensorModel sensor;
  CameraRig camera;
  Appearance appearance;

  double duration() const;
  /// Throws ConfigError naming the offending key path, e.g. "segments[2].turn_rate".
  void validate() const;
};

struct GroundTruthSample {
  double t = 0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
};

/// Samples at t = k dt for k = 0..floor(T/dt); exact closed-form kinematics.
std::vector<GroundTruthSample> simulate_trajectory(const Scenario& scenario);

/// Kinematic state at an arbitrary time inside [0, T].
GroundTruthSample truth_at(const Scenario& scenario, double t);

struct SenseResult {
  std::optional<Measurement<double>> measurement;
  Rng rng;
};

/// z = position + N(0, std² I), absent with probability dropout_prob. Always
/// consumes the same number of draws so streams stay aligned by step index.
SenseResult sense(const GroundTruthSample& truth, const SensorModel& model, Rng rng);

/// Measurement stream for a whole trajectory seeded from `seed`.
std::vector<std::optional<Measurement<double>>> sense_all(const std::vector<GroundTruthSample>& truth,
                                                          const SensorModel& model, std::uint64_t seed);

/// Renders the target at its projected pixel: background + gain * shape.
GrayImage synthesize_frame(const GroundTruthSample& truth, const CameraRig& camera, const Appearance& appearance);

/// Renders `appearance` centred at an explicit pixel location.
GrayImage render_target(int width, int height, const Eigen::Vector2d& center_px, const Appearance& appearance);

GrayImage add_pixel_noise(const GrayImage& image, double stddev, Rng& rng);

}  // namespace vtrack
