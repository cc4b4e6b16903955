#include "vtrack/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <tuple>

#include "vtrack/errors.hpp"

namespace vtrack {

std::string_view to_string(FilterKind kind) { return kind == FilterKind::kKalman ? "kf" : "imm"; }

std::optional<FilterKind> parse_filter_kind(std::string_view name) {
  if (name == "kf") return FilterKind::kKalman;
  if (name == "imm") return FilterKind::kImm;
  return std::nullopt;
}

std::vector<MotionModelSpec<double>> TrackerConfig::default_imm_modes(double omega) {
  using K = MotionKind;
  // Sharp per-mode intensities: each mode is near exact for its regime and
  // the mode switching absorbs regime changes.
  return {{K::kConstantVelocity, 1.0, 1e-4, 0.0, 2},
          {K::kConstantAcceleration, 1.0, 0.05, 0.0, 2},
          {K::kCoordinatedTurn, 1.0, 1e-3, omega, 2},
          {K::kCoordinatedTurn, 1.0, 1e-3, -omega, 2}};
}

void TrackerConfig::validate() const {
  require(gate_threshold > 0, "tracker gate_threshold must be > 0");
  require(max_misses >= 1, "tracker max_misses must be >= 1");
  require(tentative_updates >= 1, "tracker tentative_updates must be >= 1");
  require(measurement_std > 0, "tracker measurement_std must be > 0");
  require(initial_velocity_std > 0 && initial_accel_std > 0, "tracker initial stds must be > 0");
  require(kf_q >= 0, "tracker kf_q must be >= 0");
  require(!imm_modes.empty(), "imm needs at least one mode");
  const auto m = static_cast<Eigen::Index>(imm_modes.size());
  require(imm_transition.rows() == m && imm_transition.cols() == m, "imm transition matrix must be M x M");
  require(imm_initial_probabilities.size() == m, "imm initial probabilities must have M entries");
  validate_transition<double>(imm_transition);
  validate_probabilities<double>(imm_initial_probabilities);
  for (const auto& mode : imm_modes) require(mode.axes == 2, "tracker modes must be planar (axes = 2)");
}

std::optional<Association> gate_and_associate(const ImmPrediction<double>& predicted,
                                              std::span<const Measurement<double>> detections,
                                              double gate_threshold) {
  if (detections.empty()) return std::nullopt;
  const auto prior = predicted.fused();
  const auto n = prior.dim();
  LinearGaussianModel<double> gating{Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd(n, 0),
                                     predicted.fused_observation(), Eigen::MatrixXd::Zero(n, n),
                                     predicted.bank.measurement_noise};
  // A detection inside any single mode's gate is kept even when the fused
  // prior, dominated by the current mode, would reject it.
  const auto inside_some_mode = [&](const Measurement<double>& z) {
    for (std::size_t j = 0; j < predicted.priors.size(); ++j) {
      if (innovation(predicted.priors[j], z, predicted.models[j]).mahalanobis_squared() <= gate_threshold) return true;
    }
    return false;
  };
  std::optional<Association> best;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const double d2 = innovation(prior, detections[i], gating).mahalanobis_squared();
    if (!(d2 <= gate_threshold) && !inside_some_mode(detections[i])) continue;
    if (!best) {
      best = Association{i, d2};
      continue;
    }
    const auto& zi = detections[i].z;
    const auto& zb = detections[best->index].z;
    const auto key_i = std::make_tuple(d2, zi.x(), zi.y(), i);
    const auto key_b = std::make_tuple(best->mahalanobis_squared, zb.x(), zb.y(), best->index);
    if (key_i < key_b) best = Association{i, d2};
  }
  return best;
}

Track start_track(int id, const Measurement<double>& first, const TrackerConfig& cfg, FilterKind kind) {
  cfg.validate();
  require(first.z.size() == 2, "tracker expects planar (x, y) measurements");
  const double r = cfg.measurement_std * cfg.measurement_std;
  const double v = cfg.initial_velocity_std * cfg.initial_velocity_std;
  GaussianBelief<double> init;
  init.mean = Eigen::Vector4d(first.z.x(), 0.0, first.z.y(), 0.0);
  init.covariance = Eigen::Vector4d(r, v, r, v).asDiagonal();
  const Eigen::MatrixXd rm = Eigen::MatrixXd::Identity(2, 2) * r;

  Track track;
  track.id = id;
  track.kind = kind;
  if (kind == FilterKind::kKalman) {
    MotionModelSpec<double> cv{MotionKind::kConstantVelocity, 1.0, cfg.kf_q, 0.0, 2};
    track.bank = make_bank<double>({cv}, init, Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(1), rm);
  } else {
    track.bank = make_bank<double>(cfg.imm_modes, init, cfg.imm_transition, cfg.imm_initial_probabilities, rm,
                                   cfg.initial_accel_std * cfg.initial_accel_std);
    track.bank.missing_fill = cfg.missing_fill;
    track.bank.padding_variance = cfg.padding_variance;
  }
  track.time = first.timestamp;
  track.last_update = first.timestamp;
  track.history.push_back({first.timestamp, init, track.bank.probabilities, true});
  return track;
}

StepOutcome pipeline_step(const Track& track, std::span<const Measurement<double>> detections, double dt,
                          const TrackerConfig& cfg) {
  require(dt > 0, "pipeline step dt must be > 0");
  const auto predicted = imm_predict(track.bank, dt);
  StepOutcome out{track, {}};
  out.track.time = track.time + dt;
  out.report.t = out.track.time;
  const double gate = track.updates < cfg.tentative_updates ? std::numeric_limits<double>::infinity()
                                                             : cfg.gate_threshold;
  out.report.association = gate_and_associate(predicted, detections, gate);

  ImmStepResult<double> step = out.report.association ? imm_update(predicted, detections[out.report.association->index])
                                                      : imm_coast(predicted);
  out.report.imm = step.report;
  out.track.bank = std::move(step.bank);
  if (out.report.association) {
    out.track.consecutive_misses = 0;
    ++out.track.updates;
    out.track.last_update = out.track.time;
  } else {
    ++out.track.consecutive_misses;
    out.report.dropped = out.track.consecutive_misses > cfg.max_misses;
  }
  out.track.history.push_back(
      {out.track.time, std::move(step.fused), out.track.bank.probabilities, out.report.association.has_value()});
  return out;
}

std::optional<Measurement<double>> frame_measurement(const GrayImage& frame, const CameraRig& camera, double depth,
                                                     const DetectorConfig& detector, double timestamp,
                                                     const std::optional<Eigen::Vector2d>& window_center,
                                                     int window_px) {
  std::vector<Blob> blobs;
  const auto radius = static_cast<Eigen::Index>(std::ceil(4.0 * detector.sigma_max));
  const bool windowed = window_center && window_px > 2 * radius && window_px < std::max(frame.rows(), frame.cols()) &&
                        window_center->allFinite();
  if (windowed) {
    const Eigen::Index ww = std::min<Eigen::Index>(window_px, frame.cols());
    const Eigen::Index wh = std::min<Eigen::Index>(window_px, frame.rows());
    const auto x0 = std::clamp<Eigen::Index>(std::llround(window_center->x()) - ww / 2, 0, frame.cols() - ww);
    const auto y0 = std::clamp<Eigen::Index>(std::llround(window_center->y()) - wh / 2, 0, frame.rows() - wh);
    blobs = detect(frame.block(y0, x0, wh, ww), detector);
    for (auto& b : blobs) {
      b.x += static_cast<double>(x0);
      b.y += static_cast<double>(y0);
    }
  }
  if (blobs.empty()) blobs = detect(frame, detector);
  if (blobs.empty()) return std::nullopt;
  const auto& top = blobs.front();
  const Eigen::Vector3d cam = back_project(Eigen::Vector2d(top.x, top.y), depth, camera.intrinsics);
  const Eigen::Vector3d world = transform_to_world(cam, camera.pose);
  Measurement<double> m;
  m.z = world.head<2>();
  m.timestamp = timestamp;
  return m;
}

StepOutcome pipeline_step(const Track& track, const GrayImage& frame, const CameraRig& camera, double depth,
                          const DetectorConfig& detector, double dt, const TrackerConfig& cfg) {
  std::optional<Eigen::Vector2d> center;
  if (cfg.window_px > 0 && !track.history.empty()) {
    const auto& x = track.history.back().fused.mean;  // [x, vx, y, vy]
    const Eigen::Vector3d ahead(x(0) + x(1) * dt, x(2) + x(3) * dt, 0.0);
    try {
      center = project(ahead, camera.pose, camera.intrinsics).pixel;
    } catch (const BehindCameraError&) {
      center.reset();
    }
  }
  const auto m = frame_measurement(frame, camera, depth, detector, track.time + dt, center, cfg.window_px);
  if (!m) return pipeline_step(track, std::span<const Measurement<double>>{}, dt, cfg);
  return pipeline_step(track, std::span<const Measurement<double>>(&*m, 1), dt, cfg);
}

TrackMetrics compute_metrics(std::span<const TrackPoint> history, std::span<const GroundTruthSample> truth) {
  TrackMetrics m;
  if (history.empty()) return m;
  require(truth.size() >= 2, "truth needs at least two samples to define the time grid");
  const double dt = truth[1].t - truth[0].t;
  double sum_sq = 0;
  for (const auto& p : history) {
    const double k = std::round((p.t - truth[0].t) / dt);
    const auto idx = static_cast<long long>(k);
    require(idx >= 0 && static_cast<std::size_t>(idx) < truth.size(), "history extends beyond the truth timeline");
    const auto& gt = truth[static_cast<std::size_t>(idx)];
    require(std::abs(gt.t - p.t) <= 1e-6, "history and truth timelines are misaligned");
    const double err = std::hypot(p.fused.mean(0) - gt.position.x(), p.fused.mean(2) - gt.position.y());
    m.max_error = std::max(m.max_error, err);
    sum_sq += err * err;
    if (!p.associated) ++m.miss_count;
  }
  m.rmse = std::sqrt(sum_sq / static_cast<double>(history.size()));
  return m;
}

TrackingRun run_tracker(std::span<const GroundTruthSample> truth,
                        std::span<const std::optional<Measurement<double>>> measurements, const TrackerConfig& cfg,
                        FilterKind kind) {
  require(truth.size() == measurements.size(), "one measurement slot per truth sample required");
  using Clock = std::chrono::steady_clock;
  TrackingRun run;
  std::optional<Track> track;
  double step_ms = 0;
  int steps = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto& m = measurements[k];
    const auto t0 = Clock::now();
    if (!track) {
      if (!m) continue;
      track = start_track(run.tracks_started++, *m, cfg, kind);
      run.history.push_back(track->history.back());
      continue;
    }
    const double dt = truth[k].t - track->time;
    auto outcome = m ? pipeline_step(*track, std::span<const Measurement<double>>(&*m, 1), dt, cfg)
                     : pipeline_step(*track, std::span<const Measurement<double>>{}, dt, cfg);
    step_ms += std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    ++steps;
    run.history.push_back(outcome.track.history.back());
    run.reports.push_back(outcome.report);
    if (outcome.report.dropped) {
      ++run.tracks_dropped;
      track.reset();
    } else {
      track = std::move(outcome.track);
    }
  }
  run.metrics = compute_metrics(run.history, truth);
  run.metrics.mean_step_time = steps > 0 ? step_ms / steps : 0.0;
  return run;
}

}  // namespace vtrack
