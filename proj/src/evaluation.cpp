#include "vtrack/evaluation.hpp"

#include <algorithm>
#include <chrono>

#include "vtrack/errors.hpp"
#include "vtrack/rng.hpp"

namespace vtrack {

double median(std::vector<double> values) {
  require(!values.empty(), "median of an empty set");
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lo + hi);
}

MonteCarloComparison monte_carlo_compare(const RunConfig& cfg, int runs, std::uint64_t seed) {
  require(runs >= 1, "at least one Monte-Carlo run required");
  const auto truth = simulate_trajectory(cfg.scenario);
  MonteCarloComparison out;
  for (int i = 0; i < runs; ++i) {
    const auto z = sense_all(truth, cfg.scenario.sensor, derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto kf = run_tracker(truth, z, cfg.tracker, FilterKind::kKalman);
    const auto imm = run_tracker(truth, z, cfg.tracker, FilterKind::kImm);
    out.kf_max_errors.push_back(kf.metrics.max_error);
    out.imm_max_errors.push_back(imm.metrics.max_error);
    out.kf_rmse.push_back(kf.metrics.rmse);
    out.imm_rmse.push_back(imm.metrics.rmse);
    if (imm.metrics.max_error < kf.metrics.max_error) ++out.imm_wins;
  }
  out.kf_median = median(out.kf_max_errors);
  out.imm_median = median(out.imm_max_errors);
  return out;
}

Throughput measure_throughput(const RunConfig& cfg, int frames, std::uint64_t seed, int full_frame_samples) {
  require(frames >= 1, "at least one frame required");
  using Clock = std::chrono::steady_clock;
  const auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };
  const auto& sc = cfg.scenario;
  const auto truth = simulate_trajectory(sc);
  const double depth = sc.camera.pose.translation().z();
  Rng rng(seed);
  Throughput tp;
  tp.frames = frames;
  tp.width = sc.camera.width;
  tp.height = sc.camera.height;
  std::optional<Track> track;
  std::vector<GrayImage> samples;
  double total = 0;
  for (int f = 0; f < frames; ++f) {
    const auto& gt = truth[static_cast<std::size_t>(f) % truth.size()];
    GrayImage frame = synthesize_frame(gt, sc.camera, sc.appearance);
    if (sc.appearance.pixel_noise_std > 0) frame = add_pixel_noise(frame, sc.appearance.pixel_noise_std, rng);
    if (static_cast<int>(samples.size()) < full_frame_samples) samples.push_back(frame);

    const auto t0 = Clock::now();
    if (!track || gt.t <= track->time) {
      const auto z = frame_measurement(frame, sc.camera, depth, cfg.detector, gt.t);
      if (z) track = start_track(0, *z, cfg.tracker, FilterKind::kImm);
    } else {
      auto step = pipeline_step(*track, frame, sc.camera, depth, cfg.detector, gt.t - track->time, cfg.tracker);
      if (step.report.dropped) {
        track.reset();
      } else {
        track = std::move(step.track);
      }
    }
    total += ms_since(t0);
  }
  tp.pipeline_ms = total / frames;

  double full = 0;
  for (const auto& frame : samples) {
    const auto t0 = Clock::now();
    const auto blobs = detect(frame, cfg.detector);
    full += ms_since(t0);
  }
  tp.full_frame_samples = static_cast<int>(samples.size());
  tp.full_frame_detect_ms = samples.empty() ? 0.0 : full / static_cast<double>(samples.size());
  return tp;
}

}  // namespace vtrack
