#include "vtrack/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "vtrack/errors.hpp"

namespace vtrack {

std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::kCruise: return "cruise";
    case SegmentKind::kTurn: return "turn";
    case SegmentKind::kAccelerate: return "accelerate";
  }
  return "?";
}

std::optional<SegmentKind> parse_segment_kind(std::string_view name) {
  if (name == "cruise") return SegmentKind::kCruise;
  if (name == "turn") return SegmentKind::kTurn;
  if (name == "accelerate") return SegmentKind::kAccelerate;
  return std::nullopt;
}

namespace {

struct KinematicState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double speed = 0;
  double heading = 0;  // rad from +x
};

std::string seg_key(std::size_t i, const char* field) {
  return "segments[" + std::to_string(i) + "]." + field;
}

KinematicState advance(const KinematicState& s, const SegmentSpec& seg, double tau) {
  KinematicState out = s;
  const Eigen::Vector2d dir(std::cos(s.heading), std::sin(s.heading));
  switch (seg.kind) {
    case SegmentKind::kCruise:
      out.position = s.position + s.speed * tau * dir;
      break;
    case SegmentKind::kAccelerate:
      out.position = s.position + (s.speed * tau + 0.5 * seg.accel * tau * tau) * dir;
      out.speed = s.speed + seg.accel * tau;
      break;
    case SegmentKind::kTurn: {
      const double w = seg.turn_rate;
      const double heading = s.heading + w * tau;
      const double r = s.speed / w;
      out.position = s.position + r * Eigen::Vector2d(std::sin(heading) - std::sin(s.heading),
                                                      std::cos(s.heading) - std::cos(heading));
      out.heading = heading;
      break;
    }
  }
  return out;
}

GroundTruthSample to_sample(double t, const KinematicState& s) {
  return {t, s.position, s.speed * Eigen::Vector2d(std::cos(s.heading), std::sin(s.heading))};
}

KinematicState initial_state(const Scenario& sc) {
  KinematicState s;
  s.speed = sc.segments.front().speed.value_or(0.0);
  return s;
}

}  // namespace

double Scenario::duration() const {
  double total = 0;
  for (const auto& s : segments) total += s.duration;
  return total;
}

void Scenario::validate() const {
  if (!(dt > 0) || !std::isfinite(dt)) throw ConfigError("scenario.dt: must be a finite number > 0");
  if (segments.empty()) throw ConfigError("segments: at least one segment is required");
  double speed = segments.front().speed.value_or(0.0);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!(s.duration > 0) || !std::isfinite(s.duration)) throw ConfigError(seg_key(i, "duration") + ": must be > 0");
    if (s.speed) {
      if (s.kind != SegmentKind::kCruise) throw ConfigError(seg_key(i, "speed") + ": only cruise segments take a speed");
      if (i != 0) throw ConfigError(seg_key(i, "speed") + ": only the first segment may set the speed");
      if (!(*s.speed >= 0) || !std::isfinite(*s.speed)) throw ConfigError(seg_key(i, "speed") + ": must be >= 0");
    }
    if (s.kind == SegmentKind::kTurn && (s.turn_rate == 0 || !std::isfinite(s.turn_rate))) {
      throw ConfigError(seg_key(i, "turn_rate") + ": turn segments need a finite nonzero turn rate");
    }
    if (s.kind == SegmentKind::kAccelerate) {
      if (!std::isfinite(s.accel)) throw ConfigError(seg_key(i, "accel") + ": must be finite");
      if (speed + s.accel * s.duration < -1e-12) {
        throw ConfigError(seg_key(i, "accel") + ": speed would become negative");
      }
      speed += s.accel * s.duration;
    }
  }
  if (!(sensor.position_noise_std >= 0)) throw ConfigError("sensor.position_noise_std: must be >= 0");
  if (!(sensor.dropout_prob >= 0 && sensor.dropout_prob <= 1)) {
    throw ConfigError("sensor.dropout_prob: must be in [0, 1]");
  }
  if (!(camera.intrinsics.fx > 0 && camera.intrinsics.fy > 0)) throw ConfigError("camera.fx/fy: must be > 0");
  if (camera.width <= 0 || camera.height <= 0) throw ConfigError("camera.width/height: must be > 0");
}

GroundTruthSample truth_at(const Scenario& scenario, double t) {
  KinematicState s = initial_state(scenario);
  double start = 0;
  for (std::size_t i = 0; i < scenario.segments.size(); ++i) {
    const auto& seg = scenario.segments[i];
    const bool last = i + 1 == scenario.segments.size();
    if (t <= start + seg.duration || last) {
      return to_sample(t, advance(s, seg, std::min(t - start, seg.duration)));
    }
    s = advance(s, seg, seg.duration);
    start += seg.duration;
  }
  return to_sample(t, s);
}

std::vector<GroundTruthSample> simulate_trajectory(const Scenario& scenario) {
  scenario.validate();
  const auto count = static_cast<std::size_t>(std::floor(scenario.duration() / scenario.dt + 1e-9)) + 1;
  std::vector<GroundTruthSample> out;
  out.reserve(count);

  KinematicState seg_start = initial_state(scenario);
  std::size_t seg = 0;
  double start = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) * scenario.dt;
    while (seg + 1 < scenario.segments.size() && t > start + scenario.segments[seg].duration) {
      seg_start = advance(seg_start, scenario.segments[seg], scenario.segments[seg].duration);
      start += scenario.segments[seg].duration;
      ++seg;
    }
    const double tau = std::min(t - start, scenario.segments[seg].duration);
    out.push_back(to_sample(t, advance(seg_start, scenario.segments[seg], tau)));
  }
  return out;
}

SenseResult sense(const GroundTruthSample& truth, const SensorModel& model, Rng rng) {
  const double u = rng.uniform();
  const double nx = rng.normal();
  const double ny = rng.normal();
  if (u < model.dropout_prob) return {std::nullopt, rng};
  Measurement<double> m;
  m.z = truth.position + model.position_noise_std * Eigen::Vector2d(nx, ny);
  m.timestamp = truth.t;
  return {std::move(m), rng};
}

std::vector<std::optional<Measurement<double>>> sense_all(const std::vector<GroundTruthSample>& truth,
                                                          const SensorModel& model, std::uint64_t seed) {
  std::vector<std::optional<Measurement<double>>> out;
  out.reserve(truth.size());
  Rng rng(seed);
  for (const auto& sample : truth) {
    auto r = sense(sample, model, rng);
    out.push_back(std::move(r.measurement));
    rng = r.rng;
  }
  return out;
}

namespace {

// Exact cos/sin for multiples of 90 degrees so quarter-turn renders are
// pixel permutations of each other.
std::pair<double, double> cos_sin_deg(double deg) {
  const double q = deg / 90.0;
  if (q == std::round(q)) {
    const auto k = ((static_cast<long long>(std::round(q)) % 4) + 4) % 4;
    static constexpr double kCos[] = {1, 0, -1, 0};
    static constexpr double kSin[] = {0, 1, 0, -1};
    return {kCos[k], kSin[k]};
  }
  const double rad = deg * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

}  // namespace

GrayImage render_target(int width, int height, const Eigen::Vector2d& center, const Appearance& a) {
  require(width > 0 && height > 0, "frame size must be positive");
  GrayImage img = GrayImage::Constant(height, width, a.background);
  if (a.shape == TargetShape::kGaussian) {
    require(a.blob_sigma_px > 0, "blob_sigma_px must be > 0");
    const double inv = 1.0 / (2.0 * a.blob_sigma_px * a.blob_sigma_px);
    for (int y = 0; y < height; ++y) {
      const double dy = y - center.y();
      for (int x = 0; x < width; ++x) {
        const double dx = x - center.x();
        img(y, x) += a.gain * std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
    return img;
  }

  require(a.square_side_px > 0, "square_side_px must be > 0");
  constexpr int kSub = 4;
  const auto [c, s] = cos_sin_deg(a.rotation_deg);
  const double half = 0.5 * a.square_side_px;
  const double reach = half * std::sqrt(2.0) + 1.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x() - reach)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(center.x() + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y() - reach)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(center.y() + reach)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      int inside = 0;
      for (int j = 0; j < kSub; ++j) {
        const double dy = y + (j + 0.5) / kSub - 0.5 - center.y();
        for (int i = 0; i < kSub; ++i) {
          const double dx = x + (i + 0.5) / kSub - 0.5 - center.x();
          // rotate the sample into the square's frame
          const double u = c * dx + s * dy;
          const double v = -s * dx + c * dy;
          if (std::abs(u) <= half && std::abs(v) <= half) ++inside;
        }
      }
      img(y, x) += a.gain * inside / static_cast<double>(kSub * kSub);
    }
  }
  return img;
}

GrayImage synthesize_frame(const GroundTruthSample& truth, const CameraRig& camera, const Appearance& appearance) {
  const auto obs = project(Eigen::Vector3d(truth.position.x(), truth.position.y(), 0.0), camera.pose,
                           camera.intrinsics);
  return render_target(camera.width, camera.height, obs.pixel, appearance);
}

GrayImage add_pixel_noise(const GrayImage& image, double stddev, Rng& rng) {
  GrayImage out = image;
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] += stddev * rng.normal();
  return out;
}

}  // namespace vtrack
