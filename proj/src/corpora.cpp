#include "vtrack/corpora.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace vtrack {

std::string_view to_string(CorpusKind kind) { return kind == CorpusKind::kRotation ? "rotation" : "low-light"; }

std::optional<CorpusKind> parse_corpus_kind(std::string_view name) {
  if (name == "rotation") return CorpusKind::kRotation;
  if (name == "low-light") return CorpusKind::kLowLight;
  return std::nullopt;
}

CameraRig corpus_camera() {
  // 128 x 128 nadir view from 10 m; 16 px per metre on the ground.
  CameraRig rig;
  rig.intrinsics = {160.0, 160.0, 63.5, 63.5};
  rig.pose = nadir_pose(0.0, 0.0, 10.0);
  rig.width = 128;
  rig.height = 128;
  return rig;
}

DetectorConfig corpus_detector_config() {
  DetectorConfig cfg;
  cfg.sigma_min = 2.0;
  cfg.sigma_max = 12.0;
  cfg.levels_per_octave = 4;
  cfg.max_blobs = 4;
  return cfg;
}

namespace {

// Ground-plane path of sequence i: a slow arc starting left of centre with a
// per-sequence heading.
Eigen::Vector2d corpus_position(int sequence, double t) {
  const double heading = 2.0 * std::numbers::pi * sequence / kCorpusSequences;
  const double speed = 0.25 + 0.03 * sequence;  // m/s
  const double turn = (sequence % 2 == 0 ? 1.0 : -1.0) * 0.15;
  const Eigen::Vector2d start = -0.6 * Eigen::Vector2d(std::cos(heading), std::sin(heading));
  const double r = speed / turn;
  const double h = heading + turn * t;
  return start + r * Eigen::Vector2d(std::sin(h) - std::sin(heading), std::cos(heading) - std::cos(h));
}

}  // namespace

CorpusFrame render_corpus_frame(CorpusKind kind, int sequence, int frame, std::uint64_t seed) {
  const double t = frame / kCorpusFrameRate;
  const auto rig = corpus_camera();
  GroundTruthSample truth;
  truth.t = t;
  truth.position = corpus_position(sequence, t);
  const auto px = project(Eigen::Vector3d(truth.position.x(), truth.position.y(), 0.0), rig.pose, rig.intrinsics);

  Appearance a;
  if (kind == CorpusKind::kRotation) {
    a.shape = TargetShape::kSquare;
    a.square_side_px = 12.0 + 1.5 * sequence;
    a.rotation_deg = 7.0 * sequence + kCorpusRotationRate * t;
    a.gain = 0.8;
    a.background = 0.1;
    a.pixel_noise_std = 0.02;
  } else {
    a.shape = TargetShape::kGaussian;
    a.blob_sigma_px = 4.0 + 0.3 * sequence;
    a.gain = 0.1 + 0.2 * sequence / (kCorpusSequences - 1);
    a.background = 0.02;
    a.pixel_noise_std = 0.01;
  }
  Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(kind)),
                      static_cast<std::uint64_t>(sequence) * 100000 + static_cast<std::uint64_t>(frame)));
  GrayImage img = synthesize_frame(truth, rig, a);
  img = add_pixel_noise(img, a.pixel_noise_std, rng);
  return {std::move(img), px.pixel};
}

int CorpusResult::successes() const {
  return static_cast<int>(std::count_if(sequences.begin(), sequences.end(), [](const auto& s) { return s.success; }));
}

CorpusResult run_corpus(CorpusKind kind, std::uint64_t seed, const DetectorConfig& cfg, int frames,
                        double tolerance_px) {
  CorpusResult result{kind, {}};
  for (int s = 0; s < kCorpusSequences; ++s) {
    SequenceResult seq;
    seq.sequence = s;
    for (int f = 0; f < frames; ++f) {
      const auto frame = render_corpus_frame(kind, s, f, seed);
      auto blobs = detect(frame.image, cfg);
      seq.truth_px.push_back(frame.truth_px);
      if (blobs.empty()) {
        seq.max_offset_px = std::numeric_limits<double>::infinity();
      } else {
        const auto& top = blobs.front();
        const double off = std::hypot(top.x - frame.truth_px.x(), top.y - frame.truth_px.y());
        seq.max_offset_px = std::max(seq.max_offset_px, off);
        if (off <= tolerance_px) ++seq.hits;
      }
      seq.detections.push_back(std::move(blobs));
    }
    seq.success = seq.hits == frames;
    result.sequences.push_back(std::move(seq));
  }
  return result;
}

}  // namespace vtrack
