#pragma once

// Synthetic detection corpora: seven 100-frame sequences per condition.
//   rotation  - bright square rotating at 30 deg/s while drifting across a
//               nadir view
//   low-light - dim Gaussian target (gain 0.1 .. 0.3) under pixel noise
// A sequence succeeds when every frame's strongest blob lies within the
// tolerance of the projected target position.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vtrack/log_detector.hpp"
#include "vtrack/simulator.hpp"

namespace vtrack {

enum class CorpusKind { kRotation, kLowLight };

std::string_view to_string(CorpusKind kind);
std::optional<CorpusKind> parse_corpus_kind(std::string_view name);

inline constexpr int kCorpusSequences = 7;
inline constexpr int kCorpusFrames = 100;
inline constexpr double kCorpusFrameRate = 20.0;         // Hz
inline constexpr double kCorpusRotationRate = 30.0;      // deg/s
inline constexpr double kCorpusSuccessTolerance = 3.0;   // px

struct CorpusFrame {
  GrayImage image;
  Eigen::Vector2d truth_px;
};

CameraRig corpus_camera();
DetectorConfig corpus_detector_config();

/// Frame `frame` of sequence `sequence`; deterministic in (kind, sequence, frame, seed).
CorpusFrame render_corpus_frame(CorpusKind kind, int sequence, int frame, std::uint64_t seed);

struct SequenceResult {
  int sequence = 0;
  int hits = 0;
  double max_offset_px = 0;
  bool success = false;
  std::vector<std::vector<Blob>> detections;  // per frame, strongest first
  std::vector<Eigen::Vector2d> truth_px;      // per frame
};

struct CorpusResult {
  CorpusKind kind;
  std::vector<SequenceResult> sequences;
  int successes() const;
};

CorpusResult run_corpus(CorpusKind kind, std::uint64_t seed, const DetectorConfig& cfg = corpus_detector_config(),
                        int frames = kCorpusFrames, double tolerance_px = kCorpusSuccessTolerance);

}  // namespace vtrack
