#pragma once

// Scale-normalized Laplacian-of-Gaussian blob detection.
//
// Each scale level holds sigma^2 * (LoG_sigma * I). Bright blobs give
// negative responses (the kernel centre is its minimum); detection works on
// the magnitude, so dark blobs are found too.

#include <Eigen/Dense>

#include <vector>

#include "vtrack/image.hpp"

namespace vtrack {

/// Sampled LoG truncated at radius ceil(4 sigma) and shifted to zero sum.
/// taps = s gᵀ + g sᵀ - offset, with g the sampled Gaussian and
/// s(x) = (x² - σ²)/σ⁴ g(x); the separable factors drive the convolution.
struct LoGKernel {
  double sigma = 0;
  int radius = 0;
  Eigen::MatrixXd taps;       // (2r+1) x (2r+1), row = y offset, col = x offset
  Eigen::VectorXd gaussian;   // g, length 2r+1
  Eigen::VectorXd second;     // s, length 2r+1
  double offset = 0;          // mean of the untruncated-sum taps before correction
};

LoGKernel make_log_kernel(double sigma);

/// Correlation with reflect-101 borders. Requires radius < min(width, height).
/// The result is bit-identical under 90° rotations and mirror flips of the
/// input (with the output permuted accordingly).
GrayImage convolve(const GrayImage& image, const LoGKernel& kernel);

struct DetectorConfig {
  double sigma_min = 2.0;
  double sigma_max = 32.0;
  int levels_per_octave = 4;
  double response_threshold = 0.25;  // fraction of the global max |response|
  double absolute_floor = 1e-3;      // minimum |response| to count at all
  int max_blobs = 16;

  void validate() const;
  int level_count() const;
  double level_sigma(int level) const;
};

struct ScaleLevel {
  double sigma;
  GrayImage response;  // sigma² (LoG_sigma * I)
};

struct ScaleSpaceStack {
  std::vector<ScaleLevel> levels;
};

struct Blob {
  double x = 0;
  double y = 0;
  double sigma = 0;
  double response = 0;  // scale-normalized magnitude
};

/// Levels sigma_min * 2^(k / levels_per_octave) up to sigma_max, stopping at
/// the first level whose kernel radius reaches the smaller image side.
ScaleSpaceStack scale_space_response(const GrayImage& image, const DetectorConfig& cfg);

/// 3-D local maxima of |response| over (x, y, level) with sub-pixel and
/// sub-level parabolic refinement, greedy suppression of blobs closer than
/// 2 min(sigma_i, sigma_j), sorted by descending response.
std::vector<Blob> detect_blobs(const ScaleSpaceStack& stack, const DetectorConfig& cfg);

struct NormalizedImage {
  GrayImage image;
  bool low_signal = false;  // zero variance input; image is all zeros
};

/// (I - mean) / stddev.
NormalizedImage normalize_contrast(const GrayImage& image);

/// normalize_contrast -> scale_space_response -> detect_blobs.
std::vector<Blob> detect(const GrayImage& image, const DetectorConfig& cfg, bool normalize = true);

}  // namespace vtrack
