#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "vtrack/log_detector.hpp"
#include "vtrack/rng.hpp"
#include "vtrack/simulator.hpp"

namespace {

using vtrack::Blob;
using vtrack::DetectorConfig;
using vtrack::GrayImage;

TEST(Kernel, SizeZeroSumAndSymmetry) {
  for (double sigma : {1.0, 2.0, 3.7}) {
    const auto k = vtrack::make_log_kernel(sigma);
    EXPECT_EQ(k.taps.rows(), 2 * static_cast<int>(std::ceil(4 * sigma)) + 1);
    EXPECT_LT(std::abs(k.taps.sum()), 1e-9);
    EXPECT_TRUE(k.taps.isApprox(k.taps.reverse(), 0.0));
    EXPECT_TRUE(k.taps.isApprox(k.taps.transpose(), 0.0));
    Eigen::Index r = 0, c = 0;
    k.taps.minCoeff(&r, &c);
    EXPECT_EQ(r, k.radius);
    EXPECT_EQ(c, k.radius);
  }
  EXPECT_EQ(vtrack::make_log_kernel(1.0).taps.rows(), 9);
  EXPECT_EQ(vtrack::make_log_kernel(2.0).taps.rows(), 17);
}

TEST(Kernel, MatchesSampledContinuousOperator) {
  for (double sigma : {1.0, 2.5}) {
    const Eigen::MatrixXd ref = oracle::log_taps(sigma);
    EXPECT_LE((vtrack::make_log_kernel(sigma).taps - ref).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Kernel, RejectsNonPositiveSigma) {
  EXPECT_THROW(vtrack::make_log_kernel(0.0), vtrack::ContractViolation);
  EXPECT_THROW(vtrack::make_log_kernel(-1.0), vtrack::ContractViolation);
}

TEST(Convolve, ImpulseReproducesTaps) {
  const auto k = vtrack::make_log_kernel(2.0);
  GrayImage img = GrayImage::Zero(41, 41);
  img(20, 20) = 1.0;
  const GrayImage out = vtrack::convolve(img, k);
  const Eigen::MatrixXd window = out.block(20 - k.radius, 20 - k.radius, k.taps.rows(), k.taps.cols()).matrix();
  EXPECT_LE((window - k.taps).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Convolve, ConstantImageGivesZero) {
  const GrayImage img = GrayImage::Constant(30, 40, 0.7);
  EXPECT_LE(vtrack::convolve(img, vtrack::make_log_kernel(3.0)).abs().maxCoeff(), 1e-12);
}

TEST(Convolve, MatchesDenseCorrelation) {
  vtrack::Rng rng(21);
  GrayImage img(37, 53);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
  for (double sigma : {1.0, 2.3, 4.0}) {
    const auto k = vtrack::make_log_kernel(sigma);
    const GrayImage ref = oracle::correlate(img, oracle::log_taps(sigma));
    EXPECT_LE((vtrack::convolve(img, k) - ref).abs().maxCoeff(), 1e-12) << "sigma " << sigma;
  }
}

TEST(Convolve, Linear) {
  const GrayImage img = oracle::gaussian_blob(64, 48, 30, 20, 4);
  const auto k = vtrack::make_log_kernel(3.0);
  const GrayImage a = vtrack::convolve(img, k);
  const GrayImage b = vtrack::convolve(0.37 * img, k);
  EXPECT_LE((b - 0.37 * a).abs().maxCoeff(), 1e-15);
}

TEST(Convolve, RejectsKernelLargerThanImage) {
  EXPECT_THROW(vtrack::convolve(GrayImage::Zero(10, 10), vtrack::make_log_kernel(3.0)), vtrack::ContractViolation);
}

TEST(ScaleSpace, GeometricLevels) {
  DetectorConfig cfg;
  const auto stack = vtrack::scale_space_response(GrayImage::Zero(300, 300), cfg);
  ASSERT_EQ(static_cast<int>(stack.levels.size()), cfg.level_count());
  EXPECT_DOUBLE_EQ(stack.levels.front().sigma, 2.0);
  EXPECT_NEAR(stack.levels.back().sigma, 32.0, 1e-12);
  for (std::size_t i = 1; i < stack.levels.size(); ++i) {
    EXPECT_NEAR(stack.levels[i].sigma / stack.levels[i - 1].sigma, std::exp2(0.25), 1e-12);
  }
}

double level_argmax(const vtrack::ScaleSpaceStack& stack, int x, int y) {
  double best = 0, best_sigma = 0;
  for (const auto& level : stack.levels) {
    if (std::abs(level.response(y, x)) > best) {
      best = std::abs(level.response(y, x));
      best_sigma = level.sigma;
    }
  }
  return best_sigma;
}

TEST(ScaleSpace, DiscPeaksAtCharacteristicScale) {
  DetectorConfig cfg;
  cfg.sigma_max = 16;
  const GrayImage img = oracle::disc(96, 48, 48, 10);
  const double dense = oracle::characteristic_scale(img, 48, 48, 4, 12, 0.02);
  EXPECT_NEAR(dense, 10 / std::numbers::sqrt2, 0.05 * 10 / std::numbers::sqrt2);
  const double step = std::exp2(0.25);
  const double found = level_argmax(vtrack::scale_space_response(img, cfg), 48, 48);
  EXPECT_LE(std::abs(std::log(found / dense)), std::log(step));
}

TEST(ScaleSpace, GaussianBlobPeaksAtItsScale) {
  DetectorConfig cfg;
  cfg.sigma_max = 16;
  const GrayImage img = oracle::gaussian_blob(96, 96, 48, 48, 6);
  const double dense = oracle::characteristic_scale(img, 48, 48, 3, 10, 0.02);
  EXPECT_NEAR(dense, 6.0, 0.2);
  const double found = level_argmax(vtrack::scale_space_response(img, cfg), 48, 48);
  EXPECT_LE(std::abs(std::log(found / dense)), std::log(std::exp2(0.25)));
}

TEST(Detect, SingleGaussianBlob) {
  const auto blobs = vtrack::detect_blobs(vtrack::scale_space_response(oracle::gaussian_blob(128, 128, 64, 64, 5), {}),
                                          DetectorConfig{});
  ASSERT_EQ(blobs.size(), 1u);
  EXPECT_LE(std::abs(blobs[0].x - 64), 1.0);
  EXPECT_LE(std::abs(blobs[0].y - 64), 1.0);
}

TEST(Detect, TwoSeparatedBlobs) {
  const GrayImage img = oracle::gaussian_blob(128, 128, 44, 64, 4) + oracle::gaussian_blob(128, 128, 84, 64, 4);
  const auto blobs = vtrack::detect(img, DetectorConfig{});
  ASSERT_EQ(blobs.size(), 2u);
  const double lo = std::min(blobs[0].x, blobs[1].x), hi = std::max(blobs[0].x, blobs[1].x);
  EXPECT_NEAR(lo, 44, 1.0);
  EXPECT_NEAR(hi, 84, 1.0);
}

TEST(Detect, BlankImageHasNoBlobs) {
  EXPECT_TRUE(vtrack::detect(GrayImage::Zero(100, 100), DetectorConfig{}).empty());
  EXPECT_TRUE(vtrack::detect(GrayImage::Constant(100, 100, 0.4), DetectorConfig{}).empty());
  EXPECT_TRUE(
      vtrack::detect_blobs(vtrack::scale_space_response(GrayImage::Zero(100, 100), {}), DetectorConfig{}).empty());
}

TEST(Detect, Deterministic) {
  vtrack::Rng rng(2);
  GrayImage img = oracle::gaussian_blob(120, 90, 50, 40, 5);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] += 0.05 * rng.normal();
  const auto a = vtrack::detect(img, DetectorConfig{});
  const auto b = vtrack::detect(img, DetectorConfig{});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].y, b[i].y);
    EXPECT_EQ(a[i].sigma, b[i].sigma);
    EXPECT_EQ(a[i].response, b[i].response);
  }
}

TEST(Detect, ConfigValidation) {
  DetectorConfig cfg;
  cfg.sigma_min = 8;
  cfg.sigma_max = 4;
  EXPECT_THROW(cfg.validate(), vtrack::ContractViolation);
  cfg = {};
  cfg.response_threshold = 0;
  EXPECT_THROW(cfg.validate(), vtrack::ContractViolation);
}

TEST(NormalizeContrast, AffineInvariant) {
  const GrayImage img = oracle::gaussian_blob(50, 40, 20, 18, 4);
  const auto a = vtrack::normalize_contrast(img);
  const auto b = vtrack::normalize_contrast(0.2 * img + 0.1);
  EXPECT_FALSE(a.low_signal);
  EXPECT_LE((a.image - b.image).abs().maxCoeff(), 1e-12);
  EXPECT_NEAR(a.image.mean(), 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt(a.image.square().mean()), 1.0, 1e-12);
}

TEST(NormalizeContrast, ConstantImageFlagged) {
  const auto n = vtrack::normalize_contrast(GrayImage::Constant(10, 10, 0.3));
  EXPECT_TRUE(n.low_signal);
  EXPECT_EQ(n.image.abs().maxCoeff(), 0.0);
}

void expect_same_blobs(const std::vector<Blob>& a, const std::vector<Blob>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x, b[i].x) << i;
    EXPECT_EQ(a[i].y, b[i].y) << i;
    EXPECT_EQ(a[i].sigma, b[i].sigma) << i;
    EXPECT_EQ(a[i].response, b[i].response) << i;
  }
}

TEST(NormalizeContrast, QuarterGainGivesIdenticalBlobs) {
  vtrack::Rng rng(6);
  GrayImage img = oracle::gaussian_blob(100, 80, 30, 40, 4) + 0.6 * oracle::gaussian_blob(100, 80, 70, 30, 6);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] += 0.02 * rng.normal();
  expect_same_blobs(vtrack::detect(img, DetectorConfig{}), vtrack::detect(0.25 * img, DetectorConfig{}));
}

TEST(NormalizeContrast, IlluminationKeepsLocationsAndRanks) {
  vtrack::Rng rng(7);
  GrayImage img = oracle::gaussian_blob(120, 90, 30, 40, 4) + 0.6 * oracle::gaussian_blob(120, 90, 80, 50, 6);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] += 0.01 * rng.normal();
  const auto ref = vtrack::detect(img, DetectorConfig{});
  ASSERT_GE(ref.size(), 2u);
  for (double gain : {0.1, 0.3, 0.7, 1.0}) {
    for (double offset : {0.0, 0.25, 0.5}) {
      const auto got = vtrack::detect(gain * img + offset, DetectorConfig{});
      ASSERT_EQ(got.size(), ref.size()) << gain << " " << offset;
      for (std::size_t i = 0; i < ref.size(); ++i) {
        EXPECT_NEAR(got[i].x, ref[i].x, 1e-6);
        EXPECT_NEAR(got[i].y, ref[i].y, 1e-6);
      }
    }
  }
}

// Pixel (x, y) moves to (y, W-1-x) under rotate90.
std::vector<Blob> rotated(const std::vector<Blob>& blobs, int width) {
  std::vector<Blob> out;
  for (const auto& b : blobs) out.push_back({b.y, (width - 1) - b.x, b.sigma, b.response});
  return out;
}

TEST(RotationEquivariance, QuarterTurnsExact) {
  vtrack::Rng rng(12);
  GrayImage img = oracle::gaussian_blob(96, 80, 30.3, 40.6, 4) + 0.7 * oracle::gaussian_blob(96, 80, 62.8, 25.1, 6);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] += 0.03 * rng.normal();
  auto blobs = vtrack::detect(img, DetectorConfig{});
  ASSERT_FALSE(blobs.empty());
  GrayImage cur = img;
  for (int turn = 1; turn <= 4; ++turn) {
    const int width = static_cast<int>(cur.cols());
    cur = vtrack::rotate90(cur);
    blobs = rotated(blobs, width);
    expect_same_blobs(vtrack::detect(cur, DetectorConfig{}), blobs);
  }
  EXPECT_TRUE((cur == img).all());
}

TEST(RotationEquivariance, ArbitraryAnglesOfIsotropicBlob) {
  vtrack::Appearance a;
  a.blob_sigma_px = 5.0;
  const Eigen::Vector2d centre(63.3, 60.8);
  const auto ref = vtrack::detect(vtrack::render_target(128, 128, centre, a), DetectorConfig{});
  ASSERT_EQ(ref.size(), 1u);
  for (int deg = 15; deg < 360; deg += 15) {
    const double th = deg * std::numbers::pi / 180;
    // Rotate the blob centre about the image centre; the blob is isotropic.
    const Eigen::Vector2d c(63.5, 63.5);
    const Eigen::Vector2d d = centre - c;
    const Eigen::Vector2d p = c + Eigen::Vector2d(std::cos(th) * d.x() - std::sin(th) * d.y(),
                                                  std::sin(th) * d.x() + std::cos(th) * d.y());
    const auto got = vtrack::detect(vtrack::render_target(128, 128, p, a), DetectorConfig{});
    ASSERT_EQ(got.size(), 1u) << deg;
    EXPECT_LE(std::hypot(got[0].x - p.x(), got[0].y - p.y()), 1.0) << deg;
    EXPECT_NEAR(got[0].sigma / ref[0].sigma, 1.0, 0.1) << deg;
  }
}

TEST(ScaleCovariance, ResampledBlobScalesSigma) {
  const GrayImage img = oracle::gaussian_blob(128, 128, 64, 64, 6);
  const auto base = vtrack::detect(img, DetectorConfig{});
  ASSERT_EQ(base.size(), 1u);
  for (double s : {0.5, 2.0}) {
    const int n = static_cast<int>(128 * s);
    const auto got = vtrack::detect(vtrack::resize_bilinear(img, n, n), DetectorConfig{});
    ASSERT_EQ(got.size(), 1u) << s;
    EXPECT_NEAR(got[0].sigma / base[0].sigma, s, 0.15 * s) << s;
  }
}

TEST(ScaleRobustness, DiscRadii) {
  for (double r : {4.0, 8.0, 16.0, 32.0}) {
    const int size = r < 20 ? 128 : 256;
    const double c = size / 2.0;
    const auto blobs = vtrack::detect(oracle::disc(size, c, c, r), DetectorConfig{});
    ASSERT_FALSE(blobs.empty()) << r;
    EXPECT_NEAR(blobs[0].sigma, r / std::numbers::sqrt2, 0.1 * r / std::numbers::sqrt2) << r;
    EXPECT_LE(std::hypot(blobs[0].x - c, blobs[0].y - c), 1.0) << r;
  }
}

}  // namespace
