#include "vtrack/log_detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "vtrack/errors.hpp"

namespace vtrack {

namespace {

using RowVector = Eigen::Array<double, 1, Eigen::Dynamic>;

Eigen::Index reflect101(Eigen::Index i, Eigen::Index n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

// One-sided half of a symmetric 1-D kernel: half(0) is the centre tap.
// Each output is half(0)*c + sum_{i=1..r} half(i)*(p(+i) + p(-i)) with i
// ascending; pairing the mirrored samples first makes the result invariant to
// the filtering direction.
GrayImage filter_x(const GrayImage& in, const Eigen::VectorXd& half) {
  const Eigen::Index h = in.rows(), w = in.cols();
  const auto r = half.size() - 1;
  GrayImage out(h, w);
  RowVector padded(w + 2 * r);
  RowVector acc(w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index j = -r; j < w + r; ++j) padded(j + r) = in(y, reflect101(j, w));
    acc = half(0) * padded.segment(r, w);
    for (Eigen::Index i = 1; i <= r; ++i) acc += half(i) * (padded.segment(r + i, w) + padded.segment(r - i, w));
    out.row(y) = acc;
  }
  return out;
}

GrayImage filter_y(const GrayImage& in, const Eigen::VectorXd& half) {
  const Eigen::Index h = in.rows(), w = in.cols();
  const auto r = half.size() - 1;
  GrayImage out(h, w);
  RowVector acc(w);
  for (Eigen::Index y = 0; y < h; ++y) {
    acc = half(0) * in.row(y);
    for (Eigen::Index i = 1; i <= r; ++i) {
      acc += half(i) * (in.row(reflect101(y + i, h)) + in.row(reflect101(y - i, h)));
    }
    out.row(y) = acc;
  }
  return out;
}

Eigen::VectorXd half_of(const Eigen::VectorXd& full, int radius) { return full.tail(radius + 1); }

// Sum over the (2r+1)² reflect-101 window around every pixel. Pixels are
// quantized to int64 fixed point with a scale chosen so no partial sum can
// overflow; integer sums are exact, so the result does not depend on the
// summation order and is exactly transpose invariant.
GrayImage window_sum(const GrayImage& in, Eigen::Index r) {
  const Eigen::Index h = in.rows(), w = in.cols();
  const double peak = in.abs().maxCoeff();
  if (!(peak > 0)) return GrayImage::Zero(h, w);
  const double cells = static_cast<double>((2 * r + 1) * (2 * r + 1));
  const int shift = std::clamp(60 - static_cast<int>(std::ceil(std::log2(peak * cells))), -1000, 52);
  using Fixed = Eigen::Array<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Fixed q(h, w);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = std::llround(std::ldexp(in.data()[i], shift));

  Fixed rows(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    std::int64_t sum = 0;
    for (Eigen::Index j = -r; j <= r; ++j) sum += q(y, reflect101(j, w));
    for (Eigen::Index x = 0; x < w; ++x) {
      rows(y, x) = sum;
      if (x + 1 < w) sum += q(y, reflect101(x + 1 + r, w)) - q(y, reflect101(x - r, w));
    }
  }
  Fixed acc = Fixed::Zero(1, w);
  for (Eigen::Index j = -r; j <= r; ++j) acc += rows.row(reflect101(j, h));
  GrayImage out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) out(y, x) = std::ldexp(static_cast<double>(acc(0, x)), -shift);
    if (y + 1 < h) acc += rows.row(reflect101(y + 1 + r, h)) - rows.row(reflect101(y - r, h));
  }
  return out;
}

}  // namespace

LoGKernel make_log_kernel(double sigma) {
  require(sigma > 0 && std::isfinite(sigma), "LoG sigma must be > 0");
  LoGKernel k;
  k.sigma = sigma;
  k.radius = static_cast<int>(std::ceil(4.0 * sigma));
  const int size = 2 * k.radius + 1;
  const double s2 = sigma * sigma;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * s2);
  k.gaussian.resize(size);
  k.second.resize(size);
  for (int i = -k.radius; i <= k.radius; ++i) {
    const double x2 = static_cast<double>(i) * i;
    const double g = norm * std::exp(-x2 / (2.0 * s2));
    k.gaussian(i + k.radius) = g;
    k.second(i + k.radius) = (x2 - s2) / (s2 * s2) * g;
  }
  const Eigen::MatrixXd raw = k.gaussian * k.second.transpose() + k.second * k.gaussian.transpose();
  k.offset = raw.mean();
  k.taps = raw.array() - k.offset;
  return k;
}

GrayImage convolve(const GrayImage& image, const LoGKernel& kernel) {
  require(image.size() > 0, "cannot filter an empty image");
  require(kernel.radius < std::min(image.rows(), image.cols()), "LoG kernel radius must be smaller than the image");
  const Eigen::VectorXd g = half_of(kernel.gaussian, kernel.radius);
  const Eigen::VectorXd s = half_of(kernel.second, kernel.radius);

  // d²/dx² as s along x then g along y, d²/dy² as s along y then g along x.
  // filter_x and filter_y run the same per-pixel sequence of operations, so
  // under a transpose the two terms swap exactly and their sum is unchanged.
  const GrayImage dxx = filter_y(filter_x(image, s), g);
  const GrayImage dyy = filter_x(filter_y(image, s), g);
  const GrayImage laplacian = dxx + dyy;

  return laplacian - kernel.offset * window_sum(image, kernel.radius);
}

void DetectorConfig::validate() const {
  require(sigma_min > 0 && sigma_min < sigma_max, "detector needs 0 < sigma_min < sigma_max");
  require(levels_per_octave >= 1, "detector levels_per_octave must be >= 1");
  require(response_threshold > 0 && response_threshold <= 1, "detector response_threshold must be in (0, 1]");
  require(absolute_floor >= 0, "detector absolute_floor must be >= 0");
  require(max_blobs >= 1, "detector max_blobs must be >= 1");
}

int DetectorConfig::level_count() const {
  const double span = levels_per_octave * std::log2(sigma_max / sigma_min);
  return static_cast<int>(std::ceil(span - 1e-9)) + 1;
}

double DetectorConfig::level_sigma(int level) const {
  return sigma_min * std::exp2(static_cast<double>(level) / levels_per_octave);
}

ScaleSpaceStack scale_space_response(const GrayImage& image, const DetectorConfig& cfg) {
  cfg.validate();
  ScaleSpaceStack stack;
  const int n = cfg.level_count();
  stack.levels.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double sigma = cfg.level_sigma(k);
    const auto kernel = make_log_kernel(sigma);
    // Levels whose kernel does not fit the image are left out; the stack
    // stays a prefix of the configured progression.
    if (kernel.radius >= std::min(image.rows(), image.cols())) break;
    stack.levels.push_back({sigma, convolve(image, kernel) * (sigma * sigma)});
  }
  require(!stack.levels.empty(), "image is smaller than the smallest LoG kernel");
  return stack;
}

namespace {

// Vertex of the parabola through (-1, lo), (0, mid), (1, hi), clamped to
// half a sample. Zero when the samples are not concave.
// Offsets are snapped to a 2^-20 px grid so that integer + offset and
// (W - 1) - position are exact; quarter-turn equivariance then holds bitwise.
double parabola_offset(double lo, double mid, double hi) {
  const double curvature = (lo + hi) - 2.0 * mid;
  if (!(curvature < 0)) return 0.0;
  const double offset = std::clamp((lo - hi) / (2.0 * curvature), -0.5, 0.5);
  return std::ldexp(std::round(std::ldexp(offset, 20)), -20);
}

// Sum of all pixels in 128-bit fixed point. The result does not depend on
// the traversal order, so rotated or transposed images give identical sums.
double exact_sum(const GrayImage& in) {
  const double peak = in.abs().maxCoeff();
  if (!(peak > 0)) return 0.0;
  const int shift = 120 - static_cast<int>(std::ceil(std::log2(peak * static_cast<double>(in.size()))));
  __int128 acc = 0;
  for (Eigen::Index i = 0; i < in.size(); ++i) {
    const double scaled = std::ldexp(in.data()[i], shift);
    const double hi = std::ldexp(std::trunc(std::ldexp(scaled, -60)), 60);
    acc += static_cast<__int128>(static_cast<std::int64_t>(std::ldexp(hi, -60))) << 60;
    acc += static_cast<std::int64_t>(std::llround(scaled - hi));
  }
  return std::ldexp(static_cast<double>(acc), -shift);
}

}  // namespace

std::vector<Blob> detect_blobs(const ScaleSpaceStack& stack, const DetectorConfig& cfg) {
  cfg.validate();
  require(!stack.levels.empty(), "scale-space stack is empty");
  const auto h = stack.levels.front().response.rows();
  const auto w = stack.levels.front().response.cols();
  const auto n = static_cast<Eigen::Index>(stack.levels.size());

  std::vector<GrayImage> mag;
  mag.reserve(stack.levels.size());
  double global_max = 0;
  for (const auto& level : stack.levels) {
    require(level.response.rows() == h && level.response.cols() == w, "scale levels must share dimensions");
    mag.push_back(level.response.abs());
    global_max = std::max(global_max, mag.back().maxCoeff());
  }
  const double cutoff = std::max(cfg.response_threshold * global_max, cfg.absolute_floor);
  if (!(global_max > 0) || global_max < cfg.absolute_floor) return {};

  std::vector<Blob> candidates;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& m = mag[static_cast<std::size_t>(k)];
    for (Eigen::Index y = 0; y < h; ++y) {
      for (Eigen::Index x = 0; x < w; ++x) {
        const double v = m(y, x);
        if (v < cutoff) continue;
        bool is_max = true;
        for (Eigen::Index dk = -1; dk <= 1 && is_max; ++dk) {
          const auto kk = k + dk;
          if (kk < 0 || kk >= n) continue;
          const auto& mk = mag[static_cast<std::size_t>(kk)];
          for (Eigen::Index dy = -1; dy <= 1 && is_max; ++dy) {
            const auto yy = y + dy;
            if (yy < 0 || yy >= h) continue;
            for (Eigen::Index dx = -1; dx <= 1; ++dx) {
              const auto xx = x + dx;
              if (xx < 0 || xx >= w || (dk == 0 && dy == 0 && dx == 0)) continue;
              if (mk(yy, xx) > v) {
                is_max = false;
                break;
              }
            }
          }
        }
        if (!is_max) continue;

        const double ox = (x > 0 && x + 1 < w) ? parabola_offset(m(y, x - 1), v, m(y, x + 1)) : 0.0;
        const double oy = (y > 0 && y + 1 < h) ? parabola_offset(m(y - 1, x), v, m(y + 1, x)) : 0.0;
        const double ok = (k > 0 && k + 1 < n)
                              ? parabola_offset(mag[static_cast<std::size_t>(k - 1)](y, x), v,
                                                mag[static_cast<std::size_t>(k + 1)](y, x))
                              : 0.0;
        const double sigma = std::clamp(cfg.sigma_min * std::exp2((static_cast<double>(k) + ok) / cfg.levels_per_octave),
                                        cfg.sigma_min, cfg.sigma_max);
        candidates.push_back({static_cast<double>(x) + ox, static_cast<double>(y) + oy, sigma, v});
      }
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const Blob& a, const Blob& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.sigma < b.sigma;
  });

  std::vector<Blob> kept;
  for (const auto& c : candidates) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Blob& k) {
      const double radius = 2.0 * std::min(c.sigma, k.sigma);
      return std::hypot(c.x - k.x, c.y - k.y) < radius;
    });
    if (suppressed) continue;
    kept.push_back(c);
    if (static_cast<int>(kept.size()) >= cfg.max_blobs) break;
  }
  return kept;
}

NormalizedImage normalize_contrast(const GrayImage& image) {
  require(image.size() > 0, "cannot normalize an empty image");
  require(image.allFinite(), "image contains non-finite values");
  const auto n = static_cast<double>(image.size());
  const double mean = exact_sum(image) / n;
  const GrayImage centered = image - mean;
  const double stddev = std::sqrt(exact_sum(centered.square()) / n);
  if (!(stddev > 1e-12 * std::max(1.0, std::abs(mean)))) {
    return {GrayImage::Zero(image.rows(), image.cols()), true};
  }
  return {centered / stddev, false};
}

std::vector<Blob> detect(const GrayImage& image, const DetectorConfig& cfg, bool normalize) {
  if (!normalize) return detect_blobs(scale_space_response(image, cfg), cfg);
  const auto norm = normalize_contrast(image);
  if (norm.low_signal) return {};
  return detect_blobs(scale_space_response(norm.image, cfg), cfg);
}

}  // namespace vtrack
