#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>

namespace vtrack {

/// Row-major grayscale image, rows = height, cols = width. Intensities are
/// nominally in [0, 1]; filter responses reuse the type with arbitrary sign.
using GrayImage = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Binary graymap ("P5"), 8- or 16-bit, scaled to [0, 1].
GrayImage read_pgm(const std::filesystem::path& path);
GrayImage decode_pgm(const std::string& bytes);

/// Encodes to "P5". Values are clamped to [0, 1]; `max_value` is 255 or 65535.
std::string encode_pgm(const GrayImage& image, int max_value = 255);

/// Quarter turn counter-clockwise as displayed (x right, y down):
/// out(W-1-x, y) = in(y, x), i.e. pixel (x, y) moves to (y, W-1-x).
GrayImage rotate90(const GrayImage& image);

/// Resamples to `new_width` x `new_height` by bilinear interpolation with
/// pixel centres aligned (x_src = (x_dst + 0.5) / scale - 0.5).
GrayImage resize_bilinear(const GrayImage& image, int new_width, int new_height);

}  // namespace vtrack
