#include "vtrack/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vtrack/errors.hpp"

namespace vtrack {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char ch = bytes[pos];
    if (ch == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) tok += bytes[pos++];
  return tok;
}

int parse_positive(const std::string& tok, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(std::string("PGM header: bad ") + what + " '" + tok + "'");
  }
}

}  // namespace

GrayImage decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P5") throw IoError("not a binary graymap (expected magic P5)");
  const int width = parse_positive(next_token(bytes, pos), "width");
  const int height = parse_positive(next_token(bytes, pos), "height");
  const int maxval = parse_positive(next_token(bytes, pos), "maxval");
  if (maxval > 65535) throw IoError("PGM maxval exceeds 65535");
  ++pos;  // single whitespace byte after maxval
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * bpp;
  if (bytes.size() < pos + need) throw IoError("PGM raster is truncated");

  GrayImage img(height, width);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const unsigned v = bpp == 1 ? p[i] : (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1];
    img.data()[i] = static_cast<double>(v) / maxval;
  }
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_pgm(ss.str());
}

std::string encode_pgm(const GrayImage& image, int max_value) {
  if (max_value != 255 && max_value != 65535) throw ContractViolation("PGM max_value must be 255 or 65535");
  std::string out = "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n" +
                    std::to_string(max_value) + "\n";
  out.reserve(out.size() + static_cast<std::size_t>(image.size()) * (max_value > 255 ? 2 : 1));
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image.data()[i], 0.0, 1.0);
    const auto q = static_cast<unsigned>(std::lround(v * max_value));
    if (max_value > 255) out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xff));
  }
  return out;
}

GrayImage rotate90(const GrayImage& image) {
  const auto h = image.rows(), w = image.cols();
  GrayImage out(w, h);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) out(w - 1 - x, y) = image(y, x);
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& image, int new_width, int new_height) {
  require(new_width > 0 && new_height > 0, "resize target must be non-empty");
  const double sx = static_cast<double>(new_width) / image.cols();
  const double sy = static_cast<double>(new_height) / image.rows();
  const auto clampi = [](double v, Eigen::Index hi) {
    return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(v), 0, hi);
  };
  GrayImage out(new_height, new_width);
  for (int y = 0; y < new_height; ++y) {
    const double fy = std::clamp((y + 0.5) / sy - 0.5, 0.0, static_cast<double>(image.rows() - 1));
    const Eigen::Index y0 = clampi(std::floor(fy), image.rows() - 1);
    const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, image.rows() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < new_width; ++x) {
      const double fx = std::clamp((x + 0.5) / sx - 0.5, 0.0, static_cast<double>(image.cols() - 1));
      const Eigen::Index x0 = clampi(std::floor(fx), image.cols() - 1);
      const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, image.cols() - 1);
      const double wx = fx - x0;
      out(y, x) = (1 - wy) * ((1 - wx) * image(y0, x0) + wx * image(y0, x1)) +
                  wy * ((1 - wx) * image(y1, x0) + wx * image(y1, x1));
    }
  }
  return out;
}

}  // namespace vtrack
