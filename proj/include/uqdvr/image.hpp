#pragma once

// Images: RGBA f32, row-major, top-left origin.
//
// save_image writes a binary PPM (P6, 8-bit RGB, channels clamped to [0,1]).
// save_rgba32 writes the lossless sidecar: an ASCII line `width height\n`
// followed by width*height*4 little-endian f32 values.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqdvr/io.hpp"
#include "uqdvr/transfer.hpp"

namespace uqdvr {

class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, Rgba fill = {}) : width_(width), height_(height), pixels_(width * height, fill) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  Rgba& at(std::size_t x, std::size_t y) { return pixels_[y * width_ + x]; }
  const Rgba& at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
  Rgba& operator[](std::size_t i) { return pixels_[i]; }
  const Rgba& operator[](std::size_t i) const { return pixels_[i]; }
  const std::vector<Rgba>& pixels() const { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<Rgba> pixels_;
};

inline std::uint8_t to_byte(double v) {
  if (!(v > 0.0)) return 0;
  return static_cast<std::uint8_t>(std::lround(std::min(v, 1.0) * 255.0));
}

inline std::vector<char> encode_ppm(const Image& img) {
  std::ostringstream header;
  header << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  const std::string h = header.str();
  std::vector<char> buf(h.begin(), h.end());
  buf.reserve(h.size() + img.size() * 3);
  for (const auto& p : img.pixels()) {
    buf.push_back(static_cast<char>(to_byte(p.r)));
    buf.push_back(static_cast<char>(to_byte(p.g)));
    buf.push_back(static_cast<char>(to_byte(p.b)));
  }
  return buf;
}

inline void save_image(const Image& img, const std::filesystem::path& path) {
  detail::write_file(path, encode_ppm(img));
}

inline void save_rgba32(const Image& img, const std::filesystem::path& path) {
  const std::string h = std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n";
  std::vector<char> buf(h.begin(), h.end());
  for (const auto& p : img.pixels())
    for (std::size_t c = 0; c < 4; ++c) detail::put_le<float>(buf, static_cast<float>(p[c]));
  detail::write_file(path, buf);
}

inline Image load_rgba32(const std::filesystem::path& path) {
  const auto data = detail::read_file(path);
  const auto nl = std::find(data.begin(), data.end(), '\n');
  if (nl == data.end()) throw IoError("'" + path.string() + "': missing `width height` header");
  std::istringstream header(std::string(data.begin(), nl));
  long long w = 0, h = 0;
  if (!(header >> w >> h) || w <= 0 || h <= 0) throw IoError("'" + path.string() + "': malformed image header");
  std::vector<char> payload(nl + 1, data.end());
  Image img(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
  if (payload.size() != img.size() * 16) throw IoError("'" + path.string() + "': payload size does not match header");
  detail::Reader r(std::move(payload), path.string());
  for (std::size_t i = 0; i < img.size(); ++i)
    for (std::size_t c = 0; c < 4; ++c) img[i][c] = r.get<float>();
  return img;
}

/// Reads a binary PPM written by save_image (alpha is set to 1).
inline Image load_ppm(const std::filesystem::path& path) {
  const auto data = detail::read_file(path);
  std::istringstream is(std::string(data.begin(), data.end()));
  std::string magic;
  long long w = 0, h = 0, maxval = 0;
  if (!(is >> magic >> w >> h >> maxval) || magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
    throw IoError("'" + path.string() + "': not an 8-bit binary PPM");
  is.get();
  const auto offset = static_cast<std::size_t>(is.tellg());
  Image img(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
  if (data.size() != offset + img.size() * 3) throw IoError("'" + path.string() + "': pixel data size mismatch");
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) img[i][c] = static_cast<unsigned char>(data[offset + 3 * i + c]) / 255.0;
    img[i].a = 1.0;
  }
  return img;
}

/// Loads either image format, chosen by content.
inline Image load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char head[2] = {0, 0};
  in.read(head, 2);
  if (head[0] == 'P' && head[1] == '6') return load_ppm(path);
  return load_rgba32(path);
}

/// Per-pixel absolute difference of mean RGB, mapped through a
/// blue-white-yellow diverging map, and the RMSE of that difference.
struct DiffResult {
  Image image;
  double rmse = 0.0;
  double max_abs = 0.0;
};

/// `range` scales the color map; 0 selects the largest absolute difference.
/// Negative signed differences (img darker than ref) map toward blue,
/// positive toward yellow, zero to white.
inline DiffResult diff_image(const Image& img, const Image& ref, double range = 0.0) {
  if (img.width() != ref.width() || img.height() != ref.height())
    throw std::invalid_argument("diff_image needs images of equal size");
  std::vector<double> signed_diff(img.size());
  DiffResult out;
  double ss = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double a = (img[i].r + img[i].g + img[i].b) / 3.0;
    const double b = (ref[i].r + ref[i].g + ref[i].b) / 3.0;
    signed_diff[i] = a - b;
    ss += signed_diff[i] * signed_diff[i];
    out.max_abs = std::max(out.max_abs, std::abs(signed_diff[i]));
  }
  out.rmse = img.size() ? std::sqrt(ss / static_cast<double>(img.size())) : 0.0;
  const double scale = range > 0.0 ? range : (out.max_abs > 0.0 ? out.max_abs : 1.0);
  constexpr Rgba white{1.0, 1.0, 1.0, 1.0}, blue{0.1, 0.25, 0.85, 1.0}, yellow{0.95, 0.85, 0.1, 1.0};
  out.image = Image(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double t = std::clamp(signed_diff[i] / scale, -1.0, 1.0);
    const Rgba& end = t < 0.0 ? blue : yellow;
    const double s = std::abs(t);
    out.image[i] = (1.0 - s) * white + s * end;
  }
  return out;
}

}  // namespace uqdvr
