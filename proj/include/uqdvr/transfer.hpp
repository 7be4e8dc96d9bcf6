#pragma once

// Transfer functions.
//
// TF1D text format: one control point per line, `intensity r g b a`; blank
// lines and lines starting with '#' are ignored. Intensities strictly
// increase and lie in [0,1]; channels lie in [0,1].
//
// TF2D binary format: an ASCII header line `rows cols gmax\n` followed by
// rows*cols RGBA f32 little-endian values, row-major. Row r holds intensity
// r/(rows-1); column c holds gradient magnitude gmax*c/(cols-1).

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqdvr/io.hpp"

namespace uqdvr {

struct Rgba {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  double a = 0.0;

  double operator[](std::size_t c) const { return c == 0 ? r : c == 1 ? g : c == 2 ? b : a; }
  double& operator[](std::size_t c) { return c == 0 ? r : c == 1 ? g : c == 2 ? b : a; }

  Rgba& operator+=(const Rgba& o) {
    r += o.r;
    g += o.g;
    b += o.b;
    a += o.a;
    return *this;
  }
  friend Rgba operator+(Rgba x, const Rgba& y) { return x += y; }
  friend Rgba operator*(double s, const Rgba& x) { return {s * x.r, s * x.g, s * x.b, s * x.a}; }
  friend bool operator==(const Rgba&, const Rgba&) = default;
};

inline double max_channel_diff(const Rgba& x, const Rgba& y) {
  double d = 0.0;
  for (std::size_t c = 0; c < 4; ++c) d = std::max(d, std::abs(x[c] - y[c]));
  return d;
}

/// Piecewise-linear RGBA map over intensity with constant extension outside
/// the first and last control points.
class TransferFunction1D {
 public:
  struct ControlPoint {
    double intensity;
    Rgba color;
  };

  TransferFunction1D() : TransferFunction1D(std::vector<ControlPoint>{{0.0, Rgba{}}}) {}
  explicit TransferFunction1D(std::vector<ControlPoint> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("transfer function needs at least one control point");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (!(p.intensity >= 0.0 && p.intensity <= 1.0))
        throw std::invalid_argument("transfer function intensities must lie in [0,1]");
      if (i > 0 && !(p.intensity > points_[i - 1].intensity))
        throw std::invalid_argument("transfer function intensities must strictly increase");
      for (std::size_t c = 0; c < 4; ++c)
        if (!(p.color[c] >= 0.0 && p.color[c] <= 1.0))
          throw std::invalid_argument("transfer function channels must lie in [0,1]");
    }
  }

  static TransferFunction1D constant(Rgba c) { return TransferFunction1D(std::vector<ControlPoint>{{0.0, c}}); }

  const std::vector<ControlPoint>& points() const { return points_; }

  Rgba operator()(double x) const {
    if (x <= points_.front().intensity) return points_.front().color;
    if (x >= points_.back().intensity) return points_.back().color;
    const std::size_t i = segment(x);
    return lerp(i, x);
  }

  /// Exact integral of the map over [lo, hi], lo <= hi.
  Rgba integral(double lo, double hi) const {
    Rgba acc;
    if (!(hi > lo)) return acc;
    const auto& P = points_;
    // Left constant extension.
    if (lo < P.front().intensity) {
      const double e = std::min(hi, P.front().intensity);
      acc += (e - lo) * P.front().color;
      lo = e;
      if (!(hi > lo)) return acc;
    }
    // Interior segments, walked left to right without cancellation.
    if (lo < P.back().intensity) {
      std::size_t i = segment(lo);
      while (i + 1 < P.size() && lo < hi) {
        const double e = std::min(hi, P[i + 1].intensity);
        if (e > lo) acc += (0.5 * (e - lo)) * (lerp(i, lo) + lerp(i, e));
        lo = std::max(lo, e);
        ++i;
      }
    }
    if (hi > lo) acc += (hi - lo) * P.back().color;
    return acc;
  }

  /// Average of the map over [lo, hi]; the point value when lo == hi.
  Rgba average(double lo, double hi) const {
    if (!(hi > lo)) return (*this)(lo);
    return (1.0 / (hi - lo)) * integral(lo, hi);
  }

  friend bool operator==(const TransferFunction1D& x, const TransferFunction1D& y) {
    if (x.points_.size() != y.points_.size()) return false;
    for (std::size_t i = 0; i < x.points_.size(); ++i)
      if (x.points_[i].intensity != y.points_[i].intensity || !(x.points_[i].color == y.points_[i].color)) return false;
    return true;
  }

 private:
  // Index i of the segment [p_i, p_{i+1}) containing x, for x inside the range.
  std::size_t segment(double x) const {
    const auto it = std::upper_bound(points_.begin(), points_.end(), x,
                                     [](double v, const ControlPoint& p) { return v < p.intensity; });
    const auto i = static_cast<std::size_t>(it - points_.begin());
    return std::min(i == 0 ? 0 : i - 1, points_.size() - 2);
  }
  Rgba lerp(std::size_t i, double x) const {
    const auto& p0 = points_[i];
    const auto& p1 = points_[i + 1];
    const double t = std::clamp((x - p0.intensity) / (p1.intensity - p0.intensity), 0.0, 1.0);
    return (1.0 - t) * p0.color + t * p1.color;
  }

  std::vector<ControlPoint> points_;
};

/// Dense RGBA table over intensity in [0,1] x gradient magnitude in
/// [0, gmax], bilinear lookup with clamping.
class TransferFunction2D {
 public:
  TransferFunction2D(std::size_t rows, std::size_t cols, double gmax, std::vector<Rgba> cells)
      : rows_(rows), cols_(cols), gmax_(gmax), cells_(std::move(cells)) {
    if (rows_ < 2 || cols_ < 2) throw std::invalid_argument("2D transfer function needs at least 2x2 cells");
    if (!(gmax_ > 0.0) || !std::isfinite(gmax_)) throw std::invalid_argument("2D transfer function gmax must be positive");
    if (cells_.size() != rows_ * cols_) throw std::invalid_argument("2D transfer function cell count mismatch");
    for (const auto& c : cells_)
      for (std::size_t ch = 0; ch < 4; ++ch)
        if (!(c[ch] >= 0.0 && c[ch] <= 1.0)) throw std::invalid_argument("2D transfer function channels must lie in [0,1]");
  }

  static TransferFunction2D constant(Rgba c, double gmax = 1.0) {
    return TransferFunction2D(2, 2, gmax, std::vector<Rgba>(4, c));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double gmax() const { return gmax_; }
  const Rgba& cell(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }
  const std::vector<Rgba>& cells() const { return cells_; }

  Rgba operator()(double intensity, double gradient) const {
    const double u = std::clamp(intensity, 0.0, 1.0) * static_cast<double>(rows_ - 1);
    const double v = std::clamp(gradient, 0.0, gmax_) / gmax_ * static_cast<double>(cols_ - 1);
    const std::size_t r0 = std::min(static_cast<std::size_t>(u), rows_ - 2);
    const std::size_t c0 = std::min(static_cast<std::size_t>(v), cols_ - 2);
    const double fu = u - static_cast<double>(r0), fv = v - static_cast<double>(c0);
    return ((1.0 - fu) * (1.0 - fv)) * cell(r0, c0) + ((1.0 - fu) * fv) * cell(r0, c0 + 1) +
           (fu * (1.0 - fv)) * cell(r0 + 1, c0) + (fu * fv) * cell(r0 + 1, c0 + 1);
  }

  /// Per-channel minimum and maximum over the table.
  std::pair<Rgba, Rgba> channel_range() const {
    Rgba lo{1, 1, 1, 1}, hi{0, 0, 0, 0};
    for (const auto& c : cells_)
      for (std::size_t ch = 0; ch < 4; ++ch) {
        lo[ch] = std::min(lo[ch], c[ch]);
        hi[ch] = std::max(hi[ch], c[ch]);
      }
    return {lo, hi};
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  double gmax_;
  std::vector<Rgba> cells_;
};

inline TransferFunction1D load_tf1d(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transfer function '" + path.string() + "'");
  std::vector<TransferFunction1D::ControlPoint> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream is(line);
    TransferFunction1D::ControlPoint p{};
    if (!(is >> p.intensity >> p.color.r >> p.color.g >> p.color.b >> p.color.a))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected `intensity r g b a`");
    std::string rest;
    if (is >> rest) throw IoError(path.string() + ":" + std::to_string(lineno) + ": trailing text");
    pts.push_back(p);
  }
  try {
    return TransferFunction1D(std::move(pts));
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void save_tf1d(const TransferFunction1D& tf, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  out << "# intensity r g b a\n";
  for (const auto& p : tf.points())
    out << p.intensity << ' ' << p.color.r << ' ' << p.color.g << ' ' << p.color.b << ' ' << p.color.a << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline TransferFunction2D load_tf2d(const std::filesystem::path& path) {
  const auto data = detail::read_file(path);
  const auto nl = std::find(data.begin(), data.end(), '\n');
  if (nl == data.end()) throw IoError("'" + path.string() + "': missing `rows cols gmax` header");
  std::istringstream header(std::string(data.begin(), nl));
  long long rows = 0, cols = 0;
  double gmax = 0.0;
  if (!(header >> rows >> cols >> gmax) || rows < 2 || cols < 2)
    throw IoError("'" + path.string() + "': malformed `rows cols gmax` header");
  std::vector<char> payload(nl + 1, data.end());
  const auto n = static_cast<std::size_t>(rows * cols);
  if (payload.size() != n * 16) throw IoError("'" + path.string() + "': payload size does not match header");
  detail::Reader r(std::move(payload), path.string());
  std::vector<Rgba> cells(n);
  for (auto& c : cells)
    for (std::size_t ch = 0; ch < 4; ++ch) c[ch] = r.get<float>();
  try {
    return TransferFunction2D(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), gmax, std::move(cells));
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void save_tf2d(const TransferFunction2D& tf, const std::filesystem::path& path) {
  std::ostringstream header;
  header.precision(17);
  header << tf.rows() << ' ' << tf.cols() << ' ' << tf.gmax() << '\n';
  const std::string h = header.str();
  std::vector<char> buf(h.begin(), h.end());
  for (const auto& c : tf.cells())
    for (std::size_t ch = 0; ch < 4; ++ch) detail::put_le<float>(buf, static_cast<float>(c[ch]));
  detail::write_file(path, buf);
}

}  // namespace uqdvr
