#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "uqdvr/interp.hpp"
#include "uqdvr/random.hpp"
#include "uqdvr/stats.hpp"
#include "uqdvr/transfer.hpp"
#include "uqdvr/volcore.hpp"

namespace uqdvr {

// ---------------------------------------------------------------------------
// Expected color of a quantile PDF

/// Quantile-range classification: every piece contributes qval times the
/// exact average of the transfer function over the piece. Pieces are given
/// as a boundary span so sub-populations can be classified without copies.
inline Rgba expected_color_quantile_range(std::span<const double> boundaries, double qval,
                                          const TransferFunction1D& tf) {
  Rgba acc;
  for (std::size_t j = 0; j + 1 < boundaries.size(); ++j) acc += qval * tf.average(boundaries[j], boundaries[j + 1]);
  return acc;
}

inline Rgba expected_color_quantile_range(const QuantilePdf& pdf, const TransferFunction1D& tf) {
  return expected_color_quantile_range(pdf.boundaries, pdf.qval, tf);
}

/// Normalized quantile-mean weights p_j / sum_k p_k with p_j = qval / w_j.
inline std::vector<double> quantile_mean_weights(std::span<const double> boundaries, double qval) {
  std::vector<double> w(boundaries.size() - 1);
  double total = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = qval / std::max(boundaries[j + 1] - boundaries[j], kWidthFloor);
    total += w[j];
  }
  for (auto& x : w) x /= total;
  return w;
}

/// Quantile-mean classification: the transfer function is evaluated at the
/// midpoint of every piece and weighted by the piece density, normalized
/// over pieces.
inline Rgba expected_color_quantile_mean(std::span<const double> boundaries, double qval,
                                         const TransferFunction1D& tf) {
  const std::size_t q = boundaries.size() - 1;
  double total = 0.0;
  Rgba acc;
  for (std::size_t j = 0; j < q; ++j) {
    const double p = qval / std::max(boundaries[j + 1] - boundaries[j], kWidthFloor);
    total += p;
    acc += p * tf(0.5 * (boundaries[j] + boundaries[j + 1]));
  }
  return (1.0 / total) * acc;
}

inline Rgba expected_color_quantile_mean(const QuantilePdf& pdf, const TransferFunction1D& tf) {
  return expected_color_quantile_mean(pdf.boundaries, pdf.qval, tf);
}

// ---------------------------------------------------------------------------
// Expected color of parametric models

/// E[TF(X)] for X ~ N(mean, sigma^2), in closed form over the piecewise-linear
/// segments of the transfer function.
inline Rgba expected_color_gaussian(GaussianParams g, const TransferFunction1D& tf) {
  if (!(g.sigma > 0.0)) return tf(g.mean);
  const auto& P = tf.points();
  auto z = [&](double x) { return (x - g.mean) / g.sigma; };
  Rgba acc = stats::normal_cdf(z(P.front().intensity)) * P.front().color;
  for (std::size_t i = 0; i + 1 < P.size(); ++i) {
    const double x0 = P[i].intensity, x1 = P[i + 1].intensity;
    const double z0 = z(x0), z1 = z(x1);
    const double mass = stats::normal_cdf(z1) - stats::normal_cdf(z0);
    // E[(X - x0) ; x0 < X < x1]
    const double first = (g.mean - x0) * mass - g.sigma * (stats::normal_pdf(z1) - stats::normal_pdf(z0));
    const double inv = 1.0 / (x1 - x0);
    for (std::size_t c = 0; c < 4; ++c) {
      const double slope = (P[i + 1].color[c] - P[i].color[c]) * inv;
      acc[c] += P[i].color[c] * mass + slope * first;
    }
  }
  acc += (1.0 - stats::normal_cdf(z(P.back().intensity))) * P.back().color;
  return acc;
}

/// Mixture expectation: each component integrated independently, mixed by weight.
inline Rgba expected_color_gmm(std::span<const GmmComponent> comps, const TransferFunction1D& tf) {
  Rgba acc;
  for (const auto& c : comps) acc += c.weight * expected_color_gaussian({c.mean, c.sigma}, tf);
  return acc;
}

inline Rgba expected_color_gmm(const GmmModel& gmm, const TransferFunction1D& tf) {
  return expected_color_gmm(gmm.components, tf);
}

/// Lattice dot product of a numeric density with transfer-function samples
/// at cell centers.
inline Rgba expected_color_numeric(const NumericDensity& d, const TransferFunction1D& tf) {
  Rgba acc;
  double mass = 0.0;
  for (std::size_t k = 0; k < d.density.size(); ++k) {
    const double m = d.density[k] * d.step;
    if (m == 0.0) continue;
    acc += m * tf(d.center(k));
    mass += m;
  }
  return mass > 0.0 ? (1.0 / mass) * acc : acc;
}

/// Mean of transfer-function values over a sample list.
inline Rgba expected_color_samples(std::span<const double> samples, const TransferFunction1D& tf) {
  Rgba acc;
  for (double x : samples) acc += tf(x);
  return (1.0 / static_cast<double>(samples.size())) * acc;
}

// ---------------------------------------------------------------------------
// Uncertain gradients and 2D transfer functions

/// Linear weights of the voxels around a sample: w gives the interpolated
/// value, axis_weights the central-difference gradient blended trilinearly,
/// u the derivative along the mean gradient direction.
struct GradientStencil {
  std::vector<std::size_t> neighbors;
  std::vector<double> w;
  std::vector<std::array<double, 3>> axis_weights;
  std::vector<double> u;
  Vec3 mean_gradient;
  bool degenerate = false;

  std::size_t size() const { return neighbors.size(); }
};

class StencilError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Builds the stencil for a sample in cell `coords`. Every central-difference
/// neighbor must exist, so the cell must sit one voxel away from the border.
inline GradientStencil gradient_stencil(const GridGeometry& g, const TrilinearCoords& coords, const ScalarGrid& mean) {
  if (!(mean.geometry().dims == g.dims)) throw std::invalid_argument("mean grid does not match the volume dims");
  for (std::size_t a = 0; a < 3; ++a)
    if (coords.base[a] < 1 || coords.base[a] + 2 >= g.dims[a])
      throw StencilError("gradient stencil needs one voxel of margin around the cell");
  GradientStencil s;
  s.neighbors.reserve(32);
  auto slot = [&](std::size_t idx) -> std::size_t {
    for (std::size_t n = 0; n < s.neighbors.size(); ++n)
      if (s.neighbors[n] == idx) return n;
    s.neighbors.push_back(idx);
    s.w.push_back(0.0);
    s.axis_weights.push_back({0.0, 0.0, 0.0});
    return s.neighbors.size() - 1;
  };
  const auto cw = trilinear_weights(coords.alpha, coords.beta, coords.gamma);
  for (unsigned c = 0; c < 8; ++c) s.w[slot(coords.corner(g.dims, c))] += cw[c];
  for (unsigned c = 0; c < 8; ++c) {
    const std::array<std::size_t, 3> p{coords.base[0] + (c & 1u), coords.base[1] + ((c >> 1) & 1u),
                                       coords.base[2] + ((c >> 2) & 1u)};
    for (std::size_t a = 0; a < 3; ++a) {
      auto lo = p, hi = p;
      lo[a] -= 1;
      hi[a] += 1;
      const double k = cw[c] / (2.0 * g.spacing[a]);
      s.axis_weights[slot(g.dims.index(hi[0], hi[1], hi[2]))][a] += k;
      s.axis_weights[slot(g.dims.index(lo[0], lo[1], lo[2]))][a] -= k;
    }
  }
  double scale = 0.0;  // rounding noise level of the difference sums
  for (std::size_t n = 0; n < s.size(); ++n) {
    const double v = mean[s.neighbors[n]];
    s.mean_gradient.x += s.axis_weights[n][0] * v;
    s.mean_gradient.y += s.axis_weights[n][1] * v;
    s.mean_gradient.z += s.axis_weights[n][2] * v;
    scale += (std::abs(s.axis_weights[n][0]) + std::abs(s.axis_weights[n][1]) + std::abs(s.axis_weights[n][2])) * std::abs(v);
  }
  const double len = norm(s.mean_gradient);
  s.u.assign(s.size(), 0.0);
  if (!(len > 1e-12 * scale) || !std::isfinite(len)) {
    s.mean_gradient = {};
    s.degenerate = true;
    return s;
  }
  const Vec3 dir = (1.0 / len) * s.mean_gradient;
  for (std::size_t n = 0; n < s.size(); ++n)
    s.u[n] = dir.x * s.axis_weights[n][0] + dir.y * s.axis_weights[n][1] + dir.z * s.axis_weights[n][2];
  return s;
}

namespace detail {

/// Weyl (Kronecker) sequence with generalized golden-ratio generators,
/// randomized by a seeded Cranley-Patterson rotation.
class LowDiscrepancy {
 public:
  LowDiscrepancy(std::size_t dims, std::uint64_t seed) : gen_(dims), shift_(dims) {
    double phi = 2.0;
    for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(dims + 1));
    Rng rng(seed);
    double p = 1.0;
    for (std::size_t d = 0; d < dims; ++d) {
      p /= phi;
      gen_[d] = p;
      shift_[d] = rng.uniform();
    }
  }
  double coordinate(std::size_t index, std::size_t d) const {
    const double v = shift_[d] + static_cast<double>(index + 1) * gen_[d];
    return v - std::floor(v);
  }

 private:
  std::vector<double> gen_;
  std::vector<double> shift_;
};

/// E[TF2(Z)] for Z = (sum_i a_i V_i, sum_i b_i V_i), V_i independent
/// uniforms, by n low-discrepancy points. The second coordinate is clamped
/// into the table domain by the lookup.
inline Rgba integrate_joint_uniform(std::span<const UniformParams> vars, std::span<const double> a,
                                    std::span<const double> b, const TransferFunction2D& tf, std::size_t n,
                                    std::uint64_t seed) {
  double x0 = 0.0, y0 = 0.0;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const double lo = vars[i].center - 0.5 * vars[i].width;
    x0 += a[i] * lo;
    y0 += b[i] * lo;
    if (vars[i].width > 0.0 && (a[i] != 0.0 || b[i] != 0.0)) {
      active.push_back(i);
    } else {
      x0 += a[i] * 0.5 * vars[i].width;
      y0 += b[i] * 0.5 * vars[i].width;
    }
  }
  if (active.empty()) {
    double x = 0.0, y = 0.0;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      x += a[i] * vars[i].center;
      y += b[i] * vars[i].center;
    }
    return tf(x, y);
  }
  if (n == 0) throw std::invalid_argument("joint integration needs at least one point");
  LowDiscrepancy seq(active.size(), seed);
  Rgba acc;
  for (std::size_t k = 0; k < n; ++k) {
    double x = x0, y = y0;
    for (std::size_t d = 0; d < active.size(); ++d) {
      const std::size_t i = active[d];
      const double t = seq.coordinate(k, d) * vars[i].width;
      x += a[i] * t;
      y += b[i] * t;
    }
    acc += tf(x, y);
  }
  return (1.0 / static_cast<double>(n)) * acc;
}

}  // namespace detail

/// Expected 2D transfer-function color for intensity X = sum w_i X_i and
/// gradient magnitude approximated by the directional derivative
/// sum u_i X_i, with uniform X_i aligned to the stencil neighbors.
inline Rgba expected_color_2d(std::span<const UniformParams> neighbor_models, const GradientStencil& stencil,
                              const TransferFunction2D& tf, std::size_t n, std::uint64_t seed) {
  if (stencil.degenerate) throw StencilError("expected_color_2d needs a non-degenerate gradient stencil");
  if (neighbor_models.size() != stencil.size()) throw std::invalid_argument("one uniform model per stencil neighbor");
  return detail::integrate_joint_uniform(neighbor_models, stencil.w, stencil.u, tf, n, seed);
}

/// Fallback for a degenerate mean gradient: classify with the zero-gradient
/// row of the table.
inline Rgba expected_color_2d_zero_gradient(std::span<const UniformParams> neighbor_models,
                                            std::span<const double> weights, const TransferFunction2D& tf,
                                            std::size_t n, std::uint64_t seed) {
  const std::vector<double> zeros(weights.size(), 0.0);
  return detail::integrate_joint_uniform(neighbor_models, weights, zeros, tf, n, seed);
}

}  // namespace uqdvr
