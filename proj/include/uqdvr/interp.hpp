#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqdvr/random.hpp"
#include "uqdvr/volcore.hpp"

namespace uqdvr {

/// Cell of a trilinear sample: base voxel and local parameters. Corner c of
/// the cell is base + (c&1, (c>>1)&1, (c>>2)&1), so alpha blends along x,
/// beta along y and gamma along z.
struct TrilinearCoords {
  std::array<std::size_t, 3> base{};
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  std::size_t corner(const Dims& d, unsigned c) const {
    return d.index(base[0] + (c & 1u), base[1] + ((c >> 1) & 1u), base[2] + ((c >> 2) & 1u));
  }
};

/// Locates the trilinear cell containing a world position, or nullopt if the
/// position is outside every full cell.
inline std::optional<TrilinearCoords> locate(const GridGeometry& g, Vec3 p) {
  TrilinearCoords tc;
  double t[3];
  for (std::size_t a = 0; a < 3; ++a) {
    if (g.dims[a] < 2) return std::nullopt;
    const double u = (p[a] - g.origin[a]) / g.spacing[a];
    const double last = static_cast<double>(g.dims[a] - 1);
    if (!(u >= 0.0 && u <= last)) return std::nullopt;
    auto b = static_cast<std::size_t>(u);
    if (b >= g.dims[a] - 1) b = g.dims[a] - 2;
    tc.base[a] = b;
    t[a] = std::clamp(u - static_cast<double>(b), 0.0, 1.0);
  }
  tc.alpha = t[0];
  tc.beta = t[1];
  tc.gamma = t[2];
  return tc;
}

/// The 8 trilinear weights in corner order.
inline std::array<double, 8> trilinear_weights(double alpha, double beta, double gamma) {
  std::array<double, 8> w{};
  for (unsigned c = 0; c < 8; ++c)
    w[c] = ((c & 1u) ? alpha : 1.0 - alpha) * ((c & 2u) ? beta : 1.0 - beta) * ((c & 4u) ? gamma : 1.0 - gamma);
  return w;
}

inline double lerp_unclamped(double a, double b, double t) { return (1.0 - t) * a + t * b; }

// ---------------------------------------------------------------------------
// Quantile interpolation

/// Rank-wise blend of two quantile PDFs: every boundary, and hence every
/// piece width, is interpolated linearly, so piece j of the result has
/// density qval / ((1-alpha) w_aj + alpha w_bj).
inline QuantilePdf quantile_interp_1d(const QuantilePdf& a, const QuantilePdf& b, double alpha) {
  if (a.boundaries.size() != b.boundaries.size() || std::abs(a.qval - b.qval) > 1e-12)
    throw std::invalid_argument("quantile interpolation needs matching qval");
  QuantilePdf out{a.qval, std::vector<double>(a.boundaries.size())};
  for (std::size_t j = 0; j < out.boundaries.size(); ++j)
    out.boundaries[j] = lerp_unclamped(a.boundaries[j], b.boundaries[j], alpha);
  return out;
}

/// Trilinear rank-wise blend of 8 boundary arrays into `out`, in three
/// passes: x edges with alpha, y faces with beta, then z with gamma.
inline void blend_boundaries(const std::array<std::span<const double>, 8>& corners, double alpha, double beta,
                             double gamma, std::span<double> out) {
  const std::size_t n = out.size();
  for (const auto& c : corners)
    if (c.size() != n) throw std::invalid_argument("quantile interpolation needs matching q at all corners");
  for (std::size_t j = 0; j < n; ++j) {
    const double e0 = lerp_unclamped(corners[0][j], corners[1][j], alpha);
    const double e1 = lerp_unclamped(corners[2][j], corners[3][j], alpha);
    const double e2 = lerp_unclamped(corners[4][j], corners[5][j], alpha);
    const double e3 = lerp_unclamped(corners[6][j], corners[7][j], alpha);
    const double f0 = lerp_unclamped(e0, e1, beta);
    const double f1 = lerp_unclamped(e2, e3, beta);
    out[j] = lerp_unclamped(f0, f1, gamma);
  }
}

inline QuantilePdf quantile_interp_3d(std::span<const QuantilePdf, 8> corners, double alpha, double beta,
                                      double gamma) {
  std::array<std::span<const double>, 8> b;
  for (unsigned c = 0; c < 8; ++c) {
    if (std::abs(corners[c].qval - corners[0].qval) > 1e-12)
      throw std::invalid_argument("quantile interpolation needs matching qval at all corners");
    b[c] = corners[c].boundaries;
  }
  QuantilePdf out{corners[0].qval, std::vector<double>(corners[0].boundaries.size())};
  blend_boundaries(b, alpha, beta, gamma, out.boundaries);
  return out;
}

/// Density of one interpolated piece from the 8 corner densities using the
/// nested rational form (product of corner densities over t1..t7).
inline double rational_piece_density(const std::array<double, 8>& pr, double alpha, double beta, double gamma) {
  const double t1 = alpha * pr[0] + (1.0 - alpha) * pr[1];
  const double t2 = alpha * pr[2] + (1.0 - alpha) * pr[3];
  const double t3 = alpha * pr[4] + (1.0 - alpha) * pr[5];
  const double t4 = alpha * pr[6] + (1.0 - alpha) * pr[7];
  const double t5 = beta * pr[0] * pr[1] / t1 + (1.0 - beta) * pr[2] * pr[3] / t2;
  const double t6 = beta * pr[4] * pr[5] / t3 + (1.0 - beta) * pr[6] * pr[7] / t4;
  const double t7 = gamma * pr[0] * pr[1] * pr[2] * pr[3] / (t1 * t2 * t5) +
                    (1.0 - gamma) * pr[4] * pr[5] * pr[6] * pr[7] / (t3 * t4 * t6);
  const double num = pr[0] * pr[1] * pr[2] * pr[3] * pr[4] * pr[5] * pr[6] * pr[7];
  return num / (t1 * t2 * t3 * t4 * t5 * t6 * t7);
}

/// Per-piece densities of the trilinearly interpolated PDF evaluated through
/// the rational form. Cross-check for quantile_interp_3d; zero-width pieces
/// use the kWidthFloor density.
inline std::vector<double> quantile_interp_3d_rational(std::span<const QuantilePdf, 8> corners, double alpha,
                                                       double beta, double gamma) {
  const std::size_t q = corners[0].pieces();
  for (const auto& c : corners)
    if (c.pieces() != q) throw std::invalid_argument("quantile interpolation needs matching q at all corners");
  std::vector<double> out(q);
  std::array<double, 8> pr{};
  for (std::size_t j = 0; j < q; ++j) {
    for (unsigned c = 0; c < 8; ++c) pr[c] = corners[c].density(j);
    out[j] = rational_piece_density(pr, alpha, beta, gamma);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle

/// Sorted realizations of X = sum_i w_i X_i, each X_i drawn independently and
/// with replacement from its corner sample set.
inline std::vector<double> mc_oracle_interp(std::span<const std::vector<double>> corner_samples,
                                            std::span<const double> weights, std::size_t n, std::uint64_t seed) {
  if (corner_samples.size() != weights.size()) throw std::invalid_argument("one weight per corner sample set");
  for (const auto& s : corner_samples)
    if (s.empty()) throw std::invalid_argument("mc oracle needs nonempty corner sample sets");
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) {
    double acc = 0.0;
    for (std::size_t i = 0; i < corner_samples.size(); ++i) {
      const auto& s = corner_samples[i];
      acc += weights[i] * s[rng.below(s.size())];
    }
    x = acc;
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Parametric interpolation

/// Linear combination of independent Gaussians.
inline GaussianParams interp_gaussian(std::span<const GaussianParams> corners, std::span<const double> weights) {
  if (corners.size() != weights.size()) throw std::invalid_argument("one weight per corner");
  double mu = 0.0, var = 0.0;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    mu += weights[i] * corners[i].mean;
    var += weights[i] * weights[i] * corners[i].sigma * corners[i].sigma;
  }
  return {mu, std::sqrt(var)};
}

/// Density sampled as cell averages on a uniform lattice.
struct NumericDensity {
  double start = 0.0;
  double step = 1.0;
  std::vector<double> density;

  double center(std::size_t k) const { return start + (static_cast<double>(k) + 0.5) * step; }
  double mass() const {
    double m = 0.0;
    for (double d : density) m += d * step;
    return m;
  }
  double mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < density.size(); ++k) m += density[k] * step * center(k);
    return m;
  }
  double cdf(double x) const {
    if (x <= start) return 0.0;
    double f = 0.0;
    for (std::size_t k = 0; k < density.size(); ++k) {
      const double lo = start + static_cast<double>(k) * step;
      if (x >= lo + step)
        f += density[k] * step;
      else {
        f += density[k] * (x - lo);
        break;
      }
    }
    return std::min(f, 1.0);
  }
};

namespace detail {

/// Convolves a cell-average density with a centered box of width s, exactly
/// for the piecewise-constant input.
inline void convolve_box(NumericDensity& d, double s, std::vector<double>& scratch_f, std::vector<double>& scratch_g) {
  const std::size_t N = d.density.size();
  const double dx = d.step;
  auto& F = scratch_f;
  auto& G = scratch_g;
  F.assign(N + 1, 0.0);
  G.assign(N + 1, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    F[i + 1] = F[i] + d.density[i] * dx;
    G[i + 1] = G[i] + F[i] * dx + 0.5 * d.density[i] * dx * dx;
  }
  const double end = d.start + static_cast<double>(N) * dx;
  auto g_at = [&](double x) {
    if (x <= d.start) return 0.0;
    if (x >= end) return G[N] + F[N] * (x - end);
    auto i = static_cast<std::size_t>((x - d.start) / dx);
    if (i >= N) i = N - 1;
    const double t = x - (d.start + static_cast<double>(i) * dx);
    return G[i] + F[i] * t + 0.5 * d.density[i] * t * t;
  };
  const double h = 0.5 * s;
  std::vector<double> out(N);
  double total = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const double L = d.start + static_cast<double>(k) * dx, R = L + dx;
    const double v = (g_at(R + h) - g_at(L + h) - g_at(R - h) + g_at(L - h)) / (s * dx);
    out[k] = std::max(v, 0.0);
    total += out[k] * dx;
  }
  if (total > 0.0)
    for (auto& v : out) v /= total;
  d.density = std::move(out);
}

}  // namespace detail

/// Density of sum_i w_i X_i for independent uniform X_i, by iterated exact
/// box convolution on a `lattice`-cell grid spanning the combined support.
/// Zero-width factors only shift the result; if every factor has zero width
/// the result is a single-cell spike at sum_i w_i c_i.
inline NumericDensity interp_uniform(std::span<const UniformParams> corners, std::span<const double> weights,
                                     std::size_t lattice = 128) {
  if (corners.size() != weights.size()) throw std::invalid_argument("one weight per corner");
  if (lattice < 1) throw std::invalid_argument("lattice must be positive");
  double mu = 0.0, support = 0.0, widest = 0.0;
  std::size_t widest_i = corners.size();
  for (std::size_t i = 0; i < corners.size(); ++i) {
    if (corners[i].width < 0.0) throw std::invalid_argument("uniform widths must be >= 0");
    mu += weights[i] * corners[i].center;
    const double s = std::abs(weights[i]) * corners[i].width;
    support += s;
    if (s > widest) {
      widest = s;
      widest_i = i;
    }
  }
  NumericDensity d;
  if (!(support > 0.0)) {
    const double spike = 1e-12 * std::max(1.0, std::abs(mu));
    d.start = mu - 0.5 * spike;
    d.step = spike;
    d.density = {1.0 / spike};
    return d;
  }
  d.start = mu - 0.5 * support;
  d.step = support / static_cast<double>(lattice);
  d.density.assign(lattice, 0.0);
  // Exact cell averages of the widest box.
  const double lo = mu - 0.5 * widest, hi = mu + 0.5 * widest;
  for (std::size_t k = 0; k < lattice; ++k) {
    const double L = d.start + static_cast<double>(k) * d.step, R = L + d.step;
    const double overlap = std::max(0.0, std::min(R, hi) - std::max(L, lo));
    d.density[k] = overlap / (widest * d.step);
  }
  std::vector<double> f, g;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    if (i == widest_i) continue;
    const double s = std::abs(weights[i]) * corners[i].width;
    if (s <= 1e-6 * d.step) continue;
    detail::convolve_box(d, s, f, g);
  }
  return d;
}

namespace detail {

inline std::vector<GmmComponent> sorted_by_mean(std::span<const GmmComponent> comps) {
  std::vector<GmmComponent> out(comps.begin(), comps.end());
  std::sort(out.begin(), out.end(), [](const GmmComponent& a, const GmmComponent& b) {
    if (a.mean != b.mean) return a.mean < b.mean;
    if (a.sigma != b.sigma) return a.sigma < b.sigma;
    return a.weight < b.weight;
  });
  return out;
}

}  // namespace detail

/// Rank-matched GMM interpolation: components are sorted by mean at every
/// corner and same-rank components are combined as independent Gaussians,
/// with weights blended linearly and renormalized.
inline GmmModel interp_gmm_ordered(std::span<const std::span<const GmmComponent>> corners,
                                   std::span<const double> weights) {
  if (corners.size() != weights.size()) throw std::invalid_argument("one weight per corner");
  if (corners.empty()) throw std::invalid_argument("gmm interpolation needs corners");
  const std::size_t k = corners[0].size();
  for (const auto& c : corners)
    if (c.size() != k) throw std::invalid_argument("gmm interpolation needs equal k at all corners");
  GmmModel out;
  out.components.assign(k, GmmComponent{});
  std::vector<double> var(k, 0.0);
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const auto sorted = detail::sorted_by_mean(corners[i]);
    for (std::size_t r = 0; r < k; ++r) {
      out.components[r].weight += weights[i] * sorted[r].weight;
      out.components[r].mean += weights[i] * sorted[r].mean;
      var[r] += weights[i] * weights[i] * sorted[r].sigma * sorted[r].sigma;
    }
  }
  double total = 0.0;
  for (const auto& c : out.components) total += c.weight;
  for (std::size_t r = 0; r < k; ++r) {
    out.components[r].weight = total > 0.0 ? out.components[r].weight / total : 1.0 / static_cast<double>(k);
    out.components[r].sigma = std::sqrt(var[r]);
  }
  return out;
}

inline GmmModel interp_gmm_ordered(std::span<const GmmModel> corners, std::span<const double> weights) {
  std::vector<std::span<const GmmComponent>> views;
  views.reserve(corners.size());
  for (const auto& g : corners) views.emplace_back(g.components);
  return interp_gmm_ordered(std::span<const std::span<const GmmComponent>>(views), weights);
}

/// Draws one component index of a GMM by weight.
inline std::size_t draw_component(std::span<const GmmComponent> comps, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t r = 0; r + 1 < comps.size(); ++r) {
    acc += comps[r].weight;
    if (u < acc) return r;
  }
  return comps.size() - 1;
}

/// Sorted realizations of sum_i w_i X_i with X_i drawn from corner GMM i.
inline std::vector<double> sample_gmm_mc(std::span<const std::span<const GmmComponent>> corners,
                                         std::span<const double> weights, std::size_t n, std::uint64_t seed) {
  if (corners.size() != weights.size()) throw std::invalid_argument("one weight per corner");
  for (const auto& c : corners)
    if (c.empty()) throw std::invalid_argument("gmm corners need components");
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) {
    double acc = 0.0;
    for (std::size_t i = 0; i < corners.size(); ++i) {
      if (weights[i] == 0.0) continue;
      const auto& c = corners[i][draw_component(corners[i], rng)];
      acc += weights[i] * (c.sigma > 0.0 ? c.mean + c.sigma * rng.normal() : c.mean);
    }
    x = acc;
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<double> sample_gmm_mc(std::span<const GmmModel> corners, std::span<const double> weights,
                                         std::size_t n, std::uint64_t seed) {
  std::vector<std::span<const GmmComponent>> views;
  views.reserve(corners.size());
  for (const auto& g : corners) views.emplace_back(g.components);
  return sample_gmm_mc(std::span<const std::span<const GmmComponent>>(views), weights, n, seed);
}

}  // namespace uqdvr
