#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "uqdvr/classify.hpp"
#include "uqdvr/image.hpp"
#include "uqdvr/interp.hpp"
#include "uqdvr/parallel.hpp"
#include "uqdvr/random.hpp"
#include "uqdvr/volcore.hpp"

namespace uqdvr {

struct Camera {
  Vec3 eye{0.0, 0.0, 1.0};
  Vec3 at{0.0, 0.0, 0.0};
  Vec3 up{0.0, 1.0, 0.0};
  double fov_deg = 30.0;
  std::size_t width = 256;
  std::size_t height = 256;

  void validate() const {
    if (eye == at) throw std::invalid_argument("camera eye and look-at must differ");
    const Vec3 fwd = at - eye;
    if (norm(cross(fwd, up)) <= 1e-12 * norm(fwd) * norm(up)) throw std::invalid_argument("camera up is parallel to the view direction");
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw std::invalid_argument("camera fov must lie in (0, 180) degrees");
    if (width == 0 || height == 0) throw std::invalid_argument("image size must be positive");
  }

  /// Unit direction of the ray through the center of pixel (x, y).
  Vec3 ray_direction(std::size_t x, std::size_t y) const {
    const Vec3 fwd = normalized(at - eye);
    const Vec3 right = normalized(cross(fwd, up));
    const Vec3 true_up = cross(right, fwd);
    const double tan_half = std::tan(0.5 * fov_deg * std::numbers::pi / 180.0);
    const double aspect = static_cast<double>(width) / static_cast<double>(height);
    const double sx = (2.0 * (static_cast<double>(x) + 0.5) / static_cast<double>(width) - 1.0) * tan_half * aspect;
    const double sy = (1.0 - 2.0 * (static_cast<double>(y) + 0.5) / static_cast<double>(height)) * tan_half;
    return normalized(fwd + sx * right + sy * true_up);
  }

  /// Looks at the box center from direction `view` (pointing from the box
  /// toward the eye), far enough that the bounding sphere fills the view.
  static Camera framing(Vec3 lo, Vec3 hi, std::size_t width, std::size_t height, Vec3 view = {1.0, 0.8, 1.3},
                        double fov_deg = 30.0) {
    Camera c;
    c.at = 0.5 * (lo + hi);
    const double radius = 0.5 * norm(hi - lo);
    const double dist = radius / std::sin(0.5 * fov_deg * std::numbers::pi / 180.0);
    c.eye = c.at + dist * normalized(view);
    c.up = {0.0, 1.0, 0.0};
    c.fov_deg = fov_deg;
    c.width = width;
    c.height = height;
    return c;
  }
};

enum class Scheme { Mean, Uniform, Gaussian, GmmOrdered, GmmMc, QuantileRange, QuantileMean, Tf2d };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Mean: return "mean";
    case Scheme::Uniform: return "uniform";
    case Scheme::Gaussian: return "gaussian";
    case Scheme::GmmOrdered: return "gmm-ordered";
    case Scheme::GmmMc: return "gmm-mc";
    case Scheme::QuantileRange: return "quantile-range";
    case Scheme::QuantileMean: return "quantile-mean";
    case Scheme::Tf2d: return "tf2d";
  }
  return "unknown";
}

inline Scheme parse_scheme(std::string_view name) {
  for (auto s : {Scheme::Mean, Scheme::Uniform, Scheme::Gaussian, Scheme::GmmOrdered, Scheme::GmmMc,
                 Scheme::QuantileRange, Scheme::QuantileMean, Scheme::Tf2d})
    if (to_string(s) == name) return s;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

/// Model kind a scheme classifies.
inline ModelKind required_model(Scheme s) {
  switch (s) {
    case Scheme::Mean: return ModelKind::MeanField;
    case Scheme::Uniform:
    case Scheme::Tf2d: return ModelKind::Uniform;
    case Scheme::Gaussian: return ModelKind::Gaussian;
    case Scheme::GmmOrdered:
    case Scheme::GmmMc: return ModelKind::Gmm;
    case Scheme::QuantileRange:
    case Scheme::QuantileMean: return ModelKind::Quantile;
  }
  return ModelKind::MeanField;
}

struct RenderJob {
  Camera camera;
  Scheme scheme = Scheme::Mean;
  TransferFunction1D tf;
  std::optional<TransferFunction2D> tf2d;
  double step = 0.5;                 // fraction of the smallest voxel spacing
  double reference_length = 0.0;     // opacity-correction length; 0 selects the smallest voxel spacing
  double termination = 0.99;
  Rgba background{0.0, 0.0, 0.0, 1.0};
  std::uint64_t seed = 0;
  std::size_t uniform_lattice = 128;
  std::size_t mc_samples = 64;
  std::size_t tf2d_samples = 256;
  /// Restricts quantile-range classification to pieces [first, last), each
  /// sub-population renormalized to unit mass. Empty means all pieces.
  std::optional<std::pair<std::size_t, std::size_t>> piece_range;
  unsigned threads = 0;

  void validate() const {
    camera.validate();
    if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("render step must be positive");
    if (!(termination > 0.0 && termination <= 1.0)) throw std::invalid_argument("termination opacity must lie in (0,1]");
    if (reference_length < 0.0) throw std::invalid_argument("reference length must be >= 0");
    if (scheme == Scheme::Tf2d && !tf2d) throw std::invalid_argument("scheme tf2d needs a 2D transfer function");
  }
};

/// Intersection of a ray with an axis-aligned box: [t_enter, t_exit] or nullopt.
inline std::optional<std::pair<double, double>> intersect_box(Vec3 origin, Vec3 dir, Vec3 lo, Vec3 hi) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - origin[a]) / dir[a];
    double tb = (hi[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return std::nullopt;
  return std::make_pair(t0, t1);
}

/// Front-to-back "over" accumulation in premultiplied form.
struct Compositor {
  Rgba acc;  // premultiplied color, accumulated opacity in .a

  void add(const Rgba& c, double alpha) {
    const double k = (1.0 - acc.a) * alpha;
    acc.r += k * c.r;
    acc.g += k * c.g;
    acc.b += k * c.b;
    acc.a += k;
  }
  Rgba over(const Rgba& bg) const {
    const double k = (1.0 - acc.a) * bg.a;
    return {acc.r + k * bg.r, acc.g + k * bg.g, acc.b + k * bg.b, acc.a + k};
  }
};

inline double corrected_opacity(double alpha, double exponent) {
  alpha = std::clamp(alpha, 0.0, 1.0);
  if (alpha >= 1.0) return 1.0;
  return 1.0 - std::pow(1.0 - alpha, exponent);
}

namespace detail {

/// Marches every pixel's ray through the geometry's bounding box and
/// composites classify(coords, sample_seed). Samples sit at
/// t_enter + k * step_length.
template <class Classify>
Image march(const GridGeometry& geometry, const RenderJob& job, Classify&& classify) {
  job.validate();
  const Camera& cam = job.camera;
  Image img(cam.width, cam.height);
  const double dt = job.step * geometry.min_spacing();
  const double ref = job.reference_length > 0.0 ? job.reference_length : geometry.min_spacing();
  const double exponent = dt / ref;
  const Vec3 lo = geometry.box_min(), hi = geometry.box_max();
  parallel_for(cam.height, job.threads, [&](std::size_t row_begin, std::size_t row_end) {
    for (std::size_t y = row_begin; y < row_end; ++y) {
      for (std::size_t x = 0; x < cam.width; ++x) {
        const std::size_t pixel = y * cam.width + x;
        const Vec3 dir = cam.ray_direction(x, y);
        Compositor comp;
        if (const auto hit = intersect_box(cam.eye, dir, lo, hi)) {
          const auto [t0, t1] = *hit;
          for (std::size_t k = 0;; ++k) {
            const double t = t0 + static_cast<double>(k) * dt;
            if (t > t1) break;
            const auto coords = locate(geometry, cam.eye + t * dir);
            if (!coords) continue;
            const Rgba c = classify(*coords, derive_seed(job.seed, pixel, k));
            if (c.a <= 0.0) continue;
            comp.add(c, corrected_opacity(c.a, exponent));
            if (comp.acc.a >= job.termination) break;
          }
        }
        img[pixel] = comp.over(job.background);
      }
    }
  });
  return img;
}

inline std::array<std::size_t, 8> corners_of(const Dims& d, const TrilinearCoords& tc) {
  std::array<std::size_t, 8> idx{};
  for (unsigned c = 0; c < 8; ++c) idx[c] = tc.corner(d, c);
  return idx;
}

}  // namespace detail

/// Renders a distribution volume with the job's classification scheme.
inline Image raycast(const DistributionVolume& volume, const RenderJob& job) {
  job.validate();
  if (volume.kind() != required_model(job.scheme))
    throw std::invalid_argument("scheme '" + std::string(to_string(job.scheme)) + "' needs a '" +
                                std::string(to_string(required_model(job.scheme))) + "' volume, got '" +
                                std::string(to_string(volume.kind())) + "'");
  const GridGeometry& g = volume.geometry();
  const Dims& d = g.dims;
  const TransferFunction1D& tf = job.tf;

  switch (job.scheme) {
    case Scheme::Mean: {
      const auto& m = volume.as<MeanFieldModel>().mean;
      return detail::march(g, job, [&](const TrilinearCoords& tc, std::uint64_t) {
        const auto idx = detail::corners_of(d, tc);
        const auto w = trilinear_weights(tc.alpha, tc.beta, tc.gamma);
        double v = 0.0;
        for (unsigned c = 0; c < 8; ++c) v += w[c] * m[idx[c]];
        return tf(v);
      });
    }
    case Scheme::Uniform: {
      const auto& m = volume.as<UniformModel>().voxels;
      return detail::march(g, job, [&](const TrilinearCoords& tc, std::uint64_t) {
        const auto idx = detail::corners_of(d, tc);
        const auto w = trilinear_weights(tc.alpha, tc.beta, tc.gamma);
        std::array<UniformParams, 8> corners;
        for (unsigned c = 0; c < 8; ++c) corners[c] = m[idx[c]];
        return expected_color_numeric(interp_uniform(corners, w, job.uniform_lattice), tf);
      });
    }
    case Scheme::Gaussian: {
      const auto& m = volume.as<GaussianModel>().voxels;
      return detail::march(g, job, [&](const TrilinearCoords& tc, std::uint64_t) {
        const auto idx = detail::corners_of(d, tc);
        const auto w = trilinear_weights(tc.alpha, tc.beta, tc.gamma);
        std::array<GaussianParams, 8> corners;
        for (unsigned c = 0; c < 8; ++c) corners[c] = m[idx[c]];
        return expected_color_gaussian(interp_gaussian(corners, w), tf);
      });
    }
    case Scheme::GmmOrdered:
    case Scheme::GmmMc: {
      const bool ordered = job.scheme == Scheme::GmmOrdered;
      return detail::march(g, job, [&](const TrilinearCoords& tc, std::uint64_t seed) {
        const auto idx = detail::corners_of(d, tc);
        const auto w = trilinear_weights(tc.alpha, tc.beta, tc.gamma);
        std::array<std::span<const GmmComponent>, 8> corners;
        for (unsigned c = 0; c < 8; ++c) corners[c] = volume.gmm_components(idx[c]);
        if (ordered) return expected_color_gmm(interp_gmm_ordered(corners, w), tf);
        return expected_color_samples(sample_gmm_mc(corners, w, job.mc_samples, seed), tf);
      });
    }
    case Scheme::QuantileRange:
    case Scheme::QuantileMean: {
      const auto& qm = volume.as<QuantileModel>();
      std::size_t first = 0, last = qm.q;
      if (job.piece_range) {
        std::tie(first, last) = *job.piece_range;
        if (!(first < last && last <= qm.q)) throw std::invalid_argument("piece range outside the quantile model");
      }
      const double sub_qval = 1.0 / static_cast<double>(last - first);
      const bool range = job.scheme == Scheme::QuantileRange;
      return detail::march(g, job, [&, first, last, sub_qval, range](const TrilinearCoords& tc, std::uint64_t) {
        const auto idx = detail::corners_of(d, tc);
        std::array<std::span<const double>, 8> corners;
        for (unsigned c = 0; c < 8; ++c) corners[c] = volume.quantile_boundaries(idx[c]).subspan(first, last - first + 1);
        thread_local std::vector<double> blended;
        blended.resize(last - first + 1);
        blend_boundaries(corners, tc.alpha, tc.beta, tc.gamma, blended);
        return range ? expected_color_quantile_range(blended, sub_qval, tf)
                     : expected_color_quantile_mean(blended, sub_qval, tf);
      });
    }
    case Scheme::Tf2d: {
      const auto& m = volume.as<UniformModel>().voxels;
      const ScalarGrid mean = volume.mean_grid();
      const TransferFunction2D& tf2 = *job.tf2d;
      return detail::march(g, job, [&](const TrilinearCoords& tc, std::uint64_t seed) {
        bool interior = true;
        for (std::size_t a = 0; a < 3; ++a) interior = interior && tc.base[a] >= 1 && tc.base[a] + 2 < d[a];
        if (interior) {
          const auto st = gradient_stencil(g, tc, mean);
          std::vector<UniformParams> models(st.size());
          for (std::size_t n = 0; n < st.size(); ++n) models[n] = m[st.neighbors[n]];
          if (!st.degenerate) return expected_color_2d(models, st, tf2, job.tf2d_samples, seed);
          return expected_color_2d_zero_gradient(models, st.w, tf2, job.tf2d_samples, seed);
        }
        const auto idx = detail::corners_of(d, tc);
        const auto w = trilinear_weights(tc.alpha, tc.beta, tc.gamma);
        std::array<UniformParams, 8> models;
        for (unsigned c = 0; c < 8; ++c) models[c] = m[idx[c]];
        return expected_color_2d_zero_gradient(models, w, tf2, job.tf2d_samples, seed);
      });
    }
  }
  throw std::logic_error("unreachable scheme");
}

/// Lower-quartile, middle-50% and upper-quartile views of a quantile volume,
/// each classified with the quantile-range scheme over its own pieces.
inline std::array<Image, 3> render_quartile_views(const DistributionVolume& volume, const RenderJob& base) {
  const auto& qm = volume.as<QuantileModel>();
  if (qm.q % 4 != 0) throw std::invalid_argument("quartile views need q divisible by 4, got q=" + std::to_string(qm.q));
  const std::size_t quarter = qm.q / 4;
  const std::array<std::pair<std::size_t, std::size_t>, 3> ranges{
      {{0, quarter}, {quarter, 3 * quarter}, {3 * quarter, qm.q}}};
  std::array<Image, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    RenderJob job = base;
    job.scheme = Scheme::QuantileRange;
    job.piece_range = ranges[i];
    out[i] = raycast(volume, job);
  }
  return out;
}

/// Renders a bivariate field through a 2D transfer function whose axes are
/// (first field, second field). Mean-field volumes are looked up directly;
/// uniform volumes are integrated jointly with the tensor-product model.
inline Image raycast_bivariate(const DistributionVolume& first, const DistributionVolume& second, const TransferFunction2D& tf2,
                               const RenderJob& job) {
  if (!(first.geometry() == second.geometry())) throw std::invalid_argument("bivariate volumes must share geometry");
  if (first.kind() != second.kind()) throw std::invalid_argument("bivariate volumes must share a model kind");
  const GridGeometry& g = first.geometry();
  const Dims& d = g.dims;
  if (first.kind() == ModelKind::MeanField) {
    const auto& a = first.as<MeanFieldModel>().mean;
    const auto& b = second.as<MeanFieldModel>().mean;
    return detail::march(g, job, [&](const TrilinearCoords& tc, std::uint64_t) {
      const auto idx = detail::corners_of(d, tc);
      const auto w = trilinear_weights(tc.alpha, tc.beta, tc.gamma);
      double x = 0.0, y = 0.0;
      for (unsigned c = 0; c < 8; ++c) {
        x += w[c] * a[idx[c]];
        y += w[c] * b[idx[c]];
      }
      return tf2(x, y);
    });
  }
  const auto& a = first.as<UniformModel>().voxels;
  const auto& b = second.as<UniformModel>().voxels;
  return detail::march(g, job, [&](const TrilinearCoords& tc, std::uint64_t seed) {
    const auto idx = detail::corners_of(d, tc);
    const auto w = trilinear_weights(tc.alpha, tc.beta, tc.gamma);
    std::array<UniformParams, 16> vars;
    std::array<double, 16> wa{}, wb{};
    for (unsigned c = 0; c < 8; ++c) {
      vars[c] = a[idx[c]];
      vars[8 + c] = b[idx[c]];
      wa[c] = w[c];
      wb[8 + c] = w[c];
    }
    return detail::integrate_joint_uniform(vars, wa, wb, tf2, job.tf2d_samples, seed);
  });
}

}  // namespace uqdvr
