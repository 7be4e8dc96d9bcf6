#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "uqdvr/geometry.hpp"
#include "uqdvr/stats.hpp"

namespace uqdvr {

/// Widths below this are treated as this value when converted to densities.
/// Stored boundaries may still coincide exactly.
inline constexpr double kWidthFloor = 1e-12;

/// Outermost Gaussian quantile boundaries are placed this many sigmas out.
inline constexpr double kGaussianTailSigmas = 6.0;

/// Deterministic scalar field on a regular lattice.
class ScalarGrid {
 public:
  ScalarGrid() = default;
  ScalarGrid(GridGeometry geometry, std::vector<double> values)
      : geometry_(geometry), values_(std::move(values)) {
    geometry_.validate();
    if (values_.size() != geometry_.dims.count())
      throw std::invalid_argument("scalar grid expects " + std::to_string(geometry_.dims.count()) +
                                  " values, got " + std::to_string(values_.size()));
    for (double v : values_)
      if (!std::isfinite(v)) throw std::invalid_argument("scalar grid values must be finite");
  }
  explicit ScalarGrid(GridGeometry geometry, double fill = 0.0)
      : ScalarGrid(geometry, std::vector<double>(geometry.dims.count(), fill)) {}

  const GridGeometry& geometry() const { return geometry_; }
  const Dims& dims() const { return geometry_.dims; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t linear) const { return values_[linear]; }
  double& operator[](std::size_t linear) { return values_[linear]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return values_[geometry_.dims.index(i, j, k)]; }

  /// Trilinear reconstruction at a world position inside the lattice box.
  double sample(Vec3 p) const;

  friend bool operator==(const ScalarGrid&, const ScalarGrid&) = default;

 private:
  GridGeometry geometry_;
  std::vector<double> values_;
};

/// Piecewise-constant PDF with q pieces of equal mass qval, stored as q+1
/// nondecreasing boundaries.
struct QuantilePdf {
  double qval = 1.0;
  std::vector<double> boundaries;

  std::size_t pieces() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
  double width(std::size_t j) const { return boundaries[j + 1] - boundaries[j]; }
  /// Density of piece j, with the width floored at kWidthFloor.
  double density(std::size_t j) const { return qval / std::max(width(j), kWidthFloor); }
  /// Mean under the piecewise-constant density.
  double mean() const {
    double m = 0.0;
    for (std::size_t j = 0; j < pieces(); ++j) m += qval * 0.5 * (boundaries[j] + boundaries[j + 1]);
    return m;
  }
  /// Piecewise-linear CDF implied by the representation.
  double cdf(double x) const {
    const std::size_t q = pieces();
    if (x < boundaries.front()) return 0.0;
    if (x >= boundaries.back()) return 1.0;
    const auto it = std::upper_bound(boundaries.begin(), boundaries.end(), x);
    const auto j = static_cast<std::size_t>(it - boundaries.begin()) - 1;
    const double w = width(j);
    const double frac = w > 0.0 ? (x - boundaries[j]) / w : 1.0;
    return std::min(1.0, (static_cast<double>(j) + frac) / static_cast<double>(q));
  }

  void validate() const;

  friend bool operator==(const QuantilePdf&, const QuantilePdf&) = default;
};

/// Number of pieces implied by a unit-fraction qval; throws otherwise.
inline std::size_t pieces_for_qval(double qval) {
  if (!(qval > 0.0 && qval <= 1.0) || !std::isfinite(qval))
    throw std::invalid_argument("qval must lie in (0,1], got " + std::to_string(qval));
  const double inv = 1.0 / qval;
  const double q = std::round(inv);
  if (std::abs(q * qval - 1.0) > 1e-9)
    throw std::invalid_argument("1/qval must be a positive integer, got qval=" + std::to_string(qval));
  return static_cast<std::size_t>(q);
}

inline void QuantilePdf::validate() const {
  if (boundaries.size() < 2) throw std::invalid_argument("quantile pdf needs at least 2 boundaries");
  if (std::abs(static_cast<double>(pieces()) * qval - 1.0) > 1e-9)
    throw std::invalid_argument("quantile pdf mass q*qval must equal 1 (q=" + std::to_string(pieces()) +
                                ", qval=" + std::to_string(qval) + ")");
  for (std::size_t j = 0; j < boundaries.size(); ++j) {
    if (!std::isfinite(boundaries[j])) throw std::invalid_argument("quantile boundaries must be finite");
    if (j > 0 && boundaries[j] < boundaries[j - 1])
      throw std::invalid_argument("quantile boundaries must be nondecreasing");
  }
}

struct UniformParams {
  double center = 0.0;
  double width = 0.0;
  friend bool operator==(const UniformParams&, const UniformParams&) = default;
};

struct GaussianParams {
  double mean = 0.0;
  double sigma = 0.0;
  friend bool operator==(const GaussianParams&, const GaussianParams&) = default;
};

struct GmmComponent {
  double weight = 0.0;
  double mean = 0.0;
  double sigma = 0.0;
  friend bool operator==(const GmmComponent&, const GmmComponent&) = default;
};

struct GmmModel {
  std::vector<GmmComponent> components;

  std::size_t k() const { return components.size(); }
  double mean() const {
    double m = 0.0;
    for (const auto& c : components) m += c.weight * c.mean;
    return m;
  }
  double cdf(double x) const {
    double f = 0.0;
    for (const auto& c : components) {
      if (c.sigma > 0.0)
        f += c.weight * stats::normal_cdf((x - c.mean) / c.sigma);
      else
        f += x >= c.mean ? c.weight : 0.0;
    }
    return f;
  }
  void validate(double sigma_floor = 0.0) const {
    if (components.empty()) throw std::invalid_argument("gmm needs at least one component");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight >= 0.0) || !std::isfinite(c.mean) || !(c.sigma >= sigma_floor) || !std::isfinite(c.sigma))
        throw std::invalid_argument("gmm component parameters out of range");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("gmm weights must sum to 1");
  }
  friend bool operator==(const GmmModel&, const GmmModel&) = default;
};

enum class ModelKind { MeanField, Uniform, Gaussian, Gmm, Quantile, Samples };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::MeanField: return "mean";
    case ModelKind::Uniform: return "uniform";
    case ModelKind::Gaussian: return "gaussian";
    case ModelKind::Gmm: return "gmm";
    case ModelKind::Quantile: return "quantile";
    case ModelKind::Samples: return "samples";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(std::string_view name) {
  for (auto kind : {ModelKind::MeanField, ModelKind::Uniform, ModelKind::Gaussian, ModelKind::Gmm,
                    ModelKind::Quantile, ModelKind::Samples})
    if (to_string(kind) == name) return kind;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

// Per-voxel payloads, one vector entry (or fixed-size run) per voxel, x-fastest.
struct MeanFieldModel {
  std::vector<double> mean;
  friend bool operator==(const MeanFieldModel&, const MeanFieldModel&) = default;
};
struct UniformModel {
  std::vector<UniformParams> voxels;
  friend bool operator==(const UniformModel&, const UniformModel&) = default;
};
struct GaussianModel {
  std::vector<GaussianParams> voxels;
  friend bool operator==(const GaussianModel&, const GaussianModel&) = default;
};
struct GmmVolumeModel {
  std::size_t k = 0;
  std::vector<GmmComponent> components;  // k per voxel
  friend bool operator==(const GmmVolumeModel&, const GmmVolumeModel&) = default;
};
struct QuantileModel {
  double qval = 1.0;
  std::size_t q = 1;
  std::vector<double> boundaries;  // q+1 per voxel
  friend bool operator==(const QuantileModel&, const QuantileModel&) = default;
};
struct SampleModel {
  std::size_t m = 0;
  std::vector<double> samples;  // m per voxel
  friend bool operator==(const SampleModel&, const SampleModel&) = default;
};

using VolumeModel = std::variant<MeanFieldModel, UniformModel, GaussianModel, GmmVolumeModel, QuantileModel, SampleModel>;

/// A grid whose voxels are random variables, all described by one model kind.
class DistributionVolume {
 public:
  DistributionVolume() = default;
  DistributionVolume(GridGeometry geometry, VolumeModel model)
      : geometry_(geometry), model_(std::move(model)) {
    validate();
  }

  const GridGeometry& geometry() const { return geometry_; }
  const Dims& dims() const { return geometry_.dims; }
  const VolumeModel& model() const { return model_; }
  ModelKind kind() const { return static_cast<ModelKind>(model_.index()); }

  template <class M>
  const M& as() const {
    if (const auto* m = std::get_if<M>(&model_)) return *m;
    throw std::invalid_argument("volume holds a '" + std::string(to_string(kind())) + "' model");
  }

  /// Quantile boundaries of voxel `linear` for the Quantile model.
  std::span<const double> quantile_boundaries(std::size_t linear) const {
    const auto& m = as<QuantileModel>();
    return std::span<const double>(m.boundaries).subspan(linear * (m.q + 1), m.q + 1);
  }
  std::span<const GmmComponent> gmm_components(std::size_t linear) const {
    const auto& m = as<GmmVolumeModel>();
    return std::span<const GmmComponent>(m.components).subspan(linear * m.k, m.k);
  }
  std::span<const double> voxel_samples(std::size_t linear) const {
    const auto& m = as<SampleModel>();
    return std::span<const double>(m.samples).subspan(linear * m.m, m.m);
  }

  /// Expected value of every voxel, as a deterministic grid.
  ScalarGrid mean_grid() const;

  void validate() const;

  friend bool operator==(const DistributionVolume&, const DistributionVolume&) = default;

 private:
  GridGeometry geometry_;
  VolumeModel model_;
};

/// M congruent member grids.
class EnsembleVolume {
 public:
  EnsembleVolume() = default;
  explicit EnsembleVolume(std::vector<ScalarGrid> members) : members_(std::move(members)) {
    if (members_.empty()) throw std::invalid_argument("ensemble needs at least one member");
    for (const auto& m : members_)
      if (!(m.geometry() == members_.front().geometry()))
        throw std::invalid_argument("ensemble members must share dims, spacing and origin");
  }

  std::size_t size() const { return members_.size(); }
  const GridGeometry& geometry() const { return members_.front().geometry(); }
  const ScalarGrid& member(std::size_t m) const { return members_.at(m); }
  std::span<const ScalarGrid> members() const { return members_; }

  /// Gathers the M values of one voxel into `out`.
  void gather(std::size_t linear, std::vector<double>& out) const {
    out.resize(members_.size());
    for (std::size_t m = 0; m < members_.size(); ++m) out[m] = members_[m][linear];
  }

  friend bool operator==(const EnsembleVolume&, const EnsembleVolume&) = default;

 private:
  std::vector<ScalarGrid> members_;
};

// ---------------------------------------------------------------------------

inline double ScalarGrid::sample(Vec3 p) const {
  const auto& g = geometry_;
  std::size_t base[3];
  double t[3];
  for (std::size_t a = 0; a < 3; ++a) {
    const double n = static_cast<double>(g.dims[a]);
    double u = (p[a] - g.origin[a]) / g.spacing[a];
    if (g.dims[a] == 1) {
      base[a] = 0;
      t[a] = 0.0;
      continue;
    }
    u = std::clamp(u, 0.0, n - 1.0);
    auto b = static_cast<std::size_t>(std::floor(u));
    if (b >= g.dims[a] - 1) b = g.dims[a] - 2;
    base[a] = b;
    t[a] = u - static_cast<double>(b);
  }
  auto v = [&](std::size_t di, std::size_t dj, std::size_t dk) {
    const std::size_t i = std::min(base[0] + di, g.dims.nx - 1);
    const std::size_t j = std::min(base[1] + dj, g.dims.ny - 1);
    const std::size_t k = std::min(base[2] + dk, g.dims.nz - 1);
    return at(i, j, k);
  };
  const double c00 = v(0, 0, 0) + t[0] * (v(1, 0, 0) - v(0, 0, 0));
  const double c10 = v(0, 1, 0) + t[0] * (v(1, 1, 0) - v(0, 1, 0));
  const double c01 = v(0, 0, 1) + t[0] * (v(1, 0, 1) - v(0, 0, 1));
  const double c11 = v(0, 1, 1) + t[0] * (v(1, 1, 1) - v(0, 1, 1));
  const double c0 = c00 + t[1] * (c10 - c00);
  const double c1 = c01 + t[1] * (c11 - c01);
  return c0 + t[2] * (c1 - c0);
}

inline void DistributionVolume::validate() const {
  geometry_.validate();
  const std::size_t n = geometry_.dims.count();
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
  };
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, MeanFieldModel>) {
          require(m.mean.size() == n, "mean-field payload size mismatch");
          for (double v : m.mean) require(std::isfinite(v), "mean-field values must be finite");
        } else if constexpr (std::is_same_v<M, UniformModel>) {
          require(m.voxels.size() == n, "uniform payload size mismatch");
          for (const auto& u : m.voxels)
            require(std::isfinite(u.center) && u.width >= 0.0 && std::isfinite(u.width),
                    "uniform voxel needs finite center and width >= 0");
        } else if constexpr (std::is_same_v<M, GaussianModel>) {
          require(m.voxels.size() == n, "gaussian payload size mismatch");
          for (const auto& g : m.voxels)
            require(std::isfinite(g.mean) && g.sigma >= 0.0 && std::isfinite(g.sigma),
                    "gaussian voxel needs finite mean and sigma >= 0");
        } else if constexpr (std::is_same_v<M, GmmVolumeModel>) {
          require(m.k >= 1 && m.components.size() == n * m.k, "gmm payload size mismatch");
          for (std::size_t v = 0; v < n; ++v)
            GmmModel{{m.components.begin() + static_cast<std::ptrdiff_t>(v * m.k),
                      m.components.begin() + static_cast<std::ptrdiff_t>((v + 1) * m.k)}}
                .validate();
        } else if constexpr (std::is_same_v<M, QuantileModel>) {
          require(m.q >= 1 && m.boundaries.size() == n * (m.q + 1), "quantile payload size mismatch");
          require(std::abs(static_cast<double>(m.q) * m.qval - 1.0) <= 1e-9, "quantile model needs q*qval = 1");
          for (std::size_t v = 0; v < n; ++v) {
            const double* b = m.boundaries.data() + v * (m.q + 1);
            for (std::size_t j = 0; j <= m.q; ++j) {
              require(std::isfinite(b[j]), "quantile boundaries must be finite");
              require(j == 0 || b[j] >= b[j - 1],
                      "quantile boundaries must be nondecreasing (voxel " + std::to_string(v) + ")");
            }
          }
        } else if constexpr (std::is_same_v<M, SampleModel>) {
          require(m.m >= 1 && m.samples.size() == n * m.m, "sample payload size mismatch");
          for (double v : m.samples) require(std::isfinite(v), "samples must be finite");
        }
      },
      model_);
}

inline ScalarGrid DistributionVolume::mean_grid() const {
  const std::size_t n = geometry_.dims.count();
  std::vector<double> out(n);
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        for (std::size_t v = 0; v < n; ++v) {
          if constexpr (std::is_same_v<M, MeanFieldModel>) {
            out[v] = m.mean[v];
          } else if constexpr (std::is_same_v<M, UniformModel>) {
            out[v] = m.voxels[v].center;
          } else if constexpr (std::is_same_v<M, GaussianModel>) {
            out[v] = m.voxels[v].mean;
          } else if constexpr (std::is_same_v<M, GmmVolumeModel>) {
            double s = 0.0;
            for (std::size_t c = 0; c < m.k; ++c) s += m.components[v * m.k + c].weight * m.components[v * m.k + c].mean;
            out[v] = s;
          } else if constexpr (std::is_same_v<M, QuantileModel>) {
            QuantilePdf pdf{m.qval, {m.boundaries.begin() + static_cast<std::ptrdiff_t>(v * (m.q + 1)),
                                     m.boundaries.begin() + static_cast<std::ptrdiff_t>((v + 1) * (m.q + 1))}};
            out[v] = pdf.mean();
          } else if constexpr (std::is_same_v<M, SampleModel>) {
            out[v] = stats::mean(std::span<const double>(m.samples).subspan(v * m.m, m.m));
          }
        }
      },
      model_);
  return ScalarGrid(geometry_, std::move(out));
}

// ---------------------------------------------------------------------------
// Per-voxel quantile extraction

/// Quantile representation of a uniform distribution.
inline QuantilePdf uniform_quantiles(UniformParams u, double qval) {
  const std::size_t q = pieces_for_qval(qval);
  QuantilePdf pdf{qval, std::vector<double>(q + 1)};
  const double lo = u.center - 0.5 * u.width;
  for (std::size_t j = 0; j <= q; ++j)
    pdf.boundaries[j] = j == q ? u.center + 0.5 * u.width : lo + static_cast<double>(j) * qval * u.width;
  return pdf;
}

/// Quantile representation of a Gaussian; the outer boundaries are clamped
/// to mean +/- kGaussianTailSigmas * sigma.
inline QuantilePdf gaussian_quantiles(GaussianParams g, double qval) {
  const std::size_t q = pieces_for_qval(qval);
  QuantilePdf pdf{qval, std::vector<double>(q + 1, g.mean)};
  if (g.sigma == 0.0) return pdf;
  pdf.boundaries.front() = g.mean - kGaussianTailSigmas * g.sigma;
  pdf.boundaries.back() = g.mean + kGaussianTailSigmas * g.sigma;
  for (std::size_t j = 1; j < q; ++j) {
    const double p = static_cast<double>(j) / static_cast<double>(q);
    const double z = std::clamp(stats::normal_quantile(p), -kGaussianTailSigmas, kGaussianTailSigmas);
    pdf.boundaries[j] = g.mean + g.sigma * z;
  }
  return pdf;
}

/// Quantile representation of a GMM by bisection on the mixture CDF.
inline QuantilePdf gmm_quantiles(const GmmModel& gmm, double qval) {
  const std::size_t q = pieces_for_qval(qval);
  double lo = gmm.components.front().mean, hi = lo;
  for (const auto& c : gmm.components) {
    lo = std::min(lo, c.mean - kGaussianTailSigmas * c.sigma);
    hi = std::max(hi, c.mean + kGaussianTailSigmas * c.sigma);
  }
  QuantilePdf pdf{qval, std::vector<double>(q + 1)};
  pdf.boundaries.front() = lo;
  pdf.boundaries.back() = hi;
  for (std::size_t j = 1; j < q; ++j) {
    const double p = static_cast<double>(j) / static_cast<double>(q);
    double a = pdf.boundaries[j - 1], b = hi;
    for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, std::abs(b)); ++it) {
      const double mid = 0.5 * (a + b);
      if (gmm.cdf(mid) < p)
        a = mid;
      else
        b = mid;
    }
    pdf.boundaries[j] = b;
  }
  return pdf;
}

/// Empirical quantiles (inclusive linear convention) of a sample set.
inline QuantilePdf empirical_quantiles(std::span<const double> samples, double qval) {
  const std::size_t q = pieces_for_qval(qval);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  QuantilePdf pdf{qval, std::vector<double>(q + 1)};
  for (std::size_t j = 0; j <= q; ++j)
    pdf.boundaries[j] = stats::sorted_quantile(sorted, static_cast<double>(j) / static_cast<double>(q));
  return pdf;
}

/// Quantile PDF of voxel `linear`. Parametric models are partitioned at the
/// requested qval; the Quantile model passes its stored pieces through.
inline QuantilePdf voxel_pdf(const DistributionVolume& volume, std::size_t linear, double qval = 0.125) {
  if (linear >= volume.dims().count())
    throw std::out_of_range("voxel index " + std::to_string(linear) + " outside volume " + volume.dims().str());
  return std::visit(
      [&](const auto& m) -> QuantilePdf {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, MeanFieldModel>) {
          return QuantilePdf{qval, std::vector<double>(pieces_for_qval(qval) + 1, m.mean[linear])};
        } else if constexpr (std::is_same_v<M, UniformModel>) {
          return uniform_quantiles(m.voxels[linear], qval);
        } else if constexpr (std::is_same_v<M, GaussianModel>) {
          return gaussian_quantiles(m.voxels[linear], qval);
        } else if constexpr (std::is_same_v<M, GmmVolumeModel>) {
          const auto comps = volume.gmm_components(linear);
          return gmm_quantiles(GmmModel{{comps.begin(), comps.end()}}, qval);
        } else if constexpr (std::is_same_v<M, QuantileModel>) {
          const auto b = volume.quantile_boundaries(linear);
          return QuantilePdf{m.qval, {b.begin(), b.end()}};
        } else {
          return empirical_quantiles(volume.voxel_samples(linear), qval);
        }
      },
      volume.model());
}

inline QuantilePdf voxel_pdf(const DistributionVolume& volume, std::size_t i, std::size_t j, std::size_t k,
                             double qval = 0.125) {
  const auto& d = volume.dims();
  if (i >= d.nx || j >= d.ny || k >= d.nz) throw std::out_of_range("voxel index outside volume " + d.str());
  return voxel_pdf(volume, d.index(i, j, k), qval);
}

}  // namespace uqdvr
