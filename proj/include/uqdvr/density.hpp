#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqdvr/parallel.hpp"
#include "uqdvr/random.hpp"
#include "uqdvr/stats.hpp"
#include "uqdvr/volcore.hpp"

namespace uqdvr {

/// Gaussian-kernel density estimate settings. An empty bandwidth selects
/// Silverman's rule 1.06 * sigma * n^(-1/5).
struct KdeConfig {
  std::optional<double> bandwidth;
  std::size_t lattice = 512;

  void validate() const {
    if (bandwidth && !(*bandwidth > 0.0)) throw std::invalid_argument("KDE bandwidth must be positive");
    if (lattice < 64) throw std::invalid_argument("KDE lattice resolution must be at least 64");
  }
};

inline double silverman_bandwidth(std::span<const double> samples) {
  return 1.06 * stats::stddev(samples) * std::pow(static_cast<double>(samples.size()), -0.2);
}

/// KDE evaluated on a uniform value lattice spanning the sample range, with
/// its trapezoid-rule CDF renormalized to end at 1. Kernel mass falling
/// outside [min, max] of the samples is dropped.
struct KdeLattice {
  double start = 0.0;
  double step = 0.0;
  double bandwidth = 0.0;
  std::vector<double> pdf;
  std::vector<double> cdf;

  double x(std::size_t i) const { return start + static_cast<double>(i) * step; }

  /// Linear interpolation of the lattice CDF.
  double cdf_at(double value) const {
    if (value <= start) return 0.0;
    const double pos = (value - start) / step;
    if (pos >= static_cast<double>(cdf.size() - 1)) return 1.0;
    const auto i = static_cast<std::size_t>(pos);
    return cdf[i] + (pos - static_cast<double>(i)) * (cdf[i + 1] - cdf[i]);
  }
};

/// Builds the lattice KDE. Samples are linearly binned onto the lattice and
/// the binned counts are convolved with the sampled Gaussian kernel. Returns
/// nullopt when all samples coincide (zero spread).
inline std::optional<KdeLattice> kde_lattice(std::span<const double> samples, const KdeConfig& config = {}) {
  config.validate();
  if (samples.size() < 2) throw std::invalid_argument("KDE needs at least 2 samples");
  const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
  const double mn = *mn_it, mx = *mx_it;
  if (mn == mx) return std::nullopt;
  const double h = config.bandwidth ? *config.bandwidth : silverman_bandwidth(samples);
  if (!(h > 0.0)) return std::nullopt;

  const std::size_t L = config.lattice;
  KdeLattice lat;
  lat.bandwidth = h;
  lat.start = mn;
  lat.step = (mx - mn) / static_cast<double>(L - 1);

  std::vector<double> counts(L, 0.0);
  for (double s : samples) {
    const double pos = (s - lat.start) / lat.step;
    auto i = static_cast<std::size_t>(pos);
    if (i >= L - 1) i = L - 2;
    const double f = pos - static_cast<double>(i);
    counts[i] += 1.0 - f;
    counts[i + 1] += f;
  }

  const auto reach = static_cast<std::size_t>(
      std::min(static_cast<double>(L - 1), std::ceil(8.0 * h / lat.step)));
  std::vector<double> kernel(reach + 1);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h);
  for (std::size_t d = 0; d <= reach; ++d) kernel[d] = norm * stats::normal_pdf(static_cast<double>(d) * lat.step / h);

  lat.pdf.assign(L, 0.0);
  for (std::size_t j = 0; j < L; ++j) {
    const double c = counts[j];
    if (c == 0.0) continue;
    const std::size_t lo = j > reach ? j - reach : 0;
    const std::size_t hi = std::min(L - 1, j + reach);
    for (std::size_t i = lo; i <= hi; ++i) lat.pdf[i] += c * kernel[i > j ? i - j : j - i];
  }

  lat.cdf.assign(L, 0.0);
  for (std::size_t i = 1; i < L; ++i) lat.cdf[i] = lat.cdf[i - 1] + 0.5 * (lat.pdf[i - 1] + lat.pdf[i]) * lat.step;
  const double total = lat.cdf.back();
  for (auto& f : lat.cdf) f /= total;
  for (auto& p : lat.pdf) p /= total;
  lat.cdf.back() = 1.0;
  return lat;
}

/// Inverts a lattice CDF at the masses 0, qval, 2 qval, ..., 1 by monotone
/// linear interpolation.
inline QuantilePdf invert_lattice_cdf(const KdeLattice& lat, double qval) {
  const std::size_t q = pieces_for_qval(qval);
  QuantilePdf pdf{qval, std::vector<double>(q + 1)};
  const std::size_t L = lat.cdf.size();
  pdf.boundaries.front() = lat.start;
  pdf.boundaries.back() = lat.x(L - 1);
  std::size_t i = 1;
  for (std::size_t j = 1; j < q; ++j) {
    const double p = static_cast<double>(j) / static_cast<double>(q);
    while (i < L - 1 && lat.cdf[i] < p) ++i;
    const double f0 = lat.cdf[i - 1], f1 = lat.cdf[i];
    const double frac = f1 > f0 ? std::clamp((p - f0) / (f1 - f0), 0.0, 1.0) : 1.0;
    pdf.boundaries[j] = std::max(pdf.boundaries[j - 1], lat.x(i - 1) + frac * lat.step);
  }
  return pdf;
}

/// Nonparametric quantile representation of the KDE of `samples`.
inline QuantilePdf estimate_quantiles(std::span<const double> samples, double qval, const KdeConfig& config = {}) {
  if (samples.size() < 2) throw std::invalid_argument("estimate_quantiles needs at least 2 samples");
  const std::size_t q = pieces_for_qval(qval);
  const auto lat = kde_lattice(samples, config);
  if (!lat) return QuantilePdf{qval, std::vector<double>(q + 1, samples.front())};
  return invert_lattice_cdf(*lat, qval);
}

// ---------------------------------------------------------------------------
// Parametric fits

inline double fit_mean(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("fit_mean needs at least one sample");
  return stats::mean(samples);
}

/// Uniform model: (midrange, range).
inline UniformParams fit_uniform(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("fit_uniform needs at least one sample");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  return {0.5 * (*mn + *mx), *mx - *mn};
}

/// Gaussian model: (sample mean, unbiased sample sigma).
inline GaussianParams fit_gaussian(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("fit_gaussian needs at least one sample");
  if (samples.size() < 2) throw std::invalid_argument("fit_gaussian needs at least 2 samples for sigma");
  return {stats::mean(samples), stats::stddev(samples)};
}

struct GmmFit {
  GmmModel model;
  std::vector<double> loglik;  // log-likelihood before each M-step
  std::size_t iterations = 0;
};

/// Expectation maximization for a 1D Gaussian mixture.
///
/// Initialization is deterministic: means at the empirical quantiles
/// (r + 0.5)/k, sigmas at sigma_hat/k, equal weights. Iterates until
/// max_iter or until the log-likelihood changes by less than 1e-8. Sigmas are
/// floored at 1e-6 times the sample range. The returned sigmas carry the
/// reliability-weight small-sample correction N_r^2 / (N_r^2 - sum gamma^2),
/// which makes k = 1 coincide with fit_gaussian.
///
/// `seed` is accepted for interface stability; the fit consumes no randomness.
inline GmmFit fit_gmm_em_traced(std::span<const double> samples, std::size_t k, std::uint64_t seed = 0,
                                std::size_t max_iter = 200) {
  (void)seed;
  const std::size_t n = samples.size();
  if (k == 0) throw std::invalid_argument("gmm needs k >= 1");
  if (k > n)
    throw std::invalid_argument("gmm with k=" + std::to_string(k) + " needs at least k samples, got " +
                                std::to_string(n));
  const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
  const double range = *mx_it - *mn_it;
  const double floor = 1e-6 * range;

  GmmFit fit;
  auto& comps = fit.model.components;
  comps.resize(k);
  if (range == 0.0) {
    for (auto& c : comps) c = {1.0 / static_cast<double>(k), *mn_it, floor};
    return fit;
  }

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = n >= 2 ? stats::stddev(samples) : 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    comps[r].weight = 1.0 / static_cast<double>(k);
    comps[r].mean = stats::sorted_quantile(sorted, (static_cast<double>(r) + 0.5) / static_cast<double>(k));
    comps[r].sigma = std::max(sd / static_cast<double>(k), floor);
  }

  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  std::vector<double> gamma(n * k);
  std::vector<double> logp(k);
  std::vector<double> nk(k), nk2(k);

  auto e_step = [&] {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < k; ++r) {
        const auto& c = comps[r];
        const double z = (samples[i] - c.mean) / c.sigma;
        logp[r] = (c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity()) -
                  std::log(c.sigma) - 0.5 * z * z - log_norm;
        top = std::max(top, logp[r]);
      }
      double s = 0.0;
      for (std::size_t r = 0; r < k; ++r) s += std::exp(logp[r] - top);
      const double lse = top + std::log(s);
      for (std::size_t r = 0; r < k; ++r) gamma[i * k + r] = std::exp(logp[r] - lse);
      ll += lse;
    }
    std::fill(nk.begin(), nk.end(), 0.0);
    std::fill(nk2.begin(), nk2.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t r = 0; r < k; ++r) {
        nk[r] += gamma[i * k + r];
        nk2[r] += gamma[i * k + r] * gamma[i * k + r];
      }
    return ll;
  };

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const double ll = e_step();
    fit.loglik.push_back(ll);
    if (iter > 0 && std::abs(ll - fit.loglik[iter - 1]) < 1e-8) break;
    for (std::size_t r = 0; r < k; ++r) {
      auto& c = comps[r];
      c.weight = nk[r] / static_cast<double>(n);
      if (nk[r] <= 1e-12 * static_cast<double>(n)) continue;  // starved component keeps its shape
      double sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) sx += gamma[i * k + r] * samples[i];
      c.mean = sx / nk[r];
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = samples[i] - c.mean;
        ss += gamma[i * k + r] * d * d;
      }
      c.sigma = std::max(std::sqrt(ss / nk[r]), floor);
    }
    fit.iterations = iter + 1;
  }

  if (fit.iterations == fit.loglik.size()) e_step();  // responsibilities for the final parameters
  double wsum = 0.0;
  for (const auto& c : comps) wsum += c.weight;
  for (std::size_t r = 0; r < k; ++r) {
    auto& c = comps[r];
    c.weight /= wsum;
    const double denom = nk[r] * nk[r] - nk2[r];
    if (denom > 0.0) c.sigma = std::max(c.sigma * std::sqrt(nk[r] * nk[r] / denom), floor);
  }
  return fit;
}

inline GmmModel fit_gmm_em(std::span<const double> samples, std::size_t k, std::uint64_t seed = 0,
                           std::size_t max_iter = 200) {
  return fit_gmm_em_traced(samples, k, seed, max_iter).model;
}

// ---------------------------------------------------------------------------
// Volume construction

enum class QuantileEstimator { Kde, Empirical };

/// How to summarize each voxel's sample set.
struct ModelSpec {
  ModelKind kind = ModelKind::Quantile;
  double qval = 0.125;
  QuantileEstimator estimator = QuantileEstimator::Kde;
  KdeConfig kde;
  std::size_t gmm_k = 4;
  std::size_t gmm_max_iter = 200;
  std::uint64_t seed = 0;
};

namespace detail {

/// Fits every voxel of a sample-set provider into a distribution volume.
/// `gather(v, out)` fills the samples for voxel v.
template <class Gather>
DistributionVolume fit_volume(const GridGeometry& geometry, std::size_t samples_per_voxel, const ModelSpec& spec,
                              unsigned threads, Gather&& gather) {
  const std::size_t n = geometry.dims.count();
  const std::size_t m = samples_per_voxel;
  if (spec.kind != ModelKind::MeanField && m < 2)
    throw std::invalid_argument("model '" + std::string(to_string(spec.kind)) + "' needs at least 2 samples per voxel");
  if (spec.kind == ModelKind::Quantile) pieces_for_qval(spec.qval);
  if (spec.kind == ModelKind::Gmm && spec.gmm_k > m)
    throw std::invalid_argument("gmm k exceeds samples per voxel");
  spec.kde.validate();

  const std::size_t q = spec.kind == ModelKind::Quantile ? pieces_for_qval(spec.qval) : 0;
  MeanFieldModel mean_m;
  UniformModel uni_m;
  GaussianModel gau_m;
  GmmVolumeModel gmm_m{spec.gmm_k, {}};
  QuantileModel q_m{spec.qval, q, {}};
  SampleModel s_m{m, {}};
  switch (spec.kind) {
    case ModelKind::MeanField: mean_m.mean.resize(n); break;
    case ModelKind::Uniform: uni_m.voxels.resize(n); break;
    case ModelKind::Gaussian: gau_m.voxels.resize(n); break;
    case ModelKind::Gmm: gmm_m.components.resize(n * spec.gmm_k); break;
    case ModelKind::Quantile: q_m.boundaries.resize(n * (q + 1)); break;
    case ModelKind::Samples: s_m.samples.resize(n * m); break;
  }

  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> buf;
    for (std::size_t v = begin; v < end; ++v) {
      gather(v, buf);
      try {
        switch (spec.kind) {
          case ModelKind::MeanField: mean_m.mean[v] = fit_mean(buf); break;
          case ModelKind::Uniform: uni_m.voxels[v] = fit_uniform(buf); break;
          case ModelKind::Gaussian: gau_m.voxels[v] = fit_gaussian(buf); break;
          case ModelKind::Gmm: {
            const auto g = fit_gmm_em(buf, spec.gmm_k, derive_seed(spec.seed, v), spec.gmm_max_iter);
            std::copy(g.components.begin(), g.components.end(),
                      gmm_m.components.begin() + static_cast<std::ptrdiff_t>(v * spec.gmm_k));
            break;
          }
          case ModelKind::Quantile: {
            const auto pdf = spec.estimator == QuantileEstimator::Kde ? estimate_quantiles(buf, spec.qval, spec.kde)
                                                                      : empirical_quantiles(buf, spec.qval);
            std::copy(pdf.boundaries.begin(), pdf.boundaries.end(),
                      q_m.boundaries.begin() + static_cast<std::ptrdiff_t>(v * (q + 1)));
            break;
          }
          case ModelKind::Samples:
            std::copy(buf.begin(), buf.end(), s_m.samples.begin() + static_cast<std::ptrdiff_t>(v * m));
            break;
        }
      } catch (const std::exception& e) {
        throw std::runtime_error("voxel " + std::to_string(v) + ": " + e.what());
      }
    }
  });

  switch (spec.kind) {
    case ModelKind::MeanField: return DistributionVolume(geometry, std::move(mean_m));
    case ModelKind::Uniform: return DistributionVolume(geometry, std::move(uni_m));
    case ModelKind::Gaussian: return DistributionVolume(geometry, std::move(gau_m));
    case ModelKind::Gmm: return DistributionVolume(geometry, std::move(gmm_m));
    case ModelKind::Quantile: return DistributionVolume(geometry, std::move(q_m));
    case ModelKind::Samples: return DistributionVolume(geometry, std::move(s_m));
  }
  throw std::logic_error("unreachable model kind");
}

}  // namespace detail

/// Applies the per-voxel fitter of `spec` independently to every voxel of
/// the ensemble. Results do not depend on the worker count.
inline DistributionVolume build_distribution_volume(const EnsembleVolume& ensemble, const ModelSpec& spec,
                                                    unsigned threads = 0) {
  return detail::fit_volume(ensemble.geometry(), ensemble.size(), spec, threads,
                            [&](std::size_t v, std::vector<double>& out) { ensemble.gather(v, out); });
}

struct HixelVolume {
  DistributionVolume distribution;
  ScalarGrid mean;
};

/// Downsamples a high-resolution grid into bricks; each brick's values form
/// the sample set of one low-resolution voxel placed at the brick centroid.
inline HixelVolume downsample_hixel(const ScalarGrid& hi, std::array<std::size_t, 3> brick, const ModelSpec& spec,
                                    unsigned threads = 0) {
  const auto& hg = hi.geometry();
  for (std::size_t a = 0; a < 3; ++a)
    if (brick[a] == 0 || hg.dims[a] % brick[a] != 0)
      throw std::invalid_argument("grid dims " + hg.dims.str() + " are not divisible by the brick size");
  GridGeometry lg;
  lg.dims = {hg.dims.nx / brick[0], hg.dims.ny / brick[1], hg.dims.nz / brick[2]};
  for (std::size_t a = 0; a < 3; ++a) {
    lg.spacing[a] = hg.spacing[a] * static_cast<double>(brick[a]);
    lg.origin[a] = hg.origin[a] + 0.5 * static_cast<double>(brick[a] - 1) * hg.spacing[a];
  }
  const std::size_t per_brick = brick[0] * brick[1] * brick[2];
  auto gather = [&](std::size_t v, std::vector<double>& out) {
    const auto [bi, bj, bk] = lg.dims.unravel(v);
    out.clear();
    for (std::size_t k = 0; k < brick[2]; ++k)
      for (std::size_t j = 0; j < brick[1]; ++j)
        for (std::size_t i = 0; i < brick[0]; ++i)
          out.push_back(hi.at(bi * brick[0] + i, bj * brick[1] + j, bk * brick[2] + k));
  };
  ModelSpec mean_spec = spec;
  mean_spec.kind = ModelKind::MeanField;
  auto mean_volume = detail::fit_volume(lg, per_brick, mean_spec, threads, gather);
  ScalarGrid mean_grid(lg, mean_volume.as<MeanFieldModel>().mean);
  if (spec.kind == ModelKind::MeanField) return {std::move(mean_volume), std::move(mean_grid)};
  return {detail::fit_volume(lg, per_brick, spec, threads, gather), std::move(mean_grid)};
}

}  // namespace uqdvr
