#pragma once

// Synthetic fields and noisy ensembles.
//
// Closed forms, evaluated on the default domain unless one is given:
//   tangle          x^4 - 5x^2 + y^4 - 5y^2 + z^4 - 5z^2 + 11.8   on [-2.3, 2.3]^3
//   teardrop        0.5x^5 + 0.5x^4 - y^2 - z^2                  on [-1.1, 0.1] x [-0.3, 0.3]^2
//   nested-spheres  shells of radius 0.2/0.4/0.6/0.8 and thickness 0.1 with
//                   values 0.25/0.5/0.75/1, zero elsewhere          on [-1, 1]^3
//   linear:a,b,c    a*x + b*y + c*z                                 on [-1, 1]^3
//   constant:c      c                                               on [-1, 1]^3
// Every field is min-max normalized to [0,1]; zero-range fields pass through.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uqdvr/parallel.hpp"
#include "uqdvr/random.hpp"
#include "uqdvr/volcore.hpp"

namespace uqdvr {

struct DomainBox {
  Vec3 lo;
  Vec3 hi;
};

namespace detail {

inline std::vector<double> parse_numbers(std::string_view s, std::string_view what) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = s.find(',', pos);
    const auto tok = s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
      throw std::invalid_argument("bad number '" + std::string(tok) + "' in " + std::string(what));
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::string join_numbers(std::initializer_list<double> values) {
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (double v : values) {
    if (!first) os << ',';
    os << v;
    first = false;
  }
  return os.str();
}

}  // namespace detail

struct FieldSpec {
  enum class Kind { Tangle, Teardrop, NestedSpheres, Linear, Constant };
  Kind kind = Kind::Tangle;
  Vec3 coeffs{1.0, 0.0, 0.0};  // linear
  double value = 0.0;          // constant

  static FieldSpec parse(std::string_view text) {
    const auto colon = text.find(':');
    const auto name = text.substr(0, colon);
    const auto args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    FieldSpec f;
    if (name == "tangle" || name == "teardrop" || name == "nested-spheres") {
      if (!args.empty()) throw std::invalid_argument("field '" + std::string(name) + "' takes no parameters");
      f.kind = name == "tangle" ? Kind::Tangle : name == "teardrop" ? Kind::Teardrop : Kind::NestedSpheres;
    } else if (name == "linear") {
      const auto v = detail::parse_numbers(args, "linear field");
      if (v.size() != 3) throw std::invalid_argument("field linear needs three coefficients: linear:a,b,c");
      f.kind = Kind::Linear;
      f.coeffs = {v[0], v[1], v[2]};
    } else if (name == "constant") {
      const auto v = detail::parse_numbers(args, "constant field");
      if (v.size() != 1) throw std::invalid_argument("field constant needs one value: constant:c");
      f.kind = Kind::Constant;
      f.value = v[0];
    } else {
      throw std::invalid_argument("unknown field '" + std::string(text) + "'");
    }
    return f;
  }

  std::string str() const {
    switch (kind) {
      case Kind::Tangle: return "tangle";
      case Kind::Teardrop: return "teardrop";
      case Kind::NestedSpheres: return "nested-spheres";
      case Kind::Linear: return "linear:" + detail::join_numbers({coeffs.x, coeffs.y, coeffs.z});
      case Kind::Constant: return "constant:" + detail::join_numbers({value});
    }
    return {};
  }

  DomainBox default_domain() const {
    switch (kind) {
      case Kind::Tangle: return {{-2.3, -2.3, -2.3}, {2.3, 2.3, 2.3}};
      case Kind::Teardrop: return {{-1.1, -0.3, -0.3}, {0.1, 0.3, 0.3}};
      default: return {{-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}};
    }
  }

  double operator()(Vec3 p) const {
    const double x = p.x, y = p.y, z = p.z;
    switch (kind) {
      case Kind::Tangle:
        return x * x * x * x - 5.0 * x * x + y * y * y * y - 5.0 * y * y + z * z * z * z - 5.0 * z * z + 11.8;
      case Kind::Teardrop: return 0.5 * x * x * x * x * x + 0.5 * x * x * x * x - y * y - z * z;
      case Kind::NestedSpheres: {
        const double r = norm(p);
        for (int s = 1; s <= 4; ++s)
          if (std::abs(r - 0.2 * s) <= 0.05) return 0.25 * s;
        return 0.0;
      }
      case Kind::Linear: return dot(coeffs, p);
      case Kind::Constant: return value;
    }
    return 0.0;
  }
};

inline GridGeometry domain_geometry(Dims dims, const DomainBox& box) {
  GridGeometry g;
  g.dims = dims;
  g.origin = box.lo;
  for (std::size_t a = 0; a < 3; ++a) {
    if (dims[a] < 2) throw std::invalid_argument("synthetic fields need at least 2 voxels per axis, got " + dims.str());
    if (!(box.hi[a] > box.lo[a])) throw std::invalid_argument("domain box must have positive extent");
    g.spacing[a] = (box.hi[a] - box.lo[a]) / static_cast<double>(dims[a] - 1);
  }
  return g;
}

/// Scales values to [0,1]; a field with zero range is left untouched.
inline void normalize_min_max(std::vector<double>& values) {
  if (values.empty()) return;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double a = *lo, range = *hi - *lo;
  if (!(range > 0.0)) return;
  for (double& v : values) v = (v - a) / range;
}

template <class Fn>
ScalarGrid evaluate_field(const GridGeometry& g, Fn&& fn, bool normalize = true) {
  std::vector<double> values(g.dims.count());
  for (std::size_t k = 0; k < g.dims.nz; ++k)
    for (std::size_t j = 0; j < g.dims.ny; ++j)
      for (std::size_t i = 0; i < g.dims.nx; ++i) values[g.dims.index(i, j, k)] = fn(g.voxel_position(i, j, k));
  if (normalize) normalize_min_max(values);
  return ScalarGrid(g, std::move(values));
}

inline ScalarGrid sample_field(const FieldSpec& field, Dims dims, const DomainBox& box) {
  return evaluate_field(domain_geometry(dims, box), field);
}

inline ScalarGrid sample_field(const FieldSpec& field, Dims dims) { return sample_field(field, dims, field.default_domain()); }

struct NoiseSpec {
  enum class Kind { Gaussian, Uniform, Bimodal };
  Kind kind = Kind::Gaussian;
  double sigma = 0.0;          // gaussian
  double width = 0.0;          // uniform
  double p_main = 0.8;         // bimodal
  double main_sigma = 0.03;
  double offset = 0.4;
  double outlier_sigma = 0.02;
  std::uint64_t seed = 0;
  std::size_t members = 1;

  void validate() const {
    if (members < 1) throw std::invalid_argument("noise needs at least one member");
    if (!(sigma >= 0.0) || !(width >= 0.0) || !(main_sigma >= 0.0) || !(outlier_sigma >= 0.0))
      throw std::invalid_argument("noise scales must be >= 0");
    if (!(p_main >= 0.0 && p_main <= 1.0)) throw std::invalid_argument("bimodal main probability must lie in [0,1]");
    if (!std::isfinite(offset)) throw std::invalid_argument("bimodal offset must be finite");
  }

  /// gaussian:sigma | uniform:width | bimodal[:p_main,main_sigma,offset,outlier_sigma]
  static NoiseSpec parse(std::string_view text) {
    const auto colon = text.find(':');
    const auto name = text.substr(0, colon);
    const auto args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    const auto v = detail::parse_numbers(args, "noise spec");
    NoiseSpec n;
    if (name == "gaussian" || name == "uniform") {
      if (v.size() != 1) throw std::invalid_argument("noise " + std::string(name) + " needs one parameter");
      n.kind = name == "gaussian" ? Kind::Gaussian : Kind::Uniform;
      (name == "gaussian" ? n.sigma : n.width) = v[0];
    } else if (name == "bimodal") {
      n.kind = Kind::Bimodal;
      if (!v.empty()) {
        if (v.size() != 4) throw std::invalid_argument("noise bimodal takes p_main,main_sigma,offset,outlier_sigma");
        n.p_main = v[0];
        n.main_sigma = v[1];
        n.offset = v[2];
        n.outlier_sigma = v[3];
      }
    } else {
      throw std::invalid_argument("unknown noise '" + std::string(text) + "'");
    }
    n.validate();
    return n;
  }

  std::string str() const {
    switch (kind) {
      case Kind::Gaussian: return "gaussian:" + detail::join_numbers({sigma});
      case Kind::Uniform: return "uniform:" + detail::join_numbers({width});
      case Kind::Bimodal: return "bimodal:" + detail::join_numbers({p_main, main_sigma, offset, outlier_sigma});
    }
    return {};
  }

  double mean() const {
    if (kind == Kind::Bimodal) return (1.0 - p_main) * offset;
    return 0.0;
  }

  /// The noise draw added to voxel `voxel` of member `member`.
  double draw(std::size_t member, std::size_t voxel) const {
    Rng rng(derive_seed(seed, member, voxel));
    switch (kind) {
      case Kind::Gaussian: return sigma > 0.0 ? sigma * rng.normal() : 0.0;
      case Kind::Uniform: return width > 0.0 ? width * (rng.uniform() - 0.5) : 0.0;
      case Kind::Bimodal:
        if (rng.uniform() < p_main) return main_sigma * rng.normal();
        return offset + outlier_sigma * rng.normal();
    }
    return 0.0;
  }
};

/// Members gt + noise. When `mask` is non-empty, only voxels with a nonzero
/// mask entry receive noise.
inline EnsembleVolume make_ensemble(const ScalarGrid& gt, const NoiseSpec& noise, std::span<const std::uint8_t> mask = {},
                                    unsigned threads = 0) {
  noise.validate();
  const std::size_t n = gt.dims().count();
  if (!mask.empty() && mask.size() != n) throw std::invalid_argument("noise mask size does not match the grid");
  std::vector<std::vector<double>> values(noise.members, std::vector<double>(n));
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const bool noisy = mask.empty() || mask[v] != 0;
      for (std::size_t m = 0; m < noise.members; ++m) values[m][v] = gt[v] + (noisy ? noise.draw(m, v) : 0.0);
    }
  });
  std::vector<ScalarGrid> members;
  members.reserve(noise.members);
  for (auto& v : values) members.emplace_back(gt.geometry(), std::move(v));
  return EnsembleVolume(std::move(members));
}

/// Two coupled smooth fields on [-1,1]^3, each normalized to [0,1]:
///   first   exp(-2 |p|^2)
///   second  exp(-2 |w(p)|^2) with w(p) = (x + 0.3 sin(2y) - 0.25, y, 0.8 z)
inline std::pair<ScalarGrid, ScalarGrid> make_bivariate(Dims dims) {
  const GridGeometry g = domain_geometry(dims, {{-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}});
  auto first = evaluate_field(g, [](Vec3 p) { return std::exp(-2.0 * dot(p, p)); });
  auto second = evaluate_field(g, [](Vec3 p) {
    const Vec3 w{p.x + 0.3 * std::sin(2.0 * p.y) - 0.25, p.y, 0.8 * p.z};
    return std::exp(-2.0 * dot(w, w));
  });
  return {std::move(first), std::move(second)};
}

}  // namespace uqdvr
