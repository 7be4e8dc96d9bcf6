#pragma once

// Binary and text file formats for grids, distribution volumes and ensembles.
//
// All binary payloads are little-endian with x-fastest voxel order.
//
// QVOL1 (quantile volumes):
//   "QVOL1" | u32 nx ny nz | f64 spacing[3] | f64 origin[3] | u32 q | f64 qval
//   | f32 boundaries[nx*ny*nz*(q+1)]
//
// DVOL1 (every other model):
//   "DVOL1" | u8 model tag | u32 nx ny nz | f64 spacing[3] | f64 origin[3]
//   | u32 values-per-voxel | f32 payload[nx*ny*nz*values-per-voxel]
//   tags: 0 mean (1 value), 1 uniform (center, width), 2 gaussian (mean,
//   sigma), 3 gmm (weight, mean, sigma per component), 5 samples (m values).

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "uqdvr/volcore.hpp"

namespace uqdvr {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RawEncoding { U8, U16, F32 };

inline std::size_t encoding_width(RawEncoding e) {
  switch (e) {
    case RawEncoding::U8: return 1;
    case RawEncoding::U16: return 2;
    case RawEncoding::F32: return 4;
  }
  return 0;
}

inline RawEncoding parse_encoding(std::string_view s) {
  if (s == "u8") return RawEncoding::U8;
  if (s == "u16") return RawEncoding::U16;
  if (s == "f32") return RawEncoding::F32;
  throw std::invalid_argument("unknown raw encoding '" + std::string(s) + "' (expected u8, u16 or f32)");
}

namespace detail {

template <class T>
void put_le(std::vector<char>& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  buf.insert(buf.end(), bytes.begin(), bytes.end());
}

class Reader {
 public:
  Reader(std::vector<char> data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw IoError(what_ + ": truncated payload");
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    pos_ += sizeof(T);
    return std::bit_cast<T>(bytes);
  }
  std::string magic(std::size_t n) {
    if (pos_ + n > data_.size()) throw IoError(what_ + ": truncated header");
    std::string m(data_.data() + pos_, n);
    pos_ += n;
    return m;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::vector<char> data_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

inline void write_file(const std::filesystem::path& path, const std::vector<char>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline void put_geometry(std::vector<char>& buf, const GridGeometry& g) {
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.dims.nx));
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.dims.ny));
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.dims.nz));
  for (std::size_t a = 0; a < 3; ++a) put_le<double>(buf, g.spacing[a]);
  for (std::size_t a = 0; a < 3; ++a) put_le<double>(buf, g.origin[a]);
}

inline GridGeometry get_geometry(Reader& r) {
  GridGeometry g;
  g.dims.nx = r.get<std::uint32_t>();
  g.dims.ny = r.get<std::uint32_t>();
  g.dims.nz = r.get<std::uint32_t>();
  for (std::size_t a = 0; a < 3; ++a) g.spacing[a] = r.get<double>();
  for (std::size_t a = 0; a < 3; ++a) g.origin[a] = r.get<double>();
  g.validate();
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Raw volumes

/// Reads a headerless raw volume. Integer encodings are normalized to [0,1].
inline ScalarGrid load_raw(const std::filesystem::path& path, const GridGeometry& geometry, RawEncoding encoding) {
  geometry.validate();
  const auto data = detail::read_file(path);
  const std::size_t n = geometry.dims.count();
  const std::size_t width = encoding_width(encoding);
  if (data.size() != n * width)
    throw IoError("'" + path.string() + "' has " + std::to_string(data.size()) + " bytes, expected " +
                  std::to_string(n * width) + " for " + geometry.dims.str());
  detail::Reader r(data, path.string());
  std::vector<double> values(n);
  for (std::size_t v = 0; v < n; ++v) {
    switch (encoding) {
      case RawEncoding::U8: values[v] = static_cast<double>(r.get<std::uint8_t>()) / 255.0; break;
      case RawEncoding::U16: values[v] = static_cast<double>(r.get<std::uint16_t>()) / 65535.0; break;
      case RawEncoding::F32: {
        const float f = r.get<float>();
        if (!std::isfinite(f)) throw IoError("'" + path.string() + "' contains a non-finite value");
        values[v] = f;
        break;
      }
    }
  }
  return ScalarGrid(geometry, std::move(values));
}

/// Writes a headerless raw volume. Integer encodings expect values in [0,1].
inline void save_raw(const ScalarGrid& grid, const std::filesystem::path& path, RawEncoding encoding) {
  std::vector<char> buf;
  buf.reserve(grid.dims().count() * encoding_width(encoding));
  for (double v : grid.values()) {
    switch (encoding) {
      case RawEncoding::U8:
        detail::put_le<std::uint8_t>(buf, static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
        break;
      case RawEncoding::U16:
        detail::put_le<std::uint16_t>(buf,
                                      static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0)));
        break;
      case RawEncoding::F32: detail::put_le<float>(buf, static_cast<float>(v)); break;
    }
  }
  detail::write_file(path, buf);
}

// ---------------------------------------------------------------------------
// Distribution volumes

inline constexpr std::string_view kQvolMagic = "QVOL1";
inline constexpr std::string_view kDvolMagic = "DVOL1";

/// Bytes of the QVOL1 header.
inline constexpr std::size_t kQvolHeaderBytes = 5 + 3 * 4 + 6 * 8 + 4 + 8;

inline void save_qvol(const DistributionVolume& volume, const std::filesystem::path& path) {
  const auto& m = volume.as<QuantileModel>();
  std::vector<char> buf;
  buf.reserve(kQvolHeaderBytes + m.boundaries.size() * 4);
  buf.insert(buf.end(), kQvolMagic.begin(), kQvolMagic.end());
  detail::put_geometry(buf, volume.geometry());
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(m.q));
  detail::put_le<double>(buf, m.qval);
  for (double b : m.boundaries) detail::put_le<float>(buf, static_cast<float>(b));
  detail::write_file(path, buf);
}

namespace detail {

inline DistributionVolume parse_qvol(Reader& r) {
  const GridGeometry g = get_geometry(r);
  const auto q = r.get<std::uint32_t>();
  const auto qval = r.get<double>();
  if (q == 0 || std::abs(static_cast<double>(q) * qval - 1.0) > 1e-9)
    throw IoError("QVOL1 header has q=" + std::to_string(q) + ", qval=" + std::to_string(qval) +
                  " (q*qval must equal 1)");
  const std::size_t count = g.dims.count() * (q + 1);
  if (r.remaining() < count * 4) throw IoError("QVOL1: truncated payload");
  if (r.remaining() > count * 4) throw IoError("QVOL1: trailing bytes after payload");
  QuantileModel m{qval, q, std::vector<double>(count)};
  for (auto& b : m.boundaries) b = r.get<float>();
  try {
    return DistributionVolume(g, std::move(m));
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("QVOL1: ") + e.what());
  }
}

inline DistributionVolume parse_dvol(Reader& r) {
  const auto tag = r.get<std::uint8_t>();
  const GridGeometry g = get_geometry(r);
  const auto per_voxel = r.get<std::uint32_t>();
  const std::size_t n = g.dims.count();
  if (per_voxel == 0) throw IoError("DVOL1: zero values per voxel");
  if (r.remaining() != n * per_voxel * 4) throw IoError("DVOL1: payload size does not match header");
  std::vector<double> raw(n * per_voxel);
  for (auto& v : raw) v = r.get<float>();
  VolumeModel model;
  auto expect = [&](std::uint32_t want) {
    if (per_voxel != want) throw IoError("DVOL1: unexpected values-per-voxel for model tag");
  };
  switch (static_cast<ModelKind>(tag)) {
    case ModelKind::MeanField: expect(1); model = MeanFieldModel{std::move(raw)}; break;
    case ModelKind::Uniform: {
      expect(2);
      UniformModel m{std::vector<UniformParams>(n)};
      for (std::size_t v = 0; v < n; ++v) m.voxels[v] = {raw[2 * v], raw[2 * v + 1]};
      model = std::move(m);
      break;
    }
    case ModelKind::Gaussian: {
      expect(2);
      GaussianModel m{std::vector<GaussianParams>(n)};
      for (std::size_t v = 0; v < n; ++v) m.voxels[v] = {raw[2 * v], raw[2 * v + 1]};
      model = std::move(m);
      break;
    }
    case ModelKind::Gmm: {
      if (per_voxel % 3 != 0) throw IoError("DVOL1: gmm payload must hold 3 values per component");
      GmmVolumeModel m{per_voxel / 3, std::vector<GmmComponent>(n * (per_voxel / 3))};
      for (std::size_t c = 0; c < m.components.size(); ++c)
        m.components[c] = {raw[3 * c], raw[3 * c + 1], raw[3 * c + 2]};
      model = std::move(m);
      break;
    }
    case ModelKind::Samples: model = SampleModel{per_voxel, std::move(raw)}; break;
    default: throw IoError("DVOL1: unknown model tag " + std::to_string(tag));
  }
  try {
    return DistributionVolume(g, std::move(model));
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("DVOL1: ") + e.what());
  }
}

}  // namespace detail

inline DistributionVolume load_qvol(const std::filesystem::path& path) {
  detail::Reader r(detail::read_file(path), path.string());
  if (r.magic(kQvolMagic.size()) != kQvolMagic) throw IoError("'" + path.string() + "' is not a QVOL1 file");
  return detail::parse_qvol(r);
}

/// Saves any distribution volume: QVOL1 for the quantile model, DVOL1 otherwise.
inline void save_volume(const DistributionVolume& volume, const std::filesystem::path& path) {
  if (volume.kind() == ModelKind::Quantile) return save_qvol(volume, path);
  std::vector<char> buf;
  buf.insert(buf.end(), kDvolMagic.begin(), kDvolMagic.end());
  detail::put_le<std::uint8_t>(buf, static_cast<std::uint8_t>(volume.kind()));
  detail::put_geometry(buf, volume.geometry());
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, MeanFieldModel>) {
          detail::put_le<std::uint32_t>(buf, 1);
          for (double v : m.mean) detail::put_le<float>(buf, static_cast<float>(v));
        } else if constexpr (std::is_same_v<M, UniformModel>) {
          detail::put_le<std::uint32_t>(buf, 2);
          for (const auto& u : m.voxels) {
            detail::put_le<float>(buf, static_cast<float>(u.center));
            detail::put_le<float>(buf, static_cast<float>(u.width));
          }
        } else if constexpr (std::is_same_v<M, GaussianModel>) {
          detail::put_le<std::uint32_t>(buf, 2);
          for (const auto& g : m.voxels) {
            detail::put_le<float>(buf, static_cast<float>(g.mean));
            detail::put_le<float>(buf, static_cast<float>(g.sigma));
          }
        } else if constexpr (std::is_same_v<M, GmmVolumeModel>) {
          detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(3 * m.k));
          for (const auto& c : m.components) {
            detail::put_le<float>(buf, static_cast<float>(c.weight));
            detail::put_le<float>(buf, static_cast<float>(c.mean));
            detail::put_le<float>(buf, static_cast<float>(c.sigma));
          }
        } else if constexpr (std::is_same_v<M, SampleModel>) {
          detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(m.m));
          for (double v : m.samples) detail::put_le<float>(buf, static_cast<float>(v));
        }
      },
      volume.model());
  detail::write_file(path, buf);
}

/// Loads a QVOL1 or DVOL1 file, dispatching on the magic.
inline DistributionVolume load_volume(const std::filesystem::path& path) {
  detail::Reader r(detail::read_file(path), path.string());
  const std::string magic = r.magic(5);
  if (magic == kQvolMagic) return detail::parse_qvol(r);
  if (magic == kDvolMagic) return detail::parse_dvol(r);
  throw IoError("'" + path.string() + "' is neither a QVOL1 nor a DVOL1 file");
}

// ---------------------------------------------------------------------------
// Ensembles: one f32 raw file per member plus a key=value manifest.

struct EnsembleManifest {
  GridGeometry geometry;
  std::size_t members = 0;
  std::uint64_t seed = 0;
  std::string field;
  std::string noise;
  std::vector<std::string> files;  // relative to the manifest directory
};

inline std::string format_vec3(Vec3 v) {
  std::ostringstream os;
  os.precision(17);
  os << v.x << ',' << v.y << ',' << v.z;
  return os.str();
}

inline Vec3 parse_vec3(std::string_view s) {
  Vec3 v;
  std::string tmp(s);
  std::replace(tmp.begin(), tmp.end(), ',', ' ');
  std::istringstream is(tmp);
  if (!(is >> v.x >> v.y >> v.z)) throw std::invalid_argument("expected three comma-separated numbers, got '" + std::string(s) + "'");
  std::string rest;
  if (is >> rest) throw std::invalid_argument("trailing text in vector '" + std::string(s) + "'");
  return v;
}

inline Dims parse_dims(std::string_view s) {
  std::string tmp(s);
  std::replace(tmp.begin(), tmp.end(), 'x', ' ');
  std::replace(tmp.begin(), tmp.end(), ',', ' ');
  std::istringstream is(tmp);
  long long a = 0, b = 0, c = 0;
  if (!(is >> a >> b >> c) || a <= 0 || b <= 0 || c <= 0)
    throw std::invalid_argument("expected dims like 64x64x64, got '" + std::string(s) + "'");
  std::string rest;
  if (is >> rest) throw std::invalid_argument("trailing text in dims '" + std::string(s) + "'");
  return {static_cast<std::size_t>(a), static_cast<std::size_t>(b), static_cast<std::size_t>(c)};
}

inline void save_ensemble(const EnsembleVolume& ensemble, const std::filesystem::path& manifest_path,
                          std::uint64_t seed, std::string_view field, std::string_view noise) {
  const auto dir = manifest_path.parent_path();
  const std::string stem = manifest_path.stem().string();
  std::ostringstream os;
  const auto& g = ensemble.geometry();
  os << "format=uqdvr-ensemble-1\n"
     << "members=" << ensemble.size() << '\n'
     << "dims=" << g.dims.str() << '\n'
     << "spacing=" << format_vec3(g.spacing) << '\n'
     << "origin=" << format_vec3(g.origin) << '\n'
     << "seed=" << seed << '\n'
     << "field=" << field << '\n'
     << "noise=" << noise << '\n'
     << "encoding=f32\n";
  for (std::size_t m = 0; m < ensemble.size(); ++m) {
    std::ostringstream name;
    name << stem << ".member" << std::setw(4) << std::setfill('0') << m << ".f32";
    save_raw(ensemble.member(m), dir / name.str(), RawEncoding::F32);
    os << "file=" << name.str() << '\n';
  }
  const std::string text = os.str();
  detail::write_file(manifest_path, std::vector<char>(text.begin(), text.end()));
}

inline EnsembleManifest read_ensemble_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open ensemble manifest '" + manifest_path.string() + "'");
  EnsembleManifest man;
  std::string line;
  bool have_dims = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed manifest line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "members") man.members = std::stoul(value);
    else if (key == "dims") { man.geometry.dims = parse_dims(value); have_dims = true; }
    else if (key == "spacing") man.geometry.spacing = parse_vec3(value);
    else if (key == "origin") man.geometry.origin = parse_vec3(value);
    else if (key == "seed") man.seed = std::stoull(value);
    else if (key == "field") man.field = value;
    else if (key == "noise") man.noise = value;
    else if (key == "file") man.files.push_back(value);
    else if (key == "format" || key == "encoding") continue;
    else throw IoError("unknown manifest key '" + key + "'");
  }
  if (!have_dims) throw IoError("ensemble manifest lacks dims");
  if (man.files.size() != man.members || man.members == 0)
    throw IoError("ensemble manifest lists " + std::to_string(man.files.size()) + " files for " +
                  std::to_string(man.members) + " members");
  return man;
}

inline EnsembleVolume load_ensemble(const std::filesystem::path& manifest_path) {
  const auto man = read_ensemble_manifest(manifest_path);
  std::vector<ScalarGrid> members;
  members.reserve(man.members);
  for (const auto& f : man.files) members.push_back(load_raw(manifest_path.parent_path() / f, man.geometry, RawEncoding::F32));
  return EnsembleVolume(std::move(members));
}

}  // namespace uqdvr
