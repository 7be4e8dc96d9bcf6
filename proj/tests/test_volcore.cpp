#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "uqdvr/io.hpp"
#include "uqdvr/volcore.hpp"

namespace fs = std::filesystem;
using namespace uqdvr;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "uqdvr_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

GridGeometry geom(std::size_t nx, std::size_t ny, std::size_t nz) {
  GridGeometry g;
  g.dims = {nx, ny, nz};
  return g;
}

DistributionVolume random_quantile_volume(Dims dims, std::size_t q, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QuantileModel m{1.0 / static_cast<double>(q), q, {}};
  for (std::size_t v = 0; v < dims.count(); ++v) {
    double x = u(gen) * 2.0 - 1.0;
    for (std::size_t j = 0; j <= q; ++j) {
      m.boundaries.push_back(x);
      x += u(gen) < 0.2 ? 0.0 : 0.1 * u(gen);
    }
  }
  GridGeometry g;
  g.dims = dims;
  g.spacing = {0.5, 1.0, 2.0};
  g.origin = {-1.0, 0.25, 3.0};
  return DistributionVolume(g, std::move(m));
}

}  // namespace

TEST(LoadRaw, ZeroF32Volume) {
  const auto p = temp_path("zeros.f32");
  write_bytes(p, std::vector<unsigned char>(8 * 4, 0));
  const auto grid = load_raw(p, geom(2, 2, 2), RawEncoding::F32);
  ASSERT_EQ(grid.values().size(), 8u);
  for (double v : grid.values()) EXPECT_EQ(v, 0.0);
}

TEST(LoadRaw, U8EndpointsNormalize) {
  const auto p = temp_path("endpoints.u8");
  write_bytes(p, {0, 255});
  const auto grid = load_raw(p, geom(2, 1, 1), RawEncoding::U8);
  EXPECT_EQ(grid[0], 0.0);
  EXPECT_EQ(grid[1], 1.0);
}

TEST(LoadRaw, U16RoundTripIsBitExact) {
  std::vector<double> values;
  for (int i = 0; i < 27; ++i) values.push_back(static_cast<double>(i * 2300) / 65535.0);
  const ScalarGrid grid(geom(3, 3, 3), values);
  const auto p = temp_path("rt.u16");
  save_raw(grid, p, RawEncoding::U16);
  EXPECT_EQ(fs::file_size(p), 27u * 2u);
  const auto back = load_raw(p, geom(3, 3, 3), RawEncoding::U16);
  EXPECT_EQ(back, grid);
}

TEST(LoadRaw, U16IsLittleEndian) {
  const auto p = temp_path("le.u16");
  write_bytes(p, {0xFF, 0x00, 0x00, 0xFF});
  const auto grid = load_raw(p, geom(2, 1, 1), RawEncoding::U16);
  EXPECT_DOUBLE_EQ(grid[0], 255.0 / 65535.0);
  EXPECT_DOUBLE_EQ(grid[1], 65280.0 / 65535.0);
}

TEST(LoadRaw, Errors) {
  const auto p = temp_path("short.f32");
  write_bytes(p, std::vector<unsigned char>(7 * 4, 0));
  EXPECT_THROW(load_raw(p, geom(2, 2, 2), RawEncoding::F32), IoError);
  EXPECT_THROW(load_raw(temp_path("missing.f32"), geom(2, 2, 2), RawEncoding::F32), IoError);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::vector<unsigned char> bytes(8);
  std::memcpy(bytes.data() + 4, &nan, 4);
  const auto q = temp_path("nan.f32");
  write_bytes(q, bytes);
  EXPECT_THROW(load_raw(q, geom(2, 1, 1), RawEncoding::F32), IoError);
  EXPECT_THROW(parse_encoding("f64"), std::invalid_argument);
}

TEST(Qvol, RoundTripAtF32Precision) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto vol = random_quantile_volume({3, 4, 5}, 1 + seed * 3, seed);
    const auto p = temp_path("rt.qvol");
    save_qvol(vol, p);
    const auto back = load_qvol(p);
    EXPECT_EQ(back.geometry(), vol.geometry());
    const auto& a = vol.as<QuantileModel>();
    const auto& b = back.as<QuantileModel>();
    EXPECT_EQ(a.q, b.q);
    EXPECT_EQ(a.qval, b.qval);
    ASSERT_EQ(a.boundaries.size(), b.boundaries.size());
    for (std::size_t i = 0; i < a.boundaries.size(); ++i)
      EXPECT_EQ(static_cast<float>(a.boundaries[i]), b.boundaries[i]);
  }
}

TEST(Qvol, PayloadSizeFollowsFormat) {
  QuantileModel m{0.125, 8, std::vector<double>(64 * 64 * 64 * 9, 0.5)};
  GridGeometry g;
  g.dims = {64, 64, 64};
  const auto p = temp_path("size.qvol");
  save_qvol(DistributionVolume(g, std::move(m)), p);
  EXPECT_EQ(fs::file_size(p), kQvolHeaderBytes + 64u * 64u * 64u * 9u * 4u);
}

TEST(Qvol, RejectsInconsistentHeaderAndPayload) {
  const auto vol = random_quantile_volume({2, 2, 2}, 4, 9);
  const auto p = temp_path("bad.qvol");
  save_qvol(vol, p);
  std::ifstream in(p, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  // qval field sits right after the u32 q; rewrite it to 0.3 with q=4.
  auto patched = bytes;
  const double bad_qval = 0.3;
  std::memcpy(patched.data() + kQvolHeaderBytes - 8, &bad_qval, 8);
  const auto p1 = temp_path("bad_qval.qvol");
  write_bytes(p1, {patched.begin(), patched.end()});
  EXPECT_THROW(load_qvol(p1), IoError);

  auto magic = bytes;
  magic[4] = '2';
  const auto p2 = temp_path("bad_magic.qvol");
  write_bytes(p2, {magic.begin(), magic.end()});
  EXPECT_THROW(load_qvol(p2), IoError);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  const auto p3 = temp_path("truncated.qvol");
  write_bytes(p3, {truncated.begin(), truncated.end()});
  EXPECT_THROW(load_qvol(p3), IoError);

  auto nonmono = bytes;
  const float big = 100.0f;
  std::memcpy(nonmono.data() + kQvolHeaderBytes, &big, 4);  // b_0 of voxel 0 above b_1
  const auto p4 = temp_path("nonmono.qvol");
  write_bytes(p4, {nonmono.begin(), nonmono.end()});
  EXPECT_THROW(load_qvol(p4), IoError);
}

TEST(Dvol, RoundTripEveryParametricModel) {
  GridGeometry g;
  g.dims = {2, 3, 1};
  g.spacing = {0.25, 0.5, 1.0};
  std::vector<DistributionVolume> vols;
  vols.emplace_back(g, MeanFieldModel{{0, 0.125, 0.25, 0.5, 0.75, 1}});
  vols.emplace_back(g, UniformModel{std::vector<UniformParams>(6, {0.5, 0.25})});
  vols.emplace_back(g, GaussianModel{std::vector<GaussianParams>(6, {0.5, 0.125})});
  std::vector<GmmComponent> comps;
  for (int v = 0; v < 6; ++v) {
    comps.push_back({0.25, 0.0, 0.5});
    comps.push_back({0.75, 1.0, 0.25});
  }
  vols.emplace_back(g, GmmVolumeModel{2, comps});
  vols.emplace_back(g, SampleModel{3, std::vector<double>(18, 0.375)});
  for (const auto& v : vols) {
    const auto p = temp_path("rt.dvol");
    save_volume(v, p);
    EXPECT_EQ(load_volume(p), v) << to_string(v.kind());
  }
}

TEST(VoxelPdf, UniformQuartiles) {
  GridGeometry g;
  g.dims = {1, 1, 1};
  const DistributionVolume v(g, UniformModel{{{0.5, 1.0}}});
  const auto pdf = voxel_pdf(v, 0, 0.25);
  const std::vector<double> expect{0.0, 0.25, 0.5, 0.75, 1.0};
  ASSERT_EQ(pdf.boundaries.size(), expect.size());
  for (std::size_t j = 0; j < expect.size(); ++j) EXPECT_DOUBLE_EQ(pdf.boundaries[j], expect[j]);
}

TEST(VoxelPdf, GaussianMedianAndTailClamp) {
  GridGeometry g;
  g.dims = {1, 1, 1};
  const DistributionVolume v(g, GaussianModel{{{0.0, 1.0}}});
  const auto pdf = voxel_pdf(v, 0, 0.5);
  ASSERT_EQ(pdf.boundaries.size(), 3u);
  EXPECT_DOUBLE_EQ(pdf.boundaries[0], -kGaussianTailSigmas);
  EXPECT_NEAR(pdf.boundaries[1], 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(pdf.boundaries[2], kGaussianTailSigmas);
}

TEST(VoxelPdf, SamplesUseInclusiveQuantiles) {
  GridGeometry g;
  g.dims = {1, 1, 1};
  const DistributionVolume v(g, SampleModel{4, {3, 1, 4, 2}});
  const auto pdf = voxel_pdf(v, 0, 0.25);
  const std::vector<double> expect{1.0, 1.75, 2.5, 3.25, 4.0};
  for (std::size_t j = 0; j < expect.size(); ++j) {
    EXPECT_DOUBLE_EQ(pdf.boundaries[j], expect[j]);
    EXPECT_DOUBLE_EQ(pdf.boundaries[j], oracle::order_statistic_quantile({1, 2, 3, 4}, 0.25 * j));
  }
}

TEST(VoxelPdf, ZeroVarianceModelsGiveEqualBoundaries) {
  GridGeometry g;
  g.dims = {1, 1, 1};
  for (const auto& v : {DistributionVolume(g, GaussianModel{{{0.3, 0.0}}}), DistributionVolume(g, UniformModel{{{0.3, 0.0}}}),
                        DistributionVolume(g, GmmVolumeModel{1, {{1.0, 0.3, 0.0}}}),
                        DistributionVolume(g, MeanFieldModel{{0.3}})}) {
    const auto pdf = voxel_pdf(v, 0, 0.125);
    for (double b : pdf.boundaries) EXPECT_EQ(b, 0.3) << to_string(v.kind());
    EXPECT_DOUBLE_EQ(pdf.density(0), 0.125 / kWidthFloor);
  }
}

TEST(VoxelPdf, GmmQuantilesInvertTheMixtureCdf) {
  GridGeometry g;
  g.dims = {1, 1, 1};
  const GmmModel gmm{{{0.3, -1.0, 0.5}, {0.7, 2.0, 0.25}}};
  const DistributionVolume v(g, GmmVolumeModel{2, gmm.components});
  const auto pdf = voxel_pdf(v, 0, 0.1);
  for (std::size_t j = 1; j < 10; ++j) EXPECT_NEAR(gmm.cdf(pdf.boundaries[j]), 0.1 * j, 1e-9);
}

TEST(VoxelPdf, OutOfBoundsIndexThrows) {
  GridGeometry g;
  g.dims = {2, 2, 2};
  const DistributionVolume v(g, MeanFieldModel{std::vector<double>(8, 0.0)});
  EXPECT_THROW(voxel_pdf(v, 8), std::out_of_range);
  EXPECT_THROW(voxel_pdf(v, 2, 0, 0), std::out_of_range);
}

TEST(QuantilePdfInvariants, EveryProducerYieldsMonotoneUnitMass) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double qval = 1.0 / static_cast<double>(1 + trial % 16);
    std::vector<QuantilePdf> pdfs;
    pdfs.push_back(uniform_quantiles({u(gen), u(gen)}, qval));
    pdfs.push_back(gaussian_quantiles({u(gen), u(gen)}, qval));
    pdfs.push_back(gmm_quantiles({{{0.5, u(gen), u(gen) + 0.01}, {0.5, u(gen), u(gen) + 0.01}}}, qval));
    std::vector<double> s(5 + trial % 7);
    for (auto& x : s) x = u(gen);
    pdfs.push_back(empirical_quantiles(s, qval));
    for (const auto& pdf : pdfs) {
      EXPECT_NO_THROW(pdf.validate());
      double mass = 0.0;
      for (std::size_t j = 0; j < pdf.pieces(); ++j) mass += pdf.density(j) * std::max(pdf.width(j), kWidthFloor);
      EXPECT_NEAR(mass, 1.0, 1e-9);
    }
  }
}

TEST(DistributionVolumeValidation, RejectsBadPayloads) {
  GridGeometry g;
  g.dims = {1, 1, 1};
  EXPECT_THROW(DistributionVolume(g, GaussianModel{{{0.0, -1.0}}}), std::invalid_argument);
  EXPECT_THROW(DistributionVolume(g, GmmVolumeModel{2, {{0.5, 0, 1}, {0.4, 1, 1}}}), std::invalid_argument);
  EXPECT_THROW(DistributionVolume(g, QuantileModel{0.5, 2, {0.0, 1.0, 0.5}}), std::invalid_argument);
  EXPECT_THROW(DistributionVolume(g, QuantileModel{0.3, 4, {0, 1, 2, 3, 4}}), std::invalid_argument);
  EXPECT_THROW(DistributionVolume(g, MeanFieldModel{{0.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(DistributionVolume(g, UniformModel{{{0.0, -0.1}}}), std::invalid_argument);
}

TEST(EnsembleVolume, RejectsIncongruentMembers) {
  EXPECT_THROW(EnsembleVolume(std::vector<ScalarGrid>{}), std::invalid_argument);
  EXPECT_THROW(EnsembleVolume({ScalarGrid(geom(2, 2, 2)), ScalarGrid(geom(2, 2, 3))}), std::invalid_argument);
}

TEST(ScalarGrid, TrilinearSampleReproducesLinearField) {
  GridGeometry g;
  g.dims = {4, 5, 6};
  g.spacing = {0.5, 0.25, 2.0};
  g.origin = {1.0, -1.0, 0.0};
  std::vector<double> v(g.dims.count());
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t i = 0; i < 4; ++i) {
        const Vec3 p = g.voxel_position(i, j, k);
        v[g.dims.index(i, j, k)] = 2.0 * p.x - p.y + 0.5 * p.z;
      }
  const ScalarGrid grid(g, v);
  std::mt19937_64 gen(5);
  for (int t = 0; t < 100; ++t) {
    const Vec3 p{1.0 + 1.5 * std::generate_canonical<double, 53>(gen), -1.0 + std::generate_canonical<double, 53>(gen),
                 10.0 * std::generate_canonical<double, 53>(gen)};
    EXPECT_NEAR(grid.sample(p), 2.0 * p.x - p.y + 0.5 * p.z, 1e-12);
  }
}
