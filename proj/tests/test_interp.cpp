#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "uqdvr/interp.hpp"
#include "uqdvr/stats.hpp"

using namespace uqdvr;

namespace {

QuantilePdf random_pdf(std::mt19937_64& gen, std::size_t q, double zero_width_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QuantilePdf pdf{1.0 / static_cast<double>(q), {}};
  double x = 4.0 * u(gen) - 2.0;
  for (std::size_t j = 0; j <= q; ++j) {
    pdf.boundaries.push_back(x);
    x += u(gen) < zero_width_prob ? 0.0 : 0.01 + u(gen);
  }
  return pdf;
}

std::array<QuantilePdf, 8> random_corners(std::mt19937_64& gen, std::size_t q, double zero_width_prob = 0.0) {
  std::array<QuantilePdf, 8> c;
  for (auto& p : c) p = random_pdf(gen, q, zero_width_prob);
  return c;
}

}  // namespace

TEST(QuantileInterp1d, EndpointIdentity) {
  std::mt19937_64 gen(1);
  const auto a = random_pdf(gen, 6), b = random_pdf(gen, 6);
  EXPECT_EQ(quantile_interp_1d(a, b, 0.0), a);
  EXPECT_EQ(quantile_interp_1d(a, b, 1.0), b);
}

TEST(QuantileInterp1d, WidthsBlendLinearly) {
  const QuantilePdf a{0.25, {0, 2, 4, 6, 8}};
  const QuantilePdf b{0.25, {0, 4, 8, 12, 16}};
  const auto out = quantile_interp_1d(a, b, 0.5);
  EXPECT_DOUBLE_EQ(out.width(0), 3.0);
  EXPECT_DOUBLE_EQ(out.density(0), 0.25 / 3.0);
}

TEST(QuantileInterp1d, GaussianShapeIsPreserved) {
  const auto a = gaussian_quantiles({0.0, 1.0}, 0.001);
  const auto b = gaussian_quantiles({10.0, 1.0}, 0.001);
  const auto out = quantile_interp_1d(a, b, 0.3);
  double worst = 0.0;
  for (std::size_t j = 1; j < out.pieces(); ++j)
    worst = std::max(worst, std::abs(out.boundaries[j] - (3.0 + stats::normal_quantile(j * 0.001))));
  EXPECT_LT(worst, 0.02);
}

TEST(QuantileInterp1d, MismatchedQThrows) {
  EXPECT_THROW(quantile_interp_1d(QuantilePdf{0.5, {0, 1, 2}}, QuantilePdf{0.25, {0, 1, 2, 3, 4}}, 0.5),
               std::invalid_argument);
}

TEST(QuantileInterp3d, VertexRecoveryAtAllCorners) {
  std::mt19937_64 gen(2);
  const auto corners = random_corners(gen, 10);
  for (unsigned c = 0; c < 8; ++c) {
    const auto out = quantile_interp_3d(corners, (c & 1) ? 1.0 : 0.0, (c & 2) ? 1.0 : 0.0, (c & 4) ? 1.0 : 0.0);
    EXPECT_EQ(out, corners[c]) << "corner " << c;
  }
}

TEST(QuantileInterp3d, IdenticalCornersAreConstant) {
  std::mt19937_64 gen(3);
  const auto p = random_pdf(gen, 7);
  std::array<QuantilePdf, 8> corners;
  corners.fill(p);
  const auto out = quantile_interp_3d(corners, 0.3, 0.6, 0.9);
  for (std::size_t j = 0; j < p.boundaries.size(); ++j) EXPECT_NEAR(out.boundaries[j], p.boundaries[j], 1e-12);
}

TEST(QuantileInterp3d, RationalFormAgreesWithBoundaryBlend) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto corners = random_corners(gen, 1 + trial % 12);
    const double a = u(gen), b = u(gen), g = u(gen);
    const auto blend = quantile_interp_3d(corners, a, b, g);
    const auto rational = quantile_interp_3d_rational(corners, a, b, g);
    for (std::size_t j = 0; j < rational.size(); ++j)
      worst = std::max(worst, std::abs(rational[j] - blend.density(j)) / blend.density(j));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(QuantileInterp3d, RationalFormFloorsZeroWidthPieces) {
  std::mt19937_64 gen(5);
  const auto corners = random_corners(gen, 6, 0.5);
  const auto r = quantile_interp_3d_rational(corners, 0.2, 0.7, 0.4);
  for (double d : r) EXPECT_TRUE(std::isfinite(d) && d > 0.0);
}

TEST(QuantileInterp3d, SeparabilityAlongX) {
  std::mt19937_64 gen(6);
  const auto a = random_pdf(gen, 9), b = random_pdf(gen, 9);
  std::array<QuantilePdf, 8> corners;
  for (unsigned c = 0; c < 8; ++c) corners[c] = (c & 1) ? b : a;
  const auto out = quantile_interp_3d(corners, 0.37, 0.0, 0.0);
  const auto ref = quantile_interp_1d(a, b, 0.37);
  for (std::size_t j = 0; j < ref.boundaries.size(); ++j) EXPECT_NEAR(out.boundaries[j], ref.boundaries[j], 1e-12);
}

TEST(QuantileInterp3d, MonotonicityAndWidthFloorProperties) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto corners = random_corners(gen, 1 + trial % 16, 0.2);
    const auto out = quantile_interp_3d(corners, u(gen), u(gen), u(gen));
    EXPECT_NO_THROW(out.validate());
    for (std::size_t j = 0; j < out.pieces(); ++j) {
      double min_w = corners[0].width(j);
      for (const auto& c : corners) min_w = std::min(min_w, c.width(j));
      EXPECT_GE(out.width(j), min_w - 1e-12);
    }
  }
}

TEST(QuantileInterp3d, ShiftedCopiesKeepTheirShape) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto base = random_pdf(gen, 12);
    std::array<QuantilePdf, 8> corners;
    for (auto& c : corners) {
      c = base;
      const double shift = u(gen);
      for (auto& b : c.boundaries) b += shift;
    }
    const auto out = quantile_interp_3d(corners, 0.5 + 0.1 * u(gen), 0.5, 0.2);
    const double offset = out.boundaries[0] - base.boundaries[0];
    for (std::size_t j = 0; j < base.boundaries.size(); ++j)
      EXPECT_NEAR(out.boundaries[j] - base.boundaries[j], offset, 1e-9);
  }
}

TEST(QuantileInterp3d, MismatchedQThrows) {
  std::mt19937_64 gen(9);
  auto corners = random_corners(gen, 4);
  corners[5] = random_pdf(gen, 5);
  EXPECT_THROW(quantile_interp_3d(corners, 0.5, 0.5, 0.5), std::invalid_argument);
}

TEST(McOracle, ConstantCornersAndDeterminism) {
  const std::vector<std::vector<double>> sets(8, std::vector<double>(3, 0.25));
  const auto w = trilinear_weights(0.3, 0.6, 0.1);
  for (double x : mc_oracle_interp(sets, w, 10000, 1)) EXPECT_NEAR(x, 0.25, 1e-15);
  std::mt19937_64 gen(1);
  std::vector<std::vector<double>> rs(8);
  for (auto& s : rs) s = oracle::draw_normal(100, 0.0, 1.0, gen());
  EXPECT_EQ(mc_oracle_interp(rs, w, 10000, 5), mc_oracle_interp(rs, w, 10000, 5));
  EXPECT_THROW(mc_oracle_interp(std::vector<std::vector<double>>(8), w, 10, 1), std::invalid_argument);
}

TEST(McOracle, OneHotWeightsReproduceTheCorner) {
  std::vector<std::vector<double>> sets(8);
  std::mt19937_64 gen(2);
  for (auto& s : sets) s = oracle::draw_normal(1000000, 0.0, 1.0, gen());
  std::array<double, 8> w{};
  w[3] = 1.0;
  auto corner = sets[3];
  std::sort(corner.begin(), corner.end());
  EXPECT_LT(oracle::ks_two_sample(mc_oracle_interp(sets, w, 1000000, 7), corner), 0.01);
}

TEST(InterpGaussian, Examples) {
  const std::vector<GaussianParams> zero{{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}, {6, 0}, {7, 0}};
  const auto w = trilinear_weights(0.25, 0.5, 0.75);
  const auto g = interp_gaussian(zero, w);
  double mu = 0.0;
  for (int i = 0; i < 8; ++i) mu += w[i] * i;
  EXPECT_EQ(g.sigma, 0.0);
  EXPECT_NEAR(g.mean, mu, 1e-15);

  std::vector<GaussianParams> c{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {7, 8}};
  std::array<double, 8> onehot{};
  onehot[6] = 1.0;
  EXPECT_EQ(interp_gaussian(c, onehot), c[6]);

  const std::vector<GaussianParams> unit(8, {0.0, 1.0});
  const std::vector<double> eq(8, 0.125);
  EXPECT_NEAR(interp_gaussian(unit, eq).sigma, 1.0 / std::sqrt(8.0), 1e-15);
}

TEST(InterpUniform, AllZeroWidthsGiveASpike) {
  const std::vector<UniformParams> c(8, {0.4, 0.0});
  const auto w = trilinear_weights(0.1, 0.2, 0.3);
  const auto d = interp_uniform(c, w);
  ASSERT_EQ(d.density.size(), 1u);
  EXPECT_NEAR(d.center(0), 0.4, 1e-12);
  EXPECT_NEAR(d.mass(), 1.0, 1e-9);
}

TEST(InterpUniform, TwoHalvesMakeATriangle) {
  const std::vector<UniformParams> c{{0.5, 1.0}, {0.5, 1.0}};
  const std::vector<double> w{0.5, 0.5};
  const auto d = interp_uniform(c, w, 256);
  EXPECT_NEAR(d.start, 0.0, 1e-12);
  EXPECT_NEAR(d.start + d.step * d.density.size(), 1.0, 1e-12);
  for (std::size_t k = 0; k < d.density.size(); ++k) {
    // Cell average of the triangle 4x on [0,.5], 4(1-x) on [.5,1].
    const double a = d.start + k * d.step, b = a + d.step;
    auto F = [](double x) { return x <= 0.5 ? 2.0 * x * x : 1.0 - 2.0 * (1.0 - x) * (1.0 - x); };
    EXPECT_NEAR(d.density[k], (F(b) - F(a)) / d.step, 1e-9) << k;
  }
}

TEST(InterpUniform, ZeroWidthFactorsShift) {
  const std::vector<UniformParams> c{{0.5, 1.0}, {2.0, 0.0}};
  const std::vector<double> w{0.5, 0.5};
  const auto d = interp_uniform(c, w, 64);
  EXPECT_NEAR(d.mean(), 0.25 + 1.0, 1e-12);
  EXPECT_NEAR(d.start, 1.0, 1e-12);
  for (double x : d.density) EXPECT_NEAR(x, 2.0, 1e-9);
}

TEST(InterpUniform, EightEqualFactorsMatchMonteCarlo) {
  const std::vector<UniformParams> c(8, {0.5, 1.0});
  const std::vector<double> w(8, 0.125);
  const auto d = interp_uniform(c, w, 512);
  std::vector<std::vector<double>> sets(8);
  std::mt19937_64 gen(3);
  for (auto& s : sets) s = oracle::draw_uniform(100000, 0.0, 1.0, gen());
  const auto mc = mc_oracle_interp(sets, w, 200000, 9);
  EXPECT_LT(oracle::ks_to_cdf(mc, [&](double x) { return d.cdf(x); }), 0.02);
  EXPECT_NEAR(d.mass(), 1.0, 1e-9);
}

TEST(InterpGmmOrdered, IdenticalCornersRoundTrip) {
  const GmmModel g{{{0.3, -1.0, 0.5}, {0.7, 2.0, 0.25}}};
  const std::vector<GmmModel> corners(8, g);
  const std::vector<double> w(8, 0.125);
  const auto out = interp_gmm_ordered(corners, w);
  ASSERT_EQ(out.k(), 2u);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_NEAR(out.components[r].weight, g.components[r].weight, 1e-12);
    EXPECT_NEAR(out.components[r].mean, g.components[r].mean, 1e-12);
    // Variance of a weighted average of independent copies: sum w^2 sigma^2.
    EXPECT_NEAR(out.components[r].sigma, g.components[r].sigma / std::sqrt(8.0), 1e-12);
  }
}

TEST(InterpGmmOrdered, SingleComponentIsGaussianInterp) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<GmmModel> corners;
  std::vector<GaussianParams> gs;
  for (int i = 0; i < 8; ++i) {
    gs.push_back({u(gen), u(gen)});
    corners.push_back({{{1.0, gs.back().mean, gs.back().sigma}}});
  }
  const auto w = trilinear_weights(u(gen), u(gen), u(gen));
  const auto a = interp_gmm_ordered(corners, w);
  const auto b = interp_gaussian(gs, w);
  EXPECT_NEAR(a.components[0].mean, b.mean, 1e-15);
  EXPECT_NEAR(a.components[0].sigma, b.sigma, 1e-15);
  EXPECT_NEAR(a.components[0].weight, 1.0, 1e-15);
}

TEST(InterpGmmOrdered, ComponentOrderDoesNotMatter) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<GmmModel> a, b;
  for (int i = 0; i < 8; ++i) {
    const GmmComponent c0{0.4, u(gen), u(gen)}, c1{0.6, 2.0 + u(gen), u(gen)};
    a.push_back({{c0, c1}});
    b.push_back({{c1, c0}});
  }
  const auto w = trilinear_weights(0.2, 0.4, 0.6);
  EXPECT_EQ(interp_gmm_ordered(a, w), interp_gmm_ordered(b, w));
}

TEST(InterpGmmOrdered, MismatchedKThrows) {
  std::vector<GmmModel> c(8, GmmModel{{{1.0, 0.0, 1.0}}});
  c[2] = GmmModel{{{0.5, 0.0, 1.0}, {0.5, 1.0, 1.0}}};
  EXPECT_THROW(interp_gmm_ordered(c, std::vector<double>(8, 0.125)), std::invalid_argument);
}

TEST(SampleGmmMc, DegenerateAndDeterministic) {
  std::vector<GmmModel> c;
  for (int i = 0; i < 8; ++i) c.push_back({{{1.0, 0.1 * i, 0.0}}});
  const auto w = trilinear_weights(0.3, 0.3, 0.3);
  double mu = 0.0;
  for (int i = 0; i < 8; ++i) mu += w[i] * 0.1 * i;
  for (double x : sample_gmm_mc(c, w, 1000, 1)) EXPECT_NEAR(x, mu, 1e-15);
  std::vector<GmmModel> g(8, GmmModel{{{0.5, 0.0, 1.0}, {0.5, 3.0, 0.5}}});
  EXPECT_EQ(sample_gmm_mc(g, w, 1000, 2), sample_gmm_mc(g, w, 1000, 2));
}

TEST(SampleGmmMc, SingleComponentMatchesClosedForm) {
  std::vector<GmmModel> c;
  std::vector<GaussianParams> gs;
  for (int i = 0; i < 8; ++i) {
    gs.push_back({0.1 * i, 0.05 + 0.02 * i});
    c.push_back({{{1.0, gs.back().mean, gs.back().sigma}}});
  }
  const auto w = trilinear_weights(0.4, 0.7, 0.2);
  const auto g = interp_gaussian(gs, w);
  const auto s = sample_gmm_mc(c, w, 1000000, 3);
  EXPECT_LT(oracle::ks_to_cdf(s, [&](double x) { return stats::normal_cdf((x - g.mean) / g.sigma); }), 0.01);
}

TEST(Locate, CellsAndBounds) {
  GridGeometry g;
  g.dims = {4, 3, 2};
  g.spacing = {0.5, 1.0, 2.0};
  g.origin = {1.0, 0.0, -1.0};
  const auto tc = locate(g, {1.75, 1.5, 0.0});
  ASSERT_TRUE(tc);
  EXPECT_EQ(tc->base, (std::array<std::size_t, 3>{1, 1, 0}));
  EXPECT_NEAR(tc->alpha, 0.5, 1e-12);
  EXPECT_NEAR(tc->beta, 0.5, 1e-12);
  EXPECT_NEAR(tc->gamma, 0.5, 1e-12);
  const auto far = locate(g, {2.5, 2.0, 1.0});
  ASSERT_TRUE(far);
  EXPECT_EQ(far->base, (std::array<std::size_t, 3>{2, 1, 0}));
  EXPECT_DOUBLE_EQ(far->alpha, 1.0);
  EXPECT_FALSE(locate(g, {0.99, 1.0, 0.0}));
  EXPECT_FALSE(locate(g, {1.5, 1.0, 1.01}));
}

TEST(TrilinearWeights, PartitionOfUnity) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const auto w = trilinear_weights(u(gen), u(gen), u(gen));
    double s = 0.0;
    for (double x : w) {
      EXPECT_GE(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}
