#include <gtest/gtest.h>

#include <cmath>

#include "confound/ct.hpp"
#include "support.hpp"

namespace confound {
namespace {

Image rotate90(const Image& f) {
  const std::size_t n = f.width();
  Image g(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) g.at(r, c) = f.at(n - 1 - c, r);
  return g;
}

double sample_variance(std::span<const double> v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

Image difference(const Image& a, const Image& b) {
  Image d = a;
  for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] -= b.data()[i];
  return d;
}

TEST(Geometry, CoveringIsOddAndSeesTheDiagonal) {
  const auto g = ProjectionGeometry::covering(64, 48, 90);
  EXPECT_EQ(g.n_detectors % 2, 1u);
  EXPECT_NO_THROW(g.check_covers(64, 48));
  EXPECT_EQ(g.detector_offset(g.n_detectors / 2), 0.0);
  EXPECT_THROW((ProjectionGeometry{90, 60, 1.0}.check_covers(64, 48)), std::invalid_argument);
  EXPECT_THROW(radon_forward(Image(64, 48), ProjectionGeometry{90, 60, 1.0}), std::invalid_argument);
}

TEST(Radon, DiskCentralRayIsTheChord) {
  const double radius = 40;
  const Image d = test::disk(128, radius, 0.02);
  const auto geom = ProjectionGeometry::covering(128, 128, 12);
  ASSERT_GE(geom.n_detectors, 181u);
  const Sinogram s = radon_forward(d, geom);
  const std::size_t mid = geom.n_detectors / 2;
  for (std::size_t a = 0; a < geom.n_angles; ++a) EXPECT_NEAR(s.at(a, mid) / (2 * radius * 0.02), 1.0, 0.02) << a;
}

TEST(Radon, DiskChordOn256Detectors) {
  const double radius = 30;
  const Image d = test::disk(96, radius, 1.0);
  const Sinogram s = radon_forward(d, ProjectionGeometry{8, 256, 1.0});
  // Bin 128 sits half a pixel off the axis.
  for (std::size_t a = 0; a < 8; ++a) EXPECT_NEAR(s.at(a, 128) / (2 * std::sqrt(radius * radius - 0.25)), 1.0, 0.02);
}

TEST(Radon, ZeroInZeroOut) {
  const auto geom = ProjectionGeometry::covering(32, 32, 30);
  const Sinogram s = radon_forward(Image(32, 32), geom);
  for (double v : s.values) EXPECT_EQ(v, 0.0);
  const Sinogram zero{geom.n_angles, geom.n_detectors, std::vector<double>(geom.n_angles * geom.n_detectors)};
  const Image rec = fbp_reconstruct(zero, geom, 32, 32);
  for (double v : rec.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(Radon, Linear) {
  const Image a = test::random_image(24, 24, 1), b = test::random_image(24, 24, 2);
  Image combo(24, 24);
  for (std::size_t i = 0; i < combo.size(); ++i) combo.data()[i] = 2.0 * a.data()[i] - 0.5 * b.data()[i];
  const auto geom = ProjectionGeometry::covering(24, 24, 20);
  const Sinogram sa = radon_forward(a, geom), sb = radon_forward(b, geom), sc = radon_forward(combo, geom);
  for (std::size_t i = 0; i < sc.values.size(); ++i) EXPECT_NEAR(sc.values[i], 2.0 * sa.values[i] - 0.5 * sb.values[i], 1e-9);
}

TEST(Radon, EveryProjectionCarriesTheTotalMass) {
  const Image img = test::shepp_logan(64);
  double total = 0;
  for (double v : img.pixels()) total += v;
  const auto geom = ProjectionGeometry::covering(64, 64, 36);
  const Sinogram s = radon_forward(img, geom);
  for (std::size_t a = 0; a < geom.n_angles; ++a) {
    double sum = 0;
    for (std::size_t d = 0; d < geom.n_detectors; ++d) sum += s.at(a, d);
    EXPECT_NEAR(sum * geom.detector_spacing / total, 1.0, 0.02) << a;
  }
}

TEST(Radon, QuarterTurnShiftsTheSinogram) {
  const Image f = test::random_image(33, 33, 5);
  const auto geom = ProjectionGeometry::covering(33, 33, 40);
  const Sinogram sf = radon_forward(f, geom), sg = radon_forward(rotate90(f), geom);
  for (std::size_t a = 0; a < 20; ++a)
    for (std::size_t d = 0; d < geom.n_detectors; ++d) EXPECT_NEAR(sg.at(a + 20, d), sf.at(a, d), 1e-9);
}

TEST(Fbp, SheppLoganReconstructsAbove25dB) {
  const Image img = test::shepp_logan(128);
  const auto geom = ProjectionGeometry::covering(128, 128, 180);
  const Image rec = fbp_reconstruct(radon_forward(img, geom), geom, 128, 128);
  EXPECT_GE(psnr(img, rec), 25.0);
}

TEST(Fbp, PsnrGrowsWithAngles) {
  const Image img = test::shepp_logan(96);
  double prev = -1e9;
  for (std::size_t n : {45u, 90u, 180u}) {
    const auto geom = ProjectionGeometry::covering(96, 96, n);
    const double p = psnr(img, fbp_reconstruct(radon_forward(img, geom), geom, 96, 96));
    EXPECT_GT(p, prev) << n;
    prev = p;
  }
}

TEST(Fbp, DiskOn256DetectorsAbove25dB) {
  const Image img = test::disk(128, 45, 1.0);
  const ProjectionGeometry geom{180, 256, 1.0};
  EXPECT_GE(psnr(img, fbp_reconstruct(radon_forward(img, geom), geom, 128, 128)), 25.0);
}

TEST(Fbp, RejectsMismatchedSinogram) {
  const auto geom = ProjectionGeometry::covering(16, 16, 10);
  const Sinogram s{9, geom.n_detectors, std::vector<double>(9 * geom.n_detectors)};
  EXPECT_THROW(fbp_reconstruct(s, geom, 16, 16), std::invalid_argument);
}

TEST(SinogramPoisson, VarianceIsInverseExpectedCount) {
  // Delta method: var(-ln(k / N0)) = 1 / (exp(-p) N0).
  for (const double p : {0.5, 2.0}) {
    const Sinogram s{100, 200, std::vector<double>(20000, p)};
    const Sinogram noisy = sinogram_poisson(s, {1e4, 4.0}, 3);
    EXPECT_NEAR(sample_variance(noisy.values) * std::exp(-p) * 1e4, 1.0, 0.15) << p;
  }
}

TEST(SinogramPoisson, NoiselessLimit) {
  const Image img = test::shepp_logan(32);
  const auto geom = ProjectionGeometry::covering(32, 32, 30);
  const Sinogram clean = radon_forward(img, geom);
  const Sinogram noisy = sinogram_poisson(clean, {1e12, 4.0}, 1);
  for (std::size_t i = 0; i < clean.values.size(); ++i) EXPECT_NEAR(noisy.values[i], clean.values[i], 1e-3);
  const Image a = fbp_reconstruct(clean, geom, 32, 32);
  EXPECT_LT(max_abs_diff(fbp_reconstruct(noisy, geom, 32, 32), a), 1e-3);
}

TEST(SinogramPoisson, NamesTheStarvedBin) {
  Sinogram s{4, 5, std::vector<double>(20, 0.1)};
  s.at(2, 3) = 30.0;
  try {
    sinogram_poisson(s, {1e6, 4.0}, 1);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("angle 2, bin 3"), std::string::npos) << e.what();
  }
}

TEST(SinogramPoisson, NonNegativeAndDeterministic) {
  const Sinogram s{10, 10, std::vector<double>(100, 0.0)};
  const Sinogram a = sinogram_poisson(s, {50.0, 4.0}, 8);
  for (double v : a.values) EXPECT_GE(v, 0.0);
  EXPECT_EQ(a.values, sinogram_poisson(s, {50.0, 4.0}, 8).values);
}

// Residuals against the noiseless round trip. The pixel-domain comparator
// sees the same attenuation map and N0.
struct StreakStats {
  double ct_length = 0, px_length = 0, ct_neighbor = 0, px_neighbor = 0;
};

StreakStats streak_stats(std::size_t seeds) {
  const Image mu = test::dense_inclusion_phantom(64, 0.02, 0.4, 4.0);
  double mu_max = 0;
  for (double v : mu.pixels()) mu_max = std::max(mu_max, v);
  Image unit = mu;
  for (double& v : unit.pixels()) v /= mu_max;
  const auto geom = ProjectionGeometry::covering(64, 64, 180);
  const PoissonSpec spec{1e4, mu_max};
  const Image clean = fbp_reconstruct(radon_forward(mu, geom), geom, 64, 64);
  StreakStats s;
  for (Seed seed = 0; seed < seeds; ++seed) {
    const Image ct = difference(inject_ct_noise(mu, geom, spec, seed), clean);
    const Image px = difference(poisson_noise_image(unit, spec, seed), unit);
    s.ct_length += directional_correlation_length(ct);
    s.px_length += directional_correlation_length(px);
    s.ct_neighbor += neighbor_correlation(ct);
    s.px_neighbor += neighbor_correlation(px);
  }
  const auto n = static_cast<double>(seeds);
  return {s.ct_length / n, s.px_length / n, s.ct_neighbor / n, s.px_neighbor / n};
}

TEST(CtNoise, ProjectionNoiseIsStreakierThanPixelNoise) {
  const StreakStats s = streak_stats(20);
  EXPECT_GT(s.ct_length, s.px_length);
  EXPECT_GE(s.ct_length, 3 * s.px_length);
  EXPECT_GT(s.ct_neighbor, s.px_neighbor + 0.05);
}

TEST(CtNoise, InjectIsDeterministicPerSeed) {
  const Image mu = test::disk(32, 12, 0.05);
  const auto geom = ProjectionGeometry::covering(32, 32, 60);
  EXPECT_EQ(inject_ct_noise(mu, geom, {1e4, 4.0}, 3), inject_ct_noise(mu, geom, {1e4, 4.0}, 3));
}

TEST(CtNoise, NoiselessLimitOnPixels) {
  Image img = test::disk(48, 16, 0.5);
  const Image a = ct_noise_pixels(img, {1e12, 4.0}, 1), b = ct_noise_pixels(img, {1e12, 4.0}, 2);
  EXPECT_LT(max_abs_diff(a, b), 1e-3);
}

TEST(Correlation, WhiteNoiseIsNearZeroAndStreaksAreLong) {
  const Image white = test::random_image(64, 64, 4, -1, 1);
  EXPECT_LT(std::abs(neighbor_correlation(white)), 0.05);
  EXPECT_LT(directional_correlation_length(white), 1.0);
  Image streaks(64, 64);
  const Image row_noise = test::random_image(64, 1, 5, -1, 1);
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 0; c < 64; ++c) streaks.at(r, c) = row_noise.at(0, c) + 0.1 * white.at(r, c);
  EXPECT_GT(directional_correlation_length(streaks), 6.0);
}

TEST(Correlation, SmoothedNoiseIsPositivelyCorrelated) {
  const Image white = test::random_image(64, 64, 6, -1, 1);
  Image smooth(64, 64);
  for (std::size_t r = 0; r + 1 < 64; ++r)
    for (std::size_t c = 0; c + 1 < 64; ++c)
      smooth.at(r, c) = white.at(r, c) + white.at(r + 1, c) + white.at(r, c + 1) + white.at(r + 1, c + 1);
  EXPECT_GT(neighbor_correlation(smooth), 0.4);
}

TEST(SinogramIo, RoundTripAtFloatPrecision) {
  test::TempDir dir("sino");
  const Sinogram s = radon_forward(test::shepp_logan(16), ProjectionGeometry::covering(16, 16, 8));
  write_sinogram(dir / "s.f32", s);
  const Sinogram back = read_sinogram(dir / "s.f32");
  ASSERT_EQ(back.n_angles, s.n_angles);
  ASSERT_EQ(back.n_detectors, s.n_detectors);
  for (std::size_t i = 0; i < s.values.size(); ++i)
    EXPECT_EQ(back.values[i], static_cast<double>(static_cast<float>(s.values[i])));
  EXPECT_THROW(read_sinogram(dir / "missing.f32"), std::runtime_error);
}

}  // namespace
}  // namespace confound
