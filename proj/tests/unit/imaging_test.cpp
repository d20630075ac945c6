#include <gtest/gtest.h>

#include <cmath>

#include "confound/fft.hpp"
#include "confound/imaging.hpp"
#include "support.hpp"

namespace confound {
namespace {

Image checkerboard(std::size_t side) {
  Image img(side, side);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) img.at(r, c) = (r + c) % 2 ? 1.0 : 0.0;
  return img;
}

TEST(LowPass, AllPassWhenCutoffCoversSpectrum) {
  const Image img = test::random_image(32, 32, 1);
  EXPECT_LT(max_abs_diff(low_pass(img, {32.0}), img), 1e-6);
}

TEST(LowPass, ZeroCutoffKeepsOnlyTheMean) {
  const Image img = test::random_image(20, 14, 2);
  const double m = mean(img);
  const Image out = low_pass(img, {0.0});
  for (double v : out.pixels()) EXPECT_NEAR(v, m, 1e-12);
}

TEST(LowPass, CheckerboardMatchesNaiveOracle) {
  const Image img = checkerboard(64);
  EXPECT_LT(max_abs_diff(low_pass(img, {8.0}), test::naive_low_pass(img, 8.0)), 1e-9);
}

TEST(LowPass, RandomImageMatchesNaiveOracle) {
  for (double d0 : {1.0, 2.5, 3.0, 5.0}) {
    const Image img = test::random_image(15, 12, 3);
    EXPECT_LT(max_abs_diff(low_pass(img, {d0}), test::naive_low_pass(img, d0)), 1e-9) << d0;
  }
}

TEST(LowPass, IdempotentAndEnergyNonIncreasing) {
  for (double d0 : {0.0, 3.0, 10.0, 40.0}) {
    const Image img = test::random_image(48, 40, 4);
    const Image once = low_pass(img, {d0});
    EXPECT_LT(max_abs_diff(low_pass(once, {d0}), once), 1e-9) << d0;
    EXPECT_LE(energy(once), energy(img) * (1 + 1e-12)) << d0;
  }
}

TEST(LowPass, MaskIsCentredDisk) {
  const auto mask = low_pass_mask(9, 8, 2.0);
  for (std::size_t u = 0; u < 8; ++u) {
    for (std::size_t v = 0; v < 9; ++v) {
      const bool inside = std::hypot(test::shifted_distance(u, 8), test::shifted_distance(v, 9)) <= 2.0;
      EXPECT_EQ(mask[u * 9 + v] != 0, inside) << u << "," << v;
    }
  }
}

TEST(PoissonSpec, RejectsTooFewPhotonsAtFullAttenuation) {
  EXPECT_THROW((PoissonSpec{50.0, 4.0}.validate()), std::invalid_argument);  // e^-4 * 50 < 1
  EXPECT_NO_THROW((PoissonSpec{60.0, 4.0}.validate()));
  EXPECT_THROW((PoissonSpec{0.0, 4.0}.validate()), std::invalid_argument);
  EXPECT_THROW((PoissonSpec{1e7, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW(poisson_noise_image(Image(2, 2), {50.0, 4.0}, 1), std::invalid_argument);
}

TEST(PoissonSampler, MeanAndVarianceMatchRate) {
  Engine eng = make_engine(123);
  const double rate = std::exp(-1.3) * 100.0;
  const int n = 1'000'000;
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<double>(sample_poisson(eng, rate));
    s += k;
    ss += k * k;
  }
  const double m = s / n;
  const double var = ss / n - m * m;
  EXPECT_LT(std::abs(m - rate), 3 * std::sqrt(rate / n));
  EXPECT_NEAR(var / rate, 1.0, 0.15);
}

TEST(PoissonNoise, HighDoseNoiseIsImperceptible) {
  // Delta method: std of -ln(k / N0) is 1 / sqrt(p_r).
  const PoissonSpec spec{2e7, 1.0};
  const Image gray(320, 320, 0.5);
  const Image noisy = poisson_noise_image(gray, spec, 5);
  const double m = mean(noisy);
  double var = 0;
  for (double v : noisy.pixels()) var += (v - m) * (v - m);
  const double sd = std::sqrt(var / static_cast<double>(noisy.size() - 1));
  const double expected = 1.0 / std::sqrt(std::exp(-0.5) * 2e7);
  EXPECT_NEAR(sd / expected, 1.0, 0.10);
  EXPECT_LT(sd / 0.5, 1e-3);
  EXPECT_NEAR(m, 0.5, 1e-5);
}

TEST(PoissonNoise, VarianceAtLowDose) {
  const PoissonSpec spec{2000.0, 4.0};
  const Image gray(200, 200, 0.25);
  const Image noisy = poisson_noise_image(gray, spec, 6);
  const double m = mean(noisy);
  double var = 0;
  for (double v : noisy.pixels()) var += (v - m) * (v - m);
  var /= static_cast<double>(noisy.size() - 1);
  const double p_r = std::exp(-1.0) * 2000.0;
  EXPECT_NEAR(var / (1.0 / (p_r * 16.0)), 1.0, 0.15);
}

TEST(PoissonNoise, NoiselessLimit) {
  const Image gray(64, 64, 0.5);
  EXPECT_LT(max_abs_diff(poisson_noise_image(gray, {1e12, 4.0}, 1), gray), 1e-3);
}

TEST(PoissonNoise, DeterministicPerSeed) {
  const Image img = test::random_image(32, 32, 7);
  const PoissonSpec spec{1e4, 4.0};
  EXPECT_EQ(poisson_noise_image(img, spec, 9), poisson_noise_image(img, spec, 9));
  EXPECT_NE(poisson_noise_image(img, spec, 9), poisson_noise_image(img, spec, 10));
}

TEST(PoissonNoise, OutputClampedToUnitRange) {
  const Image img = test::random_image(64, 64, 8, -0.5, 1.5);
  const Image out = poisson_noise_image(img, {60.0, 4.0}, 3);
  for (double v : out.pixels()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Tag, DefaultAnchorFitsOn1024) {
  const TagSpec tag = default_tag(1024);
  EXPECT_EQ(tag.anchor_row, 200u);
  EXPECT_EQ(tag.anchor_col, 200u);
  const Image out = stamp_tag(Image(1024, 1024), tag);
  double ink = 0;
  for (double v : out.pixels()) ink += v;
  EXPECT_EQ(ink, static_cast<double>(tag.glyph.ink_count()));
}

TEST(Tag, ChangesExactlyTheMaskedPixels) {
  const Image img = test::random_image(40, 40, 2, 0.0, 0.5);
  TagSpec tag{render_glyph("RL", 2), 5, 3, 0.9};
  const Image out = stamp_tag(img, tag);
  for (std::size_t r = 0; r < 40; ++r) {
    for (std::size_t c = 0; c < 40; ++c) {
      const bool in_box = r >= 5 && r < 5 + tag.glyph.height && c >= 3 && c < 3 + tag.glyph.width;
      const bool inked = in_box && tag.glyph.at(r - 5, c - 3);
      EXPECT_EQ(out.at(r, c), inked ? 0.9 : img.at(r, c));
    }
  }
}

TEST(Tag, EmptyGlyphIsIdentityAndStampingIsIdempotent) {
  const Image img = test::random_image(20, 20, 3);
  EXPECT_EQ(stamp_tag(img, TagSpec{render_glyph(""), 0, 0, 1.0}), img);
  const TagSpec tag{render_glyph("R"), 2, 2, 1.0};
  EXPECT_EQ(stamp_tag(stamp_tag(img, tag), tag), stamp_tag(img, tag));
}

TEST(Tag, OverflowErrorNamesTheOverflow) {
  const TagSpec tag{render_glyph("R"), 15, 18, 1.0};  // 7 wide, 9 tall
  try {
    stamp_tag(Image(20, 20), tag);
    FAIL();
  } catch (const std::out_of_range& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("4 rows"), std::string::npos) << msg;
    EXPECT_NE(msg.find("5 cols"), std::string::npos) << msg;
  }
}

TEST(Glyph, SevenByNinePerCharacter) {
  const GlyphMask r = render_glyph("R");
  EXPECT_EQ(r.width, 7u);
  EXPECT_EQ(r.height, 9u);
  EXPECT_GT(r.ink_count(), 0u);
  const GlyphMask two = render_glyph("R R", 3);
  EXPECT_EQ(two.width, (3 * 7 + 2) * 3u);
  EXPECT_EQ(two.height, 27u);
  EXPECT_EQ(two.ink_count(), 2 * 9 * r.ink_count());
}

}  // namespace
}  // namespace confound
