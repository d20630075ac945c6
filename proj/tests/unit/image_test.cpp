#include <gtest/gtest.h>

#include <fstream>

#include "confound/image.hpp"
#include "confound/image_io.hpp"
#include "support.hpp"

namespace confound {
namespace {

TEST(Image, RejectsZeroDimensionsAndBadPixelCount) {
  EXPECT_THROW(Image(0, 4), std::invalid_argument);
  EXPECT_THROW(Image(4, 0), std::invalid_argument);
  EXPECT_THROW(Image(2, 2, std::vector<double>(3)), std::invalid_argument);
}

TEST(Image, RowMajorLayout) {
  Image img(3, 2, std::vector<double>{0, 1, 2, 3, 4, 5});
  EXPECT_EQ(img.at(1, 0), 3);
  EXPECT_EQ(img.at(0, 2), 2);
}

TEST(Image, RequireFiniteNamesTheCaller) {
  Image img(2, 2);
  img.at(1, 1) = NAN;
  try {
    require_finite(img, "unit-test");
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("unit-test"), std::string::npos);
  }
}

TEST(Image, DownsampleIsBlockAverage) {
  const Image img = test::random_image(6, 4, 3);
  const Image d = downsample(img, 2);
  ASSERT_EQ(d.width(), 3u);
  ASSERT_EQ(d.height(), 2u);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double want =
          (img.at(2 * r, 2 * c) + img.at(2 * r, 2 * c + 1) + img.at(2 * r + 1, 2 * c) + img.at(2 * r + 1, 2 * c + 1)) / 4;
      EXPECT_NEAR(d.at(r, c), want, 1e-15);
    }
  }
}

TEST(Image, ResizeIdentityAndConstant) {
  const Image img = test::random_image(7, 5, 4);
  EXPECT_EQ(resize(img, 7, 5), img);
  const Image flat(10, 10, 0.25);
  const Image up = resize(flat, 13, 17);
  for (double v : up.pixels()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Image, PsnrOfKnownError) {
  Image a(4, 4, 1.0);
  Image b = a;
  for (double& v : b.pixels()) v -= 0.1;
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);  // 10 log10(1 / 0.01)
  EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(ImageIo, Png16RoundTripWithinQuantisation) {
  test::TempDir dir("png");
  const Image img = test::random_image(33, 17, 9);
  write_png16(dir / "a.png", img);
  const Image back = read_png(dir / "a.png");
  ASSERT_EQ(back.width(), 33u);
  ASSERT_EQ(back.height(), 17u);
  EXPECT_LE(max_abs_diff(back, img), 0.5 / 65535 + 1e-12);
}

TEST(ImageIo, Png16IsDeterministic) {
  test::TempDir dir("png-det");
  const Image img = test::random_image(16, 16, 10);
  write_png16(dir / "a.png", img);
  write_png16(dir / "b.png", img);
  EXPECT_EQ(test::slurp(dir / "a.png"), test::slurp(dir / "b.png"));
}

TEST(ImageIo, RawF32LayoutAndRoundTrip) {
  test::TempDir dir("raw");
  const Image img = test::random_image(5, 3, 11);
  write_image(dir / "a.f32", img);
  const std::string bytes = test::slurp(dir / "a.f32");
  ASSERT_EQ(bytes.size(), 8u + 4 + 4 + 15 * 4);
  EXPECT_EQ(bytes.substr(0, 8), "CBIMGF32");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 5);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 3);
  const Image back = read_image(dir / "a.f32");
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(back.data()[i], static_cast<double>(static_cast<float>(img.data()[i])));
}

TEST(ImageIo, ErrorsNameTheFile) {
  test::TempDir dir("bad");
  {
    std::ofstream(dir / "bad.png") << "not a png";
    std::ofstream(dir / "bad.f32") << "WRONGMAG........";
  }
  for (const char* name : {"bad.png", "bad.f32", "missing.png"}) {
    try {
      read_image(dir / name);
      FAIL() << name;
    } catch (const std::exception& e) {
      EXPECT_NE(std::string(e.what()).find(name), std::string::npos) << e.what();
    }
  }
}

}  // namespace
}  // namespace confound
