#include "confound/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

#include "confound/binary_io.hpp"

namespace confound {
namespace {

constexpr std::string_view kRawMagic = "CBIMGF32";

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

}  // namespace

// libpng reports errors by longjmp; every object that needs destruction is
// created before setjmp so the jump never skips a destructor.
void write_png16(const std::filesystem::path& path, const Image& img) {
  FilePtr file = open_file(path, "wb");
  std::vector<png_byte> row(img.width() * 2);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng: failed writing " + path.string());
  }

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()),
               16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or text chunks: output bytes depend on pixels only.
  png_write_info(png, info);
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      const double v = std::clamp(img.at(r, c), 0.0, 1.0);
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      row[2 * c] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
      row[2 * c + 1] = static_cast<png_byte>(q & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  std::vector<png_byte> row;
  std::vector<double> pixels;
  png_uint_32 width = 0, height = 0;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng: failed reading " + path.string());
  }

  png_init_io(png, file.get());
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color & PNG_COLOR_MASK_COLOR || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  row.resize(png_get_rowbytes(png, info));
  pixels.resize(static_cast<std::size_t>(width) * height);

  const double scale = out_depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 r = 0; r < height; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 c = 0; c < width; ++c) {
      const double v = out_depth == 16 ? static_cast<double>((row[2 * c] << 8) | row[2 * c + 1])
                                       : static_cast<double>(row[c]);
      pixels[static_cast<std::size_t>(r) * width + c] = v / scale;
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return Image(width, height, std::move(pixels));
}

void write_raw_f32(const std::filesystem::path& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os.write(kRawMagic.data(), static_cast<std::streamsize>(kRawMagic.size()));
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(img.width()));
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(img.height()));
  for (double v : img.pixels()) binio::put_le<float>(os, static_cast<float>(v));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Image read_raw_f32(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const std::string ctx = path.string();
  binio::expect_magic(is, kRawMagic, ctx);
  const auto w = binio::get_le<std::uint32_t>(is, ctx);
  const auto h = binio::get_le<std::uint32_t>(is, ctx);
  Image img(w, h);
  for (double& v : img.pixels()) v = binio::get_le<float>(is, ctx);
  return img;
}

Image read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".f32" || ext == ".raw") return read_raw_f32(path);
  return read_png(path);
}

void write_image(const std::filesystem::path& path, const Image& img) {
  const auto ext = path.extension().string();
  if (ext == ".f32" || ext == ".raw") {
    write_raw_f32(path, img);
  } else {
    write_png16(path, img);
  }
}

}  // namespace confound
