#include "confound/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace confound {
namespace {

constexpr std::size_t kFontWidth = 7;
constexpr std::size_t kFontHeight = 9;

using FontChar = std::array<const char*, kFontHeight>;

constexpr FontChar kGlyphR = {
    "######.", "##...##", "##...##", "##...##", "######.",
    "##.##..", "##..##.", "##...##", "##...##",
};
constexpr FontChar kGlyphL = {
    "##.....", "##.....", "##.....", "##.....", "##.....",
    "##.....", "##.....", "#######", "#######",
};
constexpr FontChar kGlyphSpace = {
    ".......", ".......", ".......", ".......", ".......",
    ".......", ".......", ".......", ".......",
};

const FontChar& lookup(char c) {
  switch (c) {
    case 'R': return kGlyphR;
    case 'L': return kGlyphL;
    case ' ': return kGlyphSpace;
    default:
      throw std::invalid_argument(std::string("render_glyph: unsupported character '") + c + "'");
  }
}

}  // namespace

void PoissonSpec::validate() const {
  if (!(source_intensity > 0.0)) throw std::invalid_argument("PoissonSpec: N0 must be > 0");
  if (!(attenuation_max > 0.0)) throw std::invalid_argument("PoissonSpec: A_max must be > 0");
  if (std::exp(-attenuation_max) * source_intensity < 1.0) {
    throw std::invalid_argument("PoissonSpec: exp(-A_max)*N0 = " +
                                std::to_string(std::exp(-attenuation_max) * source_intensity) +
                                " < 1 expected photon at the darkest pixel");
  }
}

std::size_t GlyphMask::ink_count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

GlyphMask render_glyph(std::string_view text, std::size_t scale) {
  if (scale == 0) throw std::invalid_argument("render_glyph: scale must be >= 1");
  GlyphMask mask;
  if (text.empty()) return mask;
  // One blank font column between characters.
  const std::size_t cols = text.size() * (kFontWidth + 1) - 1;
  mask.width = cols * scale;
  mask.height = kFontHeight * scale;
  mask.bits.assign(mask.width * mask.height, 0);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const FontChar& ch = lookup(text[i]);
    const std::size_t x0 = i * (kFontWidth + 1);
    for (std::size_t fr = 0; fr < kFontHeight; ++fr) {
      for (std::size_t fc = 0; fc < kFontWidth; ++fc) {
        if (ch[fr][fc] != '#') continue;
        for (std::size_t dr = 0; dr < scale; ++dr)
          for (std::size_t dc = 0; dc < scale; ++dc)
            mask.bits[(fr * scale + dr) * mask.width + (x0 + fc) * scale + dc] = 1;
      }
    }
  }
  return mask;
}

TagSpec default_tag(std::size_t image_side) {
  TagSpec tag;
  tag.glyph = render_glyph("R", std::max<std::size_t>(1, image_side / 128));
  const auto offset = static_cast<std::size_t>(std::lround(static_cast<double>(image_side) * 200.0 / 1024.0));
  tag.anchor_row = offset;
  tag.anchor_col = offset;
  tag.intensity = 1.0;
  return tag;
}

std::vector<std::uint8_t> low_pass_mask(std::size_t width, std::size_t height, double cutoff) {
  if (cutoff < 0.0) throw std::invalid_argument("low_pass: cutoff must be >= 0");
  std::vector<std::uint8_t> mask(width * height);
  for (std::size_t v = 0; v < height; ++v) {
    const double fv = centered_frequency(v, height);
    for (std::size_t u = 0; u < width; ++u) {
      const double fu = centered_frequency(u, width);
      mask[v * width + u] = std::sqrt(fu * fu + fv * fv) <= cutoff ? 1 : 0;
    }
  }
  return mask;
}

Image low_pass(const Image& img, const LowPassSpec& spec) {
  const auto mask = low_pass_mask(img.width(), img.height(), spec.cutoff);
  Spectrum s = dft2(img);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) s.coefficients[i] = 0.0;
  }
  return idft2(s);
}

std::int64_t sample_poisson(Engine& eng, double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("sample_poisson: bad mean");
  if (mean == 0.0) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(eng);
}

Image poisson_noise_image(const Image& img, const PoissonSpec& spec, Seed seed) {
  spec.validate();
  Engine eng = make_engine(seed);
  Image out(img.width(), img.height());
  const double n0 = spec.source_intensity;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double attenuation = std::clamp(img.data()[i], 0.0, 1.0) * spec.attenuation_max;
    const double expected = std::exp(-attenuation) * n0;
    const auto counts = std::max<std::int64_t>(sample_poisson(eng, expected), 1);
    const double noisy = -std::log(static_cast<double>(counts) / n0) / spec.attenuation_max;
    out.data()[i] = std::clamp(noisy, 0.0, 1.0);
  }
  return out;
}

Image stamp_tag(const Image& img, const TagSpec& spec) {
  const GlyphMask& g = spec.glyph;
  if (spec.anchor_row + g.height > img.height() || spec.anchor_col + g.width > img.width()) {
    throw std::out_of_range(
        "stamp_tag: glyph " + std::to_string(g.width) + "x" + std::to_string(g.height) +
        " at (" + std::to_string(spec.anchor_row) + "," + std::to_string(spec.anchor_col) +
        ") overflows " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
        " image by " +
        std::to_string(std::max<std::ptrdiff_t>(
            0, static_cast<std::ptrdiff_t>(spec.anchor_row + g.height) - static_cast<std::ptrdiff_t>(img.height()))) +
        " rows, " +
        std::to_string(std::max<std::ptrdiff_t>(
            0, static_cast<std::ptrdiff_t>(spec.anchor_col + g.width) - static_cast<std::ptrdiff_t>(img.width()))) +
        " cols");
  }
  Image out = img;
  for (std::size_t r = 0; r < g.height; ++r)
    for (std::size_t c = 0; c < g.width; ++c)
      if (g.at(r, c)) out.at(spec.anchor_row + r, spec.anchor_col + c) = spec.intensity;
  return out;
}

}  // namespace confound
