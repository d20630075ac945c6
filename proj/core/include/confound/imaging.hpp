#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "confound/fft.hpp"
#include "confound/image.hpp"
#include "confound/rng.hpp"

namespace confound {

/// Hard radial low-pass: keep coefficients whose centred distance from DC
/// is <= cutoff.
struct LowPassSpec {
  double cutoff = 500.0;
};

/// Photon-counting model. A pixel in [0, 1] maps to attenuation
/// pixel * attenuation_max, recorded intensity is exp(-attenuation) * N0.
struct PoissonSpec {
  double source_intensity = 2e7;
  double attenuation_max = 4.0;

  void validate() const;
};

struct GlyphMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;  // row-major, 1 = ink

  bool at(std::size_t row, std::size_t col) const { return bits[row * width + col] != 0; }
  std::size_t ink_count() const;
};

struct TagSpec {
  GlyphMask glyph;
  std::size_t anchor_row = 200;
  std::size_t anchor_col = 200;
  double intensity = 1.0;
};

/// Renders text with the built-in 7x9 marker font, each font pixel blown up
/// to scale x scale. Supported characters: 'L', 'R', ' '.
GlyphMask render_glyph(std::string_view text, std::size_t scale = 1);

/// Default marker for a square image of the given side: "R" at the same
/// relative offset as (200, 200) on a 1024 image, scaled with the image.
TagSpec default_tag(std::size_t image_side);

Image low_pass(const Image& img, const LowPassSpec& spec);
/// Frequency mask used by low_pass, exposed for tests.
std::vector<std::uint8_t> low_pass_mask(std::size_t width, std::size_t height, double cutoff);

std::int64_t sample_poisson(Engine& eng, double mean);

Image poisson_noise_image(const Image& img, const PoissonSpec& spec, Seed seed);

/// Throws std::out_of_range naming the overflow when the glyph does not fit.
Image stamp_tag(const Image& img, const TagSpec& spec);

}  // namespace confound
