#include "confound/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace confound {

void AugmentParams::validate() const {
  if (max_rotation_deg < 0 || width_shift < 0 || height_shift < 0 || shear < 0 || zoom < 0) {
    throw std::invalid_argument("AugmentParams: magnitudes must be >= 0");
  }
  if (zoom >= 1.0) throw std::invalid_argument("AugmentParams: zoom range must be < 1");
}

AffineDraw sample_affine(const AugmentParams& params, std::size_t width, std::size_t height, Seed seed) {
  params.validate();
  Engine eng = make_engine(seed);
  const double max_rot = params.max_rotation_deg * std::numbers::pi / 180.0;
  AffineDraw d;
  // Fixed draw order keeps streams comparable across parameter settings.
  d.rotation_rad = uniform(eng, -max_rot, max_rot);
  d.shift_x = uniform(eng, -params.width_shift, params.width_shift) * static_cast<double>(width);
  d.shift_y = uniform(eng, -params.height_shift, params.height_shift) * static_cast<double>(height);
  d.shear = uniform(eng, -params.shear, params.shear);
  d.zoom = uniform(eng, 1.0 - params.zoom, 1.0 + params.zoom);
  return d;
}

std::array<double, 4> affine_matrix(const AffineDraw& d) {
  const double c = std::cos(d.rotation_rad), s = std::sin(d.rotation_rad);
  // shear * rotation
  const double m00 = c + d.shear * s, m01 = -s + d.shear * c;
  const double m10 = s, m11 = c;
  return {d.zoom * m00, d.zoom * m01, d.zoom * m10, d.zoom * m11};
}

Image apply_affine(const Image& img, const AffineDraw& draw) {
  const auto m = affine_matrix(draw);
  const double det = m[0] * m[3] - m[1] * m[2];
  if (std::abs(det) < 1e-12) throw std::invalid_argument("apply_affine: singular transform");
  const double i00 = m[3] / det, i01 = -m[1] / det, i10 = -m[2] / det, i11 = m[0] / det;

  const std::size_t w = img.width(), h = img.height();
  const double cx = 0.5 * static_cast<double>(w - 1), cy = 0.5 * static_cast<double>(h - 1);
  const double maxx = static_cast<double>(w - 1), maxy = static_cast<double>(h - 1);
  Image out(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double ox = static_cast<double>(c) - cx - draw.shift_x;
      const double oy = static_cast<double>(r) - cy - draw.shift_y;
      const double x = std::clamp(cx + i00 * ox + i01 * oy, 0.0, maxx);
      const double y = std::clamp(cy + i10 * ox + i11 * oy, 0.0, maxy);
      const auto x0 = static_cast<std::size_t>(x), y0 = static_cast<std::size_t>(y);
      const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
      out.at(r, c) = (1 - fy) * ((1 - fx) * img.at(y0, x0) + fx * img.at(y0, x1)) +
                     fy * ((1 - fx) * img.at(y1, x0) + fx * img.at(y1, x1));
    }
  }
  return out;
}

Image random_affine(const Image& img, const AugmentParams& params, Seed seed) {
  return apply_affine(img, sample_affine(params, img.width(), img.height(), seed));
}

double max_displacement(const AugmentParams& params, std::size_t width, std::size_t height, double row,
                        double col) {
  const double cx = 0.5 * static_cast<double>(width - 1), cy = 0.5 * static_cast<double>(height - 1);
  const double px = col - cx, py = row - cy;
  const double rot = params.max_rotation_deg * std::numbers::pi / 180.0;
  double best = 0.0;
  for (int mask = 0; mask < 32; ++mask) {
    AffineDraw d;
    d.rotation_rad = (mask & 1) ? rot : -rot;
    d.shift_x = ((mask & 2) ? 1 : -1) * params.width_shift * static_cast<double>(width);
    d.shift_y = ((mask & 4) ? 1 : -1) * params.height_shift * static_cast<double>(height);
    d.shear = (mask & 8) ? params.shear : -params.shear;
    d.zoom = (mask & 16) ? 1.0 + params.zoom : 1.0 - params.zoom;
    const auto m = affine_matrix(d);
    const double qx = m[0] * px + m[1] * py + d.shift_x;
    const double qy = m[2] * px + m[3] * py + d.shift_y;
    best = std::max(best, std::hypot(qx - px, qy - py));
  }
  return best;
}

double tag_survival(const Image& img_before, const Image& img_after, const TagSpec& tag, const AugmentParams& params) {
  if (img_before.width() != img_after.width() || img_before.height() != img_after.height()) {
    throw std::invalid_argument("tag_survival: images differ in size");
  }
  const std::size_t w = img_after.width(), h = img_after.height();
  const GlyphMask& g = tag.glyph;
  if (g.ink_count() == 0) return 1.0;

  double radius = 0.0;
  for (std::size_t r = 0; r < g.height; ++r)
    for (std::size_t c = 0; c < g.width; ++c)
      if (g.at(r, c))
        radius = std::max(radius, max_displacement(params, w, h, static_cast<double>(tag.anchor_row + r),
                                                   static_cast<double>(tag.anchor_col + c)));
  const auto reach = static_cast<std::ptrdiff_t>(std::ceil(radius));

  // Summed-area table over the "looks like the stamp" indicator.
  const double tol = 0.1 * std::abs(tag.intensity);
  std::vector<std::size_t> sat((w + 1) * (h + 1), 0);
  for (std::size_t r = 0; r < h; ++r) {
    std::size_t run = 0;
    for (std::size_t c = 0; c < w; ++c) {
      run += std::abs(img_after.at(r, c) - tag.intensity) <= tol ? 1 : 0;
      sat[(r + 1) * (w + 1) + c + 1] = sat[r * (w + 1) + c + 1] + run;
    }
  }
  auto box_has_match = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
    const auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t lo, std::ptrdiff_t hi) { return std::clamp(v, lo, hi); };
    const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
    const auto r0 = static_cast<std::size_t>(clampi(r - reach, 0, H));
    const auto r1 = static_cast<std::size_t>(clampi(r + reach + 1, 0, H));
    const auto c0 = static_cast<std::size_t>(clampi(c - reach, 0, W));
    const auto c1 = static_cast<std::size_t>(clampi(c + reach + 1, 0, W));
    if (r0 >= r1 || c0 >= c1) return false;
    const std::size_t s = sat[r1 * (w + 1) + c1] + sat[r0 * (w + 1) + c0] - sat[r0 * (w + 1) + c1] -
                          sat[r1 * (w + 1) + c0];
    return s > 0;
  };

  std::size_t total = 0, kept = 0;
  for (std::size_t r = 0; r < g.height; ++r) {
    for (std::size_t c = 0; c < g.width; ++c) {
      if (!g.at(r, c)) continue;
      ++total;
      if (box_has_match(static_cast<std::ptrdiff_t>(tag.anchor_row + r), static_cast<std::ptrdiff_t>(tag.anchor_col + c))) {
        ++kept;
      }
    }
  }
  return static_cast<double>(kept) / static_cast<double>(total);
}

}  // namespace confound
