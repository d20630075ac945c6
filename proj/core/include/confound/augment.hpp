#pragma once

#include <array>

#include "confound/image.hpp"
#include "confound/imaging.hpp"
#include "confound/rng.hpp"

namespace confound {

/// Magnitudes of the training-time affine augmentation. Shifts are
/// fractions of the image size, shear is the x-shear coefficient, zoom is
/// the half-width of the isotropic scale range around 1. Boundary fill is
/// always nearest-edge.
struct AugmentParams {
  double max_rotation_deg = 10.0;
  double width_shift = 0.1;
  double height_shift = 0.1;
  double shear = 0.1;
  double zoom = 0.1;

  void validate() const;
  static AugmentParams none() { return {0, 0, 0, 0, 0}; }
};

/// One concrete draw of the augmentation parameters.
struct AffineDraw {
  double rotation_rad = 0.0;
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;  // pixels
  double shear = 0.0;
  double zoom = 1.0;
};

AffineDraw sample_affine(const AugmentParams& params, std::size_t width, std::size_t height, Seed seed);

/// Composed 2x2 linear part: zoom * shear * rotation, acting on (x, y)
/// offsets from the image centre. Row-major {a00, a01, a10, a11}.
std::array<double, 4> affine_matrix(const AffineDraw& draw);

/// Warps with the composed transform about the image centre; bilinear
/// sampling, out-of-range reads clamp to the nearest edge pixel.
Image apply_affine(const Image& img, const AffineDraw& draw);

Image random_affine(const Image& img, const AugmentParams& params, Seed seed);

/// Upper bound (pixels) on how far any augmentation within `params` can move
/// the point (row, col), taken over the extreme corners of the ranges.
double max_displacement(const AugmentParams& params, std::size_t width, std::size_t height, double row,
                        double col);

/// Fraction of glyph pixels for which img_after holds a pixel within 10% of
/// the stamp intensity somewhere inside a square window whose half-size is
/// the maximum augmentation displacement over the glyph.
double tag_survival(const Image& img_before, const Image& img_after, const TagSpec& tag,
                    const AugmentParams& params = {});

}  // namespace confound
