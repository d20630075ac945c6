#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "confound/image.hpp"
#include "confound/imaging.hpp"
#include "confound/rng.hpp"

namespace confound {

/// Parallel-beam geometry. Angles are uniform in [0, pi); detector bins are
/// centred on the rotation axis.
struct ProjectionGeometry {
  std::size_t n_angles = 180;
  std::size_t n_detectors = 256;
  double detector_spacing = 1.0;

  double angle(std::size_t i) const;
  /// Signed offset of detector bin j from the rotation axis, in pixels.
  double detector_offset(std::size_t j) const;
  /// Throws if the detector row cannot see the whole image diagonal.
  void check_covers(std::size_t width, std::size_t height) const;

  /// Smallest geometry covering a width x height image with unit spacing.
  static ProjectionGeometry covering(std::size_t width, std::size_t height, std::size_t n_angles);
};

/// Rows are angles, columns detector bins; values are line integrals.
struct Sinogram {
  std::size_t n_angles = 0;
  std::size_t n_detectors = 0;
  std::vector<double> values;

  double& at(std::size_t angle, std::size_t bin) { return values[angle * n_detectors + bin]; }
  double at(std::size_t angle, std::size_t bin) const { return values[angle * n_detectors + bin]; }
};

Sinogram radon_forward(const Image& attenuation, const ProjectionGeometry& geom);

/// Photon-counting noise applied per bin; output bins are clamped at 0.
/// Throws if exp(-max bin) * N0 < 1, naming the worst bin.
Sinogram sinogram_poisson(const Sinogram& sino, const PoissonSpec& spec, Seed seed);

/// Ram-Lak filtered back-projection onto a width x height grid.
Image fbp_reconstruct(const Sinogram& sino, const ProjectionGeometry& geom, std::size_t width,
                      std::size_t height);

/// fbp(sinogram_poisson(radon(attenuation))).
Image inject_ct_noise(const Image& attenuation, const ProjectionGeometry& geom, const PoissonSpec& spec,
                      Seed seed);

/// CT noise for images in [0, 1]: pixels are scaled so that a full-intensity
/// ray across the image diagonal integrates to attenuation_max, pushed
/// through inject_ct_noise, scaled back and clamped.
Image ct_noise_pixels(const Image& img, const PoissonSpec& spec, Seed seed, std::size_t n_angles = 180);

/// Largest directional correlation length (pixels) of a residual image:
/// for each of eight lattice directions the positive part of the
/// normalised autocorrelation is summed over lags 1..max_lag and scaled by
/// the step length. Streaky residuals score high, white noise near zero.
double directional_correlation_length(const Image& residual, std::size_t max_lag = 8);

/// Mean normalised lag-1 autocorrelation over the four axis neighbours.
double neighbor_correlation(const Image& residual);

/// "CBSINOF32", u32 n_angles, u32 n_detectors, f32 row-major by angle.
void write_sinogram(const std::filesystem::path& path, const Sinogram& sino);
Sinogram read_sinogram(const std::filesystem::path& path);

}  // namespace confound
