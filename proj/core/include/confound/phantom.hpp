#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "confound/image.hpp"
#include "confound/record.hpp"
#include "confound/rng.hpp"

namespace confound {

/// Synthetic chest-radiograph stand-in: black air, an elliptical body, two
/// darker lung fields with smooth texture, and for positives a Gaussian
/// "mass" inside one lung. Gender changes the body outline and adds a faint
/// lower-lung shadow for Female phantoms.
struct PhantomOptions {
  std::size_t size = 64;
  double pos_fraction = 0.5;
  std::size_t images_per_patient = 1;
  double texture_amplitude = 0.03;
  double noise_sigma = 0.01;
  Seed seed = kDefaultSeed;
};

// Intensity levels; the blob detector in the tests relies on them.
inline constexpr double kPhantomBody = 0.40;
inline constexpr double kPhantomLung = 0.15;
inline constexpr double kPhantomMassMin = 0.40;
inline constexpr double kPhantomMassMax = 0.50;

struct PhantomSet {
  std::vector<Record> records;
  std::vector<Image> images;
};

/// Renders one phantom; deterministic in (options, seed, label, female).
Image render_phantom(const PhantomOptions& options, Seed seed, Label label, bool female);

/// n records, round(n * pos_fraction) of them positive. Patients hold
/// consecutive images; gender is drawn per patient. source_path is left
/// empty for in-memory use.
PhantomSet generate_phantoms(std::size_t n, const PhantomOptions& options);

/// Writes images/<id>.png, manifest.csv and metadata.csv under dir.
PhantomSet write_phantom_dataset(std::size_t n, const PhantomOptions& options, const std::filesystem::path& dir);

}  // namespace confound
