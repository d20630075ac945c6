#include "confound/ct.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "confound/binary_io.hpp"
#include "confound/fft.hpp"

namespace confound {
namespace {

constexpr std::string_view kSinoMagic = "CBSINOF32";
constexpr double kRayStep = 0.5;

double sample_zero(const Image& img, double row, double col) {
  if (row <= -1.0 || col <= -1.0 || row >= static_cast<double>(img.height()) ||
      col >= static_cast<double>(img.width())) {
    return 0.0;
  }
  const double fr = std::floor(row), fc = std::floor(col);
  const auto r0 = static_cast<std::ptrdiff_t>(fr), c0 = static_cast<std::ptrdiff_t>(fc);
  const double ar = row - fr, ac = col - fc;
  const auto h = static_cast<std::ptrdiff_t>(img.height()), w = static_cast<std::ptrdiff_t>(img.width());
  auto px = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
    return (r < 0 || c < 0 || r >= h || c >= w) ? 0.0 : img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  return (1 - ar) * ((1 - ac) * px(r0, c0) + ac * px(r0, c0 + 1)) +
         ar * ((1 - ac) * px(r0 + 1, c0) + ac * px(r0 + 1, c0 + 1));
}

void check_sinogram(const Sinogram& sino, const ProjectionGeometry& geom) {
  if (sino.n_angles != geom.n_angles || sino.n_detectors != geom.n_detectors ||
      sino.values.size() != sino.n_angles * sino.n_detectors) {
    throw std::invalid_argument("sinogram " + std::to_string(sino.n_angles) + "x" +
                                std::to_string(sino.n_detectors) + " does not match geometry " +
                                std::to_string(geom.n_angles) + "x" + std::to_string(geom.n_detectors));
  }
}

// Spatial Ram-Lak kernel sampled at the detector spacing, transformed once;
// filtering is a zero-padded circular convolution in the frequency domain.
std::vector<Complex> ramlak_response(std::size_t padded, double spacing) {
  std::vector<Complex> h(padded, 0.0);
  const double tau2 = spacing * spacing;
  h[0] = 1.0 / (4.0 * tau2);
  for (std::size_t n = 1; n < padded / 2; ++n) {
    if (n % 2 == 1) {
      const double v = -1.0 / (static_cast<double>(n * n) * std::numbers::pi * std::numbers::pi * tau2);
      h[n] = v;
      h[padded - n] = v;
    }
  }
  fft_inplace(h);
  return h;
}

}  // namespace

double ProjectionGeometry::angle(std::size_t i) const {
  return std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_angles);
}

double ProjectionGeometry::detector_offset(std::size_t j) const {
  return (static_cast<double>(j) - 0.5 * static_cast<double>(n_detectors - 1)) * detector_spacing;
}

void ProjectionGeometry::check_covers(std::size_t width, std::size_t height) const {
  if (n_angles == 0 || n_detectors == 0 || !(detector_spacing > 0.0)) {
    throw std::invalid_argument("ProjectionGeometry: angles, detectors and spacing must be positive");
  }
  const double diag = std::hypot(static_cast<double>(width), static_cast<double>(height));
  if (static_cast<double>(n_detectors) * detector_spacing < diag) {
    throw std::invalid_argument("ProjectionGeometry: " + std::to_string(n_detectors) + " detectors x " +
                                std::to_string(detector_spacing) + " px do not cover image diagonal " +
                                std::to_string(diag));
  }
}

ProjectionGeometry ProjectionGeometry::covering(std::size_t width, std::size_t height, std::size_t n_angles) {
  const double diag = std::hypot(static_cast<double>(width), static_cast<double>(height));
  auto n = static_cast<std::size_t>(std::ceil(diag));
  n += (n % 2 == 0) ? 1 : 2;  // odd count puts a bin on the axis, plus margin
  return ProjectionGeometry{n_angles, n, 1.0};
}

Sinogram radon_forward(const Image& attenuation, const ProjectionGeometry& geom) {
  geom.check_covers(attenuation.width(), attenuation.height());
  Sinogram sino{geom.n_angles, geom.n_detectors, std::vector<double>(geom.n_angles * geom.n_detectors)};
  const double cx = 0.5 * static_cast<double>(attenuation.width() - 1);
  const double cy = 0.5 * static_cast<double>(attenuation.height() - 1);
  const double reach =
      0.5 * std::hypot(static_cast<double>(attenuation.width()), static_cast<double>(attenuation.height())) + 1.0;
  const auto n_steps = static_cast<std::ptrdiff_t>(std::ceil(reach / kRayStep));

  for (std::size_t a = 0; a < geom.n_angles; ++a) {
    const double th = geom.angle(a);
    const double ct = std::cos(th), st = std::sin(th);
    for (std::size_t d = 0; d < geom.n_detectors; ++d) {
      const double t = geom.detector_offset(d);
      double sum = 0.0;
      for (std::ptrdiff_t k = -n_steps; k <= n_steps; ++k) {
        const double s = static_cast<double>(k) * kRayStep;
        const double x = t * ct - s * st;
        const double y = t * st + s * ct;
        sum += sample_zero(attenuation, y + cy, x + cx);
      }
      sino.at(a, d) = sum * kRayStep;
    }
  }
  return sino;
}

Sinogram sinogram_poisson(const Sinogram& sino, const PoissonSpec& spec, Seed seed) {
  if (!(spec.source_intensity > 0.0)) throw std::invalid_argument("sinogram_poisson: N0 must be > 0");
  std::size_t worst = 0;
  for (std::size_t i = 1; i < sino.values.size(); ++i) {
    if (sino.values[i] > sino.values[worst]) worst = i;
  }
  if (!sino.values.empty() && std::exp(-sino.values[worst]) * spec.source_intensity < 1.0) {
    throw std::invalid_argument(
        "sinogram_poisson: exp(-p_a)*N0 < 1 at angle " + std::to_string(worst / sino.n_detectors) + ", bin " +
        std::to_string(worst % sino.n_detectors) + " (p_a = " + std::to_string(sino.values[worst]) + ")");
  }
  Engine eng = make_engine(seed);
  Sinogram out = sino;
  const double n0 = spec.source_intensity;
  for (double& v : out.values) {
    const double expected = std::exp(-v) * n0;
    const auto counts = std::max<std::int64_t>(sample_poisson(eng, expected), 1);
    v = std::max(0.0, -std::log(static_cast<double>(counts) / n0));
  }
  return out;
}

Image fbp_reconstruct(const Sinogram& sino, const ProjectionGeometry& geom, std::size_t width, std::size_t height) {
  check_sinogram(sino, geom);
  const std::size_t nd = geom.n_detectors;
  const std::size_t padded = std::bit_ceil(2 * nd);
  const auto response = ramlak_response(padded, geom.detector_spacing);

  std::vector<double> filtered(geom.n_angles * nd);
  std::vector<Complex> row(padded);
  for (std::size_t a = 0; a < geom.n_angles; ++a) {
    std::fill(row.begin(), row.end(), Complex{});
    for (std::size_t d = 0; d < nd; ++d) row[d] = sino.at(a, d);
    fft_inplace(row);
    for (std::size_t k = 0; k < padded; ++k) row[k] *= response[k];
    fft_inplace(row, true);
    for (std::size_t d = 0; d < nd; ++d) filtered[a * nd + d] = row[d].real() * geom.detector_spacing;
  }

  Image out(width, height);
  const double cx = 0.5 * static_cast<double>(width - 1);
  const double cy = 0.5 * static_cast<double>(height - 1);
  const double center_bin = 0.5 * static_cast<double>(nd - 1);
  for (std::size_t a = 0; a < geom.n_angles; ++a) {
    const double th = geom.angle(a);
    const double ct = std::cos(th) / geom.detector_spacing, st = std::sin(th) / geom.detector_spacing;
    const double* q = filtered.data() + a * nd;
    for (std::size_t r = 0; r < height; ++r) {
      const double y = static_cast<double>(r) - cy;
      for (std::size_t c = 0; c < width; ++c) {
        const double x = static_cast<double>(c) - cx;
        const double pos = x * ct + y * st + center_bin;
        const double fl = std::floor(pos);
        const auto i0 = static_cast<std::ptrdiff_t>(fl);
        if (i0 < 0 || i0 + 1 >= static_cast<std::ptrdiff_t>(nd)) continue;
        const double f = pos - fl;
        out.at(r, c) += (1 - f) * q[i0] + f * q[i0 + 1];
      }
    }
  }
  const double scale = std::numbers::pi / static_cast<double>(geom.n_angles);
  for (double& v : out.pixels()) v *= scale;
  return out;
}

Image inject_ct_noise(const Image& attenuation, const ProjectionGeometry& geom, const PoissonSpec& spec, Seed seed) {
  const Sinogram clean = radon_forward(attenuation, geom);
  return fbp_reconstruct(sinogram_poisson(clean, spec, seed), geom, attenuation.width(), attenuation.height());
}

Image ct_noise_pixels(const Image& img, const PoissonSpec& spec, Seed seed, std::size_t n_angles) {
  spec.validate();
  const double diag = std::hypot(static_cast<double>(img.width()), static_cast<double>(img.height()));
  const double to_mu = spec.attenuation_max / diag;
  Image mu = clamp01(img);
  for (double& v : mu.pixels()) v *= to_mu;
  const auto geom = ProjectionGeometry::covering(img.width(), img.height(), n_angles);
  Image out = inject_ct_noise(mu, geom, spec, seed);
  for (double& v : out.pixels()) v /= to_mu;
  return clamp01(std::move(out));
}

namespace {

double lag_correlation(const Image& r, std::ptrdiff_t dx, std::ptrdiff_t dy) {
  const auto w = static_cast<std::ptrdiff_t>(r.width()), h = static_cast<std::ptrdiff_t>(r.height());
  const double m = mean(r);
  double num = 0.0, den_a = 0.0, den_b = 0.0;
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    const std::ptrdiff_t y2 = y + dy;
    if (y2 < 0 || y2 >= h) continue;
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const std::ptrdiff_t x2 = x + dx;
      if (x2 < 0 || x2 >= w) continue;
      const double a = r.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) - m;
      const double b = r.at(static_cast<std::size_t>(y2), static_cast<std::size_t>(x2)) - m;
      num += a * b;
      den_a += a * a;
      den_b += b * b;
    }
  }
  if (den_a == 0.0 || den_b == 0.0) return 0.0;
  return num / std::sqrt(den_a * den_b);
}

}  // namespace

double directional_correlation_length(const Image& residual, std::size_t max_lag) {
  static constexpr std::array<std::array<int, 2>, 8> kDirections = {
      {{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 1}, {1, 2}, {2, -1}, {1, -2}}};
  double best = 0.0;
  for (const auto& [dx, dy] : kDirections) {
    const double step = std::hypot(dx, dy);
    double length = 0.0;
    for (std::size_t l = 1; l <= max_lag; ++l) {
      const auto li = static_cast<std::ptrdiff_t>(l);
      length += std::max(0.0, lag_correlation(residual, dx * li, dy * li)) * step;
    }
    best = std::max(best, length);
  }
  return best;
}

double neighbor_correlation(const Image& residual) {
  return 0.25 * (lag_correlation(residual, 1, 0) + lag_correlation(residual, -1, 0) +
                 lag_correlation(residual, 0, 1) + lag_correlation(residual, 0, -1));
}

void write_sinogram(const std::filesystem::path& path, const Sinogram& sino) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os.write(kSinoMagic.data(), static_cast<std::streamsize>(kSinoMagic.size()));
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(sino.n_angles));
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(sino.n_detectors));
  for (double v : sino.values) binio::put_le<float>(os, static_cast<float>(v));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Sinogram read_sinogram(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const std::string ctx = path.string();
  binio::expect_magic(is, kSinoMagic, ctx);
  Sinogram sino;
  sino.n_angles = binio::get_le<std::uint32_t>(is, ctx);
  sino.n_detectors = binio::get_le<std::uint32_t>(is, ctx);
  sino.values.resize(sino.n_angles * sino.n_detectors);
  for (double& v : sino.values) v = binio::get_le<float>(is, ctx);
  return sino;
}

}  // namespace confound
