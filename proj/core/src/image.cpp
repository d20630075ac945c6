#include "confound/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace confound {

double energy(const Image& img) {
  double e = 0.0;
  for (double v : img.pixels()) e += v * v;
  return e;
}

double mean(const Image& img) {
  return std::accumulate(img.data().begin(), img.data().end(), 0.0) /
         static_cast<double>(img.size());
}

double max_abs_diff(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument("max_abs_diff: size mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double psnr(const Image& reference, const Image& test) {
  if (reference.width() != test.width() || reference.height() != test.height()) {
    throw std::invalid_argument("psnr: size mismatch");
  }
  double peak = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    peak = std::max(peak, std::abs(reference.data()[i]));
    const double d = reference.data()[i] - test.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(reference.size());
  if (mse == 0.0) return INFINITY;
  return 10.0 * std::log10(peak * peak / mse);
}

Image clamp01(Image img) {
  for (double& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Image downsample(const Image& img, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("downsample: factor must be >= 1");
  if (factor == 1) return img;
  const std::size_t w = img.width() / factor;
  const std::size_t h = img.height() / factor;
  if (w == 0 || h == 0) throw std::invalid_argument("downsample: factor larger than image");
  Image out(w, h);
  const double norm = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double s = 0.0;
      for (std::size_t dr = 0; dr < factor; ++dr)
        for (std::size_t dc = 0; dc < factor; ++dc) s += img.at(r * factor + dr, c * factor + dc);
      out.at(r, c) = s * norm;
    }
  }
  return out;
}

Image resize(const Image& img, std::size_t width, std::size_t height) {
  if (width == img.width() && height == img.height()) return img;
  if (img.width() % width == 0 && img.height() % height == 0 &&
      img.width() / width == img.height() / height) {
    return downsample(img, img.width() / width);
  }
  Image out(width, height);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(width);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(height);
  const auto maxc = static_cast<double>(img.width() - 1);
  const auto maxr = static_cast<double>(img.height() - 1);
  for (std::size_t r = 0; r < height; ++r) {
    const double y = std::clamp((static_cast<double>(r) + 0.5) * sy - 0.5, 0.0, maxr);
    const auto y0 = static_cast<std::size_t>(y);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t c = 0; c < width; ++c) {
      const double x = std::clamp((static_cast<double>(c) + 0.5) * sx - 0.5, 0.0, maxc);
      const auto x0 = static_cast<std::size_t>(x);
      const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = x - static_cast<double>(x0);
      out.at(r, c) = (1 - fy) * ((1 - fx) * img.at(y0, x0) + fx * img.at(y0, x1)) +
                     fy * ((1 - fx) * img.at(y1, x0) + fx * img.at(y1, x1));
    }
  }
  return out;
}

void require_finite(const Image& img, const char* what) {
  for (double v : img.pixels()) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite pixel value");
  }
}

}  // namespace confound
