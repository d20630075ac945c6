#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's numerical kernels.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "confound/image.hpp"

namespace confound::test {

using Cx = std::complex<double>;

inline Image random_image(std::size_t w, std::size_t h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(w, h);
  for (double& v : img.pixels()) v = u(eng);
  return img;
}

// X[u][v] = sum_r sum_c x[r][c] exp(-2 pi i (u r / H + v c / W)), row-major.
inline std::vector<Cx> naive_dft2(const Image& img) {
  const std::size_t w = img.width(), h = img.height();
  std::vector<Cx> out(w * h);
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      Cx acc = 0;
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          const double ph = -2.0 * std::numbers::pi *
                            (static_cast<double>(u * r % h) / static_cast<double>(h) +
                             static_cast<double>(v * c % w) / static_cast<double>(w));
          acc += img.at(r, c) * Cx(std::cos(ph), std::sin(ph));
        }
      }
      out[u * w + v] = acc;
    }
  }
  return out;
}

inline Image naive_idft2_real(const std::vector<Cx>& coef, std::size_t w, std::size_t h) {
  Image out(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      Cx acc = 0;
      for (std::size_t u = 0; u < h; ++u) {
        for (std::size_t v = 0; v < w; ++v) {
          const double ph = 2.0 * std::numbers::pi *
                            (static_cast<double>(u * r % h) / static_cast<double>(h) +
                             static_cast<double>(v * c % w) / static_cast<double>(w));
          acc += coef[u * w + v] * Cx(std::cos(ph), std::sin(ph));
        }
      }
      out.at(r, c) = acc.real() / static_cast<double>(w * h);
    }
  }
  return out;
}

// Distance of bin k from DC after an fftshift of an n-point axis.
inline double shifted_distance(std::size_t k, std::size_t n) {
  const auto shifted = (k + n / 2) % n;  // position after fftshift
  return std::abs(static_cast<double>(shifted) - static_cast<double>(n / 2));
}

// Naive ideal low-pass: brute-force DFT, disk mask on centred frequencies,
// brute-force inverse.
inline Image naive_low_pass(const Image& img, double d0) {
  auto coef = naive_dft2(img);
  const std::size_t w = img.width(), h = img.height();
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      if (std::hypot(shifted_distance(u, h), shifted_distance(v, w)) > d0) coef[u * w + v] = 0;
    }
  }
  return naive_idft2_real(coef, w, h);
}

// P(score+ > score-) + 0.5 P(tie) by explicit pair counting.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

// Exact two-sided permutation p-value over every relabelling of the pooled
// sample (no add-one smoothing).
inline double exhaustive_permutation_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  const std::size_t n = pool.size(), na = a.size();
  double total = 0;
  for (double v : pool) total += v;
  const auto mean_diff = [&](double sum_a) {
    return sum_a / static_cast<double>(na) - (total - sum_a) / static_cast<double>(n - na);
  };
  double sum_a = 0;
  for (double v : a) sum_a += v;
  const double observed = std::abs(mean_diff(sum_a));
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(na), true);
  std::size_t hits = 0, count = 0;
  do {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += pick[i] ? pool[i] : 0.0;
    ++count;
    if (std::abs(mean_diff(s)) >= observed - 1e-12) ++hits;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return static_cast<double>(hits) / static_cast<double>(count);
}

// Uniform disk of value mu, centred, with the given radius in pixels.
inline Image disk(std::size_t side, double radius, double mu) {
  Image img(side, side);
  const double c = 0.5 * static_cast<double>(side);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t col = 0; col < side; ++col) {
      const double dy = static_cast<double>(r) + 0.5 - c, dx = static_cast<double>(col) + 0.5 - c;
      if (dx * dx + dy * dy <= radius * radius) img.at(r, col) = mu;
    }
  }
  return img;
}

// Soft-tissue disk holding two small dense inclusions on the horizontal
// axis; rays through both inclusions are nearly photon-starved at low N0.
inline Image dense_inclusion_phantom(std::size_t side, double mu_soft, double mu_dense, double inclusion_radius) {
  Image img = disk(side, 0.45 * static_cast<double>(side), mu_soft);
  const double c = 0.5 * static_cast<double>(side);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t col = 0; col < side; ++col) {
      for (const double ox : {-0.25, 0.25}) {
        const double dx = static_cast<double>(col) + 0.5 - c - ox * static_cast<double>(side);
        const double dy = static_cast<double>(r) + 0.5 - c;
        if (dx * dx + dy * dy <= inclusion_radius * inclusion_radius) img.at(r, col) = mu_dense;
      }
    }
  }
  return img;
}

// Shepp-Logan-style head phantom (ten ellipses, modified intensities).
inline Image shepp_logan(std::size_t side) {
  struct E {
    double a, x0, y0, ax, ay, phi_deg;
  };
  static const E kEllipses[] = {
      {1.0, 0, 0, 0.69, 0.92, 0},         {-0.8, 0, -0.0184, 0.6624, 0.874, 0},
      {-0.2, 0.22, 0, 0.11, 0.31, -18},   {-0.2, -0.22, 0, 0.16, 0.41, 18},
      {0.1, 0, 0.35, 0.21, 0.25, 0},      {0.1, 0, 0.1, 0.046, 0.046, 0},
      {0.1, 0, -0.1, 0.046, 0.046, 0},    {0.1, -0.08, -0.605, 0.046, 0.023, 0},
      {0.1, 0, -0.606, 0.023, 0.023, 0},  {0.1, 0.06, -0.605, 0.023, 0.046, 0},
  };
  Image img(side, side);
  const auto s = static_cast<double>(side);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const double x = (static_cast<double>(c) + 0.5) / s * 2 - 1;
      const double y = 1 - (static_cast<double>(r) + 0.5) / s * 2;
      double v = 0;
      for (const E& e : kEllipses) {
        const double t = e.phi_deg * std::numbers::pi / 180;
        const double xr = (x - e.x0) * std::cos(t) + (y - e.y0) * std::sin(t);
        const double yr = -(x - e.x0) * std::sin(t) + (y - e.y0) * std::cos(t);
        if ((xr * xr) / (e.ax * e.ax) + (yr * yr) / (e.ay * e.ay) <= 1) v += e.a;
      }
      img.at(r, c) = v;
    }
  }
  return img;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("confound-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace confound::test
