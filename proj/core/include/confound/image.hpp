#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace confound {

/// Single-channel image, row-major, nominal intensity range [0, 1].
class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), pixels_(checked_count(width, height), fill) {}
  Image(std::size_t width, std::size_t height, std::vector<double> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != checked_count(width, height)) {
      throw std::invalid_argument("Image: pixel count " + std::to_string(pixels_.size()) +
                                  " does not match " + std::to_string(width) + "x" +
                                  std::to_string(height));
    }
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double& at(std::size_t row, std::size_t col) { return pixels_[row * width_ + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }

  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }
  std::vector<double>& data() { return pixels_; }
  const std::vector<double>& data() const { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  static std::size_t checked_count(std::size_t w, std::size_t h) {
    if (w == 0 || h == 0) throw std::invalid_argument("Image: width and height must be >= 1");
    return w * h;
  }

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> pixels_;
};

double energy(const Image& img);
double mean(const Image& img);
double max_abs_diff(const Image& a, const Image& b);
/// Peak signal-to-noise ratio in dB using the reference's max-abs as peak.
double psnr(const Image& reference, const Image& test);
Image clamp01(Image img);
/// Area-style resample to the requested size (bilinear when upsampling).
Image resize(const Image& img, std::size_t width, std::size_t height);
/// Block average by an integer factor; trailing partial blocks are dropped.
Image downsample(const Image& img, std::size_t factor);
void require_finite(const Image& img, const char* what);

}  // namespace confound
