#include "confound/fft.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>

#include <fftw3.h>

namespace confound {
namespace {

static_assert(sizeof(Complex) == sizeof(fftw_complex));

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

// FFTW_ESTIMATE never touches the arrays while planning and picks the same
// algorithm every run, which keeps results bit-reproducible.
void execute(Plan plan, const char* what) {
  if (!plan) throw std::runtime_error(std::string(what) + ": FFTW planning failed");
  fftw_execute(plan.get());
}

}  // namespace

void fft_inplace(std::span<Complex> data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  auto* p = as_fftw(data.data());
  execute(Plan(fftw_plan_dft_1d(static_cast<int>(n), p, p, inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE)),
          "fft_inplace");
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (Complex& c : data) c *= scale;
  }
}

Spectrum dft2(const Image& img) {
  Spectrum s{img.width(), img.height(), std::vector<Complex>(img.pixels().begin(), img.pixels().end())};
  auto* p = as_fftw(s.coefficients.data());
  execute(Plan(fftw_plan_dft_2d(static_cast<int>(s.height), static_cast<int>(s.width), p, p, FFTW_FORWARD,
                                FFTW_ESTIMATE)),
          "dft2");
  return s;
}

Image idft2(const Spectrum& spec) {
  if (spec.coefficients.size() != spec.width * spec.height || spec.coefficients.empty()) {
    throw std::invalid_argument("idft2: coefficient count does not match dimensions");
  }
  std::vector<Complex> buf = spec.coefficients;
  auto* p = as_fftw(buf.data());
  execute(Plan(fftw_plan_dft_2d(static_cast<int>(spec.height), static_cast<int>(spec.width), p, p, FFTW_BACKWARD,
                                FFTW_ESTIMATE)),
          "idft2");
  Image out(spec.width, spec.height);
  const double scale = 1.0 / static_cast<double>(buf.size());
  std::transform(buf.begin(), buf.end(), out.data().begin(), [scale](const Complex& c) { return c.real() * scale; });
  return out;
}

}  // namespace confound
