#include "confound/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "confound/curator.hpp"
#include "confound/image_io.hpp"

namespace confound {
namespace {

struct Ellipse {
  double cx, cy, ax, ay;

  // Antialiased inside-weight; exactly 0 beyond half a pixel outside.
  double weight(double u, double v, double px_per_unit) const {
    const double e = std::hypot((u - cx) / ax, (v - cy) / ay);
    const double d = (e - 1.0) * std::min(ax, ay) * px_per_unit;
    return std::clamp(0.5 - d, 0.0, 1.0);
  }
};

double gaussian(Engine& eng) {
  const double u1 = uniform(eng, 0.0, 1.0);
  const double u2 = uniform(eng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

Image render_phantom(const PhantomOptions& o, Seed seed, Label label, bool female) {
  if (o.size < 8) throw std::invalid_argument("render_phantom: size must be >= 8");
  Engine eng = make_engine(seed);
  const auto S = static_cast<double>(o.size);
  const double px_per_unit = 0.5 * S;  // normalised coords span [-1, 1]

  const double bx = uniform(eng, -0.03, 0.03);
  const double by = 0.12 + uniform(eng, -0.03, 0.03);
  const double ax = uniform(eng, 0.46, 0.52) * (female ? 0.92 : 1.0);
  const double ay = uniform(eng, 0.50, 0.56);
  const Ellipse body{bx, by, ax, ay};

  std::array<Ellipse, 2> lungs{};
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? -1.0 : 1.0;
    lungs[side] = {bx + sign * 0.45 * ax * uniform(eng, 0.95, 1.05), by - 0.05, 0.36 * ax * uniform(eng, 0.95, 1.05),
                   0.62 * ay * uniform(eng, 0.95, 1.05)};
  }
  std::array<Ellipse, 2> shadows{};
  for (int side = 0; side < 2; ++side) {
    shadows[side] = {lungs[side].cx, by + 0.35 * ay, 0.35 * ax, 0.25 * ay};
  }

  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<Wave, 3> waves{};
  for (auto& w : waves) {
    w = {uniform(eng, -3.0, 3.0), uniform(eng, -3.0, 3.0), uniform(eng, 0.0, 2.0 * std::numbers::pi),
         o.texture_amplitude / 3.0};
  }

  // Mass: Gaussian blob centred inside the inner half of one lung.
  const bool has_mass = label == Label::kPositive;
  const Ellipse& host = lungs[uniform(eng, 0.0, 1.0) < 0.5 ? 0 : 1];
  const double rad = 0.5 * std::sqrt(uniform(eng, 0.0, 1.0));
  const double ang = uniform(eng, 0.0, 2.0 * std::numbers::pi);
  const double mass_u = host.cx + rad * host.ax * std::cos(ang);
  const double mass_v = host.cy + rad * host.ay * std::sin(ang);
  const double mass_sigma = uniform(eng, 1.2, 2.2) * S / 64.0 / px_per_unit;
  const double mass_amp = uniform(eng, kPhantomMassMin, kPhantomMassMax);

  Image img(o.size, o.size);
  for (std::size_t r = 0; r < o.size; ++r) {
    const double v = (static_cast<double>(r) + 0.5) / S * 2.0 - 1.0;
    for (std::size_t c = 0; c < o.size; ++c) {
      const double u = (static_cast<double>(c) + 0.5) / S * 2.0 - 1.0;
      const double wb = body.weight(u, v, px_per_unit);
      if (wb == 0.0) continue;
      const double wl = std::max(lungs[0].weight(u, v, px_per_unit), lungs[1].weight(u, v, px_per_unit));
      double val = kPhantomBody + wl * (kPhantomLung - kPhantomBody);
      for (const auto& w : waves) val += w.amp * std::cos(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
      if (female) {
        val += 0.05 * wl * std::max(shadows[0].weight(u, v, px_per_unit), shadows[1].weight(u, v, px_per_unit));
      }
      if (has_mass) {
        const double du = u - mass_u, dv = v - mass_v;
        val += mass_amp * std::exp(-(du * du + dv * dv) / (2.0 * mass_sigma * mass_sigma));
      }
      if (o.noise_sigma > 0.0) val += o.noise_sigma * gaussian(eng);
      img.at(r, c) = std::clamp(wb * val, 0.0, 1.0);
    }
  }
  return img;
}

PhantomSet generate_phantoms(std::size_t n, const PhantomOptions& options) {
  if (n < 2) throw std::invalid_argument("generate_phantoms: need at least 2 records");
  if (!(options.pos_fraction > 0.0 && options.pos_fraction < 1.0)) {
    throw std::invalid_argument("generate_phantoms: pos_fraction must be in (0, 1)");
  }
  if (options.images_per_patient == 0) throw std::invalid_argument("generate_phantoms: images_per_patient must be >= 1");
  const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * options.pos_fraction));
  PhantomSet set;
  set.records.reserve(n);
  set.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Record r;
    r.image_id = numbered("img", i, 5);
    r.patient_id = numbered("pat", i / options.images_per_patient, 5);
    r.label = i < n_pos ? Label::kPositive : Label::kNegative;
    Engine g = make_engine(derive_seed(options.seed, "gender:" + r.patient_id));
    const bool female = uniform(g, 0.0, 1.0) < 0.5;
    r.metadata["gender"] = female ? "Female" : "Male";
    set.images.push_back(render_phantom(options, derive_seed(options.seed, r.image_id), r.label, female));
    set.records.push_back(std::move(r));
  }
  return set;
}

PhantomSet write_phantom_dataset(std::size_t n, const PhantomOptions& options, const std::filesystem::path& dir) {
  PhantomSet set = generate_phantoms(n, options);
  std::filesystem::create_directories(dir / "images");
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    Record& r = set.records[i];
    const std::string rel = "images/" + r.image_id + ".png";
    write_png16(dir / rel, set.images[i]);
    r.source_path = (dir / rel).string();
    rows.push_back({r.image_id, r.patient_id, r.label, false, "", "", rel});
  }
  write_manifest(dir / "manifest.csv", rows);
  write_metadata(dir / "metadata.csv", set.records);
  return set;
}

}  // namespace confound
