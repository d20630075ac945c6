#include "confound/confounder.hpp"

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace confound {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Glyphs serialise as rows of '#' (ink) and '.'.
std::vector<std::string> glyph_rows(const GlyphMask& g) {
  std::vector<std::string> rows(g.height, std::string(g.width, '.'));
  for (std::size_t r = 0; r < g.height; ++r) {
    for (std::size_t c = 0; c < g.width; ++c) {
      if (g.at(r, c)) rows[r][c] = '#';
    }
  }
  return rows;
}

GlyphMask glyph_from_rows(const std::vector<std::string>& rows) {
  if (rows.empty() || rows.front().empty()) throw std::invalid_argument("tag glyph must be non-empty");
  GlyphMask g{rows.front().size(), rows.size(), {}};
  for (const auto& row : rows) {
    if (row.size() != g.width) throw std::invalid_argument("tag glyph rows must have equal length");
    for (char ch : row) {
      if (ch != '#' && ch != '.') throw std::invalid_argument("tag glyph rows may only contain '#' and '.'");
      g.bits.push_back(ch == '#' ? 1 : 0);
    }
  }
  return g;
}

}  // namespace

std::string_view to_string(Label l) { return l == Label::kPositive ? "positive" : "negative"; }

Label parse_label(std::string_view text) {
  if (text == "positive" || text == "1") return Label::kPositive;
  if (text == "negative" || text == "0") return Label::kNegative;
  throw std::invalid_argument("unknown label '" + std::string(text) + "'");
}

void ConfounderSpec::validate() const {
  if (!(p_art >= 0.0 && p_art <= 1.0)) throw std::invalid_argument("ConfounderSpec: p_art must be in [0, 1]");
  std::visit(Overloaded{
                 [](const LowPassConfounder& c) {
                   if (c.filter.cutoff < 0) throw std::invalid_argument("ConfounderSpec: d0 must be >= 0");
                 },
                 [](const PoissonImageConfounder& c) { c.noise.validate(); },
                 [](const PoissonCtConfounder& c) {
                   c.noise.validate();
                   if (c.n_angles == 0) throw std::invalid_argument("ConfounderSpec: angles must be >= 1");
                 },
                 [](const PoissonTwoLevelConfounder& c) {
                   c.primary.validate();
                   c.secondary.validate();
                 },
                 [](const auto&) {},
             },
             kind);
}

std::string kind_name(const ConfounderKind& kind) {
  return std::visit(Overloaded{
                        [](const TagConfounder&) -> std::string { return "tag"; },
                        [](const LowPassConfounder&) -> std::string { return "lowpass"; },
                        [](const PoissonImageConfounder&) -> std::string { return "poisson"; },
                        [](const PoissonCtConfounder&) -> std::string { return "poisson_ct"; },
                        [](const PoissonTwoLevelConfounder&) -> std::string { return "poisson_two_level"; },
                        [](const GenderConfounder&) -> std::string { return "gender"; },
                        [](const CustomConfounder& c) -> std::string { return c.name; },
                    },
                    kind);
}

TaxonomyPath classify(const ConfounderSpec& spec) {
  using L = ConfounderLevel;
  using C = ConfounderCategory;
  return std::visit(Overloaded{
                        [](const TagConfounder&) { return TaxonomyPath(L::kEnvironment, C::kExternal, "tag"); },
                        [](const LowPassConfounder&) {
                          return TaxonomyPath(L::kEnvironment, C::kImaging, "denoising");
                        },
                        [](const PoissonImageConfounder&) {
                          return TaxonomyPath(L::kEnvironment, C::kImaging, "poisson-noise");
                        },
                        [](const PoissonCtConfounder&) {
                          return TaxonomyPath(L::kEnvironment, C::kImaging, "poisson-noise-ct");
                        },
                        [](const PoissonTwoLevelConfounder&) {
                          return TaxonomyPath(L::kEnvironment, C::kImaging, "poisson-noise-two-level");
                        },
                        [](const GenderConfounder&) { return TaxonomyPath(L::kPatient, C::kDemographic, "gender"); },
                        [](const CustomConfounder& c) {
                          if (!c.path) {
                            throw std::invalid_argument("classify: custom confounder '" + c.name +
                                                        "' does not declare a taxonomy path");
                          }
                          return *c.path;
                        },
                    },
                    spec.kind);
}

Image apply_treatment(const Image& img, const ConfounderSpec& spec, Treatment treatment, Seed seed) {
  if (treatment == Treatment::kNone) return img;
  return std::visit(Overloaded{
                        [&](const TagConfounder& c) {
                          const TagSpec tag = c.tag ? *c.tag : default_tag(std::min(img.width(), img.height()));
                          return stamp_tag(img, tag);
                        },
                        [&](const LowPassConfounder& c) { return clamp01(low_pass(img, c.filter)); },
                        [&](const PoissonImageConfounder& c) { return poisson_noise_image(img, c.noise, seed); },
                        [&](const PoissonCtConfounder& c) { return ct_noise_pixels(img, c.noise, seed, c.n_angles); },
                        [&](const PoissonTwoLevelConfounder& c) {
                          return poisson_noise_image(img, treatment == Treatment::kSecondary ? c.secondary : c.primary,
                                                     seed);
                        },
                        [&](const GenderConfounder&) { return img; },
                        [&](const CustomConfounder&) { return img; },
                    },
                    spec.kind);
}

ConfounderSpec confounder_from_json(const nlohmann::json& j) {
  ConfounderSpec spec;
  const auto kind = j.at("kind").get<std::string>();
  const double a_max = j.value("a_max", 4.0);
  if (kind == "tag") {
    TagConfounder t;
    if (j.contains("anchor") || j.contains("scale") || j.contains("text") || j.contains("intensity") ||
        j.contains("glyph")) {
      TagSpec tag;
      tag.glyph = j.contains("glyph") ? glyph_from_rows(j.at("glyph").get<std::vector<std::string>>())
                                      : render_glyph(j.value("text", std::string("R")), j.value("scale", std::size_t{1}));
      const auto anchor = j.value("anchor", std::vector<std::size_t>{200, 200});
      if (anchor.size() != 2) throw std::invalid_argument("tag anchor must be [row, col]");
      tag.anchor_row = anchor[0];
      tag.anchor_col = anchor[1];
      tag.intensity = j.value("intensity", 1.0);
      t.tag = tag;
    }
    spec.kind = t;
  } else if (kind == "lowpass") {
    spec.kind = LowPassConfounder{{j.value("d0", 500.0)}};
  } else if (kind == "poisson") {
    spec.kind = PoissonImageConfounder{{j.value("n0", 2e7), a_max}};
  } else if (kind == "poisson_ct") {
    spec.kind = PoissonCtConfounder{{j.value("n0", 2e7), a_max}, j.value("angles", std::size_t{180})};
  } else if (kind == "poisson_two_level") {
    spec.kind = PoissonTwoLevelConfounder{{j.value("n0_primary", 2e7), a_max}, {j.value("n0_secondary", 1e7), a_max}};
  } else if (kind == "gender") {
    spec.kind = GenderConfounder{};
  } else if (kind == "custom") {
    CustomConfounder c{j.value("name", std::string("custom")), std::nullopt};
    if (j.contains("path")) c.path = TaxonomyPath::parse(j.at("path").get<std::string>());
    spec.kind = c;
  } else {
    throw std::invalid_argument("unknown confounder kind '" + kind + "'");
  }
  spec.target_class = parse_label(j.value("target", std::string("positive")));
  spec.p_art = j.value("p_art", 1.0);
  spec.validate();
  return spec;
}

nlohmann::json to_json(const ConfounderSpec& spec) {
  nlohmann::json j = {{"kind", kind_name(spec.kind)},
                      {"target", std::string(to_string(spec.target_class))},
                      {"p_art", spec.p_art}};
  std::visit(Overloaded{
                 [&](const TagConfounder& c) {
                   if (c.tag) {
                     j["glyph"] = glyph_rows(c.tag->glyph);
                     j["anchor"] = {c.tag->anchor_row, c.tag->anchor_col};
                     j["intensity"] = c.tag->intensity;
                   }
                 },
                 [&](const LowPassConfounder& c) { j["d0"] = c.filter.cutoff; },
                 [&](const PoissonImageConfounder& c) {
                   j["n0"] = c.noise.source_intensity;
                   j["a_max"] = c.noise.attenuation_max;
                 },
                 [&](const PoissonCtConfounder& c) {
                   j["n0"] = c.noise.source_intensity;
                   j["a_max"] = c.noise.attenuation_max;
                   j["angles"] = c.n_angles;
                 },
                 [&](const PoissonTwoLevelConfounder& c) {
                   j["n0_primary"] = c.primary.source_intensity;
                   j["n0_secondary"] = c.secondary.source_intensity;
                   j["a_max"] = c.primary.attenuation_max;
                 },
                 [&](const GenderConfounder&) {},
                 [&](const CustomConfounder& c) {
                   j["kind"] = "custom";
                   j["name"] = c.name;
                   if (c.path) j["path"] = c.path->str();
                 },
             },
             spec.kind);
  return j;
}

}  // namespace confound
