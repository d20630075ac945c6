#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json_fwd.hpp>

#include "confound/ct.hpp"
#include "confound/image.hpp"
#include "confound/imaging.hpp"
#include "confound/record.hpp"
#include "confound/taxonomy.hpp"

namespace confound {

struct TagConfounder {
  /// Unset: default_tag() for the image size at application time.
  std::optional<TagSpec> tag;
};
struct LowPassConfounder {
  LowPassSpec filter;
};
struct PoissonImageConfounder {
  PoissonSpec noise;
};
struct PoissonCtConfounder {
  PoissonSpec noise;
  std::size_t n_angles = 180;
};
/// Two noise levels: `primary` goes to the target class, `secondary` to the
/// other one (swapped in the o.o.d. test set).
struct PoissonTwoLevelConfounder {
  PoissonSpec primary{2e7, 4.0};
  PoissonSpec secondary{1e7, 4.0};
};
/// Patient gender; selected by sampling rather than injected.
struct GenderConfounder {};
/// User-supplied kind; must carry its own taxonomy path.
struct CustomConfounder {
  std::string name;
  std::optional<TaxonomyPath> path;
};

using ConfounderKind = std::variant<TagConfounder, LowPassConfounder, PoissonImageConfounder, PoissonCtConfounder,
                                    PoissonTwoLevelConfounder, GenderConfounder, CustomConfounder>;

struct ConfounderSpec {
  ConfounderKind kind;
  Label target_class = Label::kPositive;
  double p_art = 1.0;

  void validate() const;
};

/// What happens to one image.
enum class Treatment {
  kNone,
  kPrimary,    // the artifact (or the primary level of a two-level one)
  kSecondary,  // the secondary level of a two-level artifact
};

/// Throws std::invalid_argument for a custom kind without a declared path.
TaxonomyPath classify(const ConfounderSpec& spec);

std::string kind_name(const ConfounderKind& kind);

/// Applies the treatment to a copy of `img`; output is clamped to [0, 1].
/// Gender and custom kinds leave pixels untouched.
Image apply_treatment(const Image& img, const ConfounderSpec& spec, Treatment treatment, Seed seed);

/// JSON form used by experiment configs, e.g.
/// {"kind": "lowpass", "d0": 6, "target": "positive", "p_art": 1}.
ConfounderSpec confounder_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ConfounderSpec& spec);

}  // namespace confound
