#pragma once

#include <string>
#include <string_view>

namespace confound {

enum class ConfounderLevel { kPatient, kEnvironment };
enum class ConfounderCategory { kDemographic, kAnatomical, kExternal, kImaging };

std::string_view to_string(ConfounderLevel level);
std::string_view to_string(ConfounderCategory category);

/// True iff the pair is admissible: patient-level confounders are
/// demographic or anatomical, environment-level ones external or imaging.
constexpr bool compatible(ConfounderLevel level, ConfounderCategory category) {
  switch (level) {
    case ConfounderLevel::kPatient:
      return category == ConfounderCategory::kDemographic || category == ConfounderCategory::kAnatomical;
    case ConfounderLevel::kEnvironment:
      return category == ConfounderCategory::kExternal || category == ConfounderCategory::kImaging;
  }
  return false;
}

/// A leaf of the confounder taxonomy. Level and category are a closed set;
/// the instance label is free text.
class TaxonomyPath {
 public:
  /// Throws std::invalid_argument for an incompatible level/category pair.
  TaxonomyPath(ConfounderLevel level, ConfounderCategory category, std::string instance);

  ConfounderLevel level() const { return level_; }
  ConfounderCategory category() const { return category_; }
  const std::string& instance() const { return instance_; }

  /// "level/category/instance", e.g. "environment/external/tag".
  std::string str() const;
  static TaxonomyPath parse(std::string_view text);

  bool operator==(const TaxonomyPath&) const = default;

 private:
  ConfounderLevel level_;
  ConfounderCategory category_;
  std::string instance_;
};

}  // namespace confound
