#include "confound/taxonomy.hpp"

#include <stdexcept>

namespace confound {

std::string_view to_string(ConfounderLevel level) {
  return level == ConfounderLevel::kPatient ? "patient" : "environment";
}

std::string_view to_string(ConfounderCategory category) {
  switch (category) {
    case ConfounderCategory::kDemographic: return "demographic";
    case ConfounderCategory::kAnatomical: return "anatomical";
    case ConfounderCategory::kExternal: return "external";
    case ConfounderCategory::kImaging: return "imaging";
  }
  return "?";
}

TaxonomyPath::TaxonomyPath(ConfounderLevel level, ConfounderCategory category, std::string instance)
    : level_(level), category_(category), instance_(std::move(instance)) {
  if (!compatible(level, category)) {
    throw std::invalid_argument("taxonomy: category '" + std::string(to_string(category)) +
                                "' is not allowed at level '" + std::string(to_string(level)) + "'");
  }
  if (instance_.empty() || instance_.find('/') != std::string::npos) {
    throw std::invalid_argument("taxonomy: instance label must be nonempty and contain no '/'");
  }
}

std::string TaxonomyPath::str() const {
  return std::string(to_string(level_)) + "/" + std::string(to_string(category_)) + "/" + instance_;
}

TaxonomyPath TaxonomyPath::parse(std::string_view text) {
  const auto a = text.find('/');
  const auto b = a == std::string_view::npos ? a : text.find('/', a + 1);
  if (b == std::string_view::npos) {
    throw std::invalid_argument("taxonomy: expected level/category/instance, got '" + std::string(text) + "'");
  }
  const auto level_s = text.substr(0, a);
  const auto cat_s = text.substr(a + 1, b - a - 1);
  ConfounderLevel level;
  if (level_s == "patient") {
    level = ConfounderLevel::kPatient;
  } else if (level_s == "environment") {
    level = ConfounderLevel::kEnvironment;
  } else {
    throw std::invalid_argument("taxonomy: unknown level '" + std::string(level_s) + "'");
  }
  ConfounderCategory cat;
  if (cat_s == "demographic") {
    cat = ConfounderCategory::kDemographic;
  } else if (cat_s == "anatomical") {
    cat = ConfounderCategory::kAnatomical;
  } else if (cat_s == "external") {
    cat = ConfounderCategory::kExternal;
  } else if (cat_s == "imaging") {
    cat = ConfounderCategory::kImaging;
  } else {
    throw std::invalid_argument("taxonomy: unknown category '" + std::string(cat_s) + "'");
  }
  return TaxonomyPath(level, cat, std::string(text.substr(b + 1)));
}

}  // namespace confound
