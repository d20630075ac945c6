#pragma once

#include <map>
#include <string>
#include <string_view>

namespace confound {

enum class Label { kNegative = 0, kPositive = 1 };

inline int to_int(Label l) { return l == Label::kPositive ? 1 : 0; }
inline Label opposite(Label l) { return l == Label::kPositive ? Label::kNegative : Label::kPositive; }
std::string_view to_string(Label l);
Label parse_label(std::string_view text);

/// One dataset row: an image of one patient with its label and metadata.
struct Record {
  std::string image_id;
  std::string patient_id;
  Label label = Label::kNegative;
  std::map<std::string, std::string> metadata;  // e.g. "gender" -> "Female"
  std::string source_path;
};

}  // namespace confound
