#include "aporo/common/label.hpp"

#include "aporo/common/text.hpp"

namespace aporo {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Direct:
      return "Direct";
    case Label::Reporting:
      return "Reporting";
    case Label::None:
      return "None";
  }
  return "None";
}

std::string_view to_string(BinaryLabel label) {
  return label == BinaryLabel::Toxic ? "Toxic" : "NonToxic";
}

std::optional<Label> label_from_string(std::string_view s) {
  const auto lower = text::to_lower(text::trim(s));
  if (lower == "direct") return Label::Direct;
  if (lower == "reporting") return Label::Reporting;
  if (lower == "none") return Label::None;
  return std::nullopt;
}

std::optional<BinaryLabel> binary_label_from_string(std::string_view s) {
  const auto lower = text::to_lower(text::trim(s));
  if (lower == "toxic") return BinaryLabel::Toxic;
  if (lower == "nontoxic" || lower == "non-toxic" || lower == "non toxic") return BinaryLabel::NonToxic;
  return std::nullopt;
}

}  // namespace aporo
