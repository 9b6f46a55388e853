#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace aporo {

/// Top-level annotation class of a post.
enum class Label : std::uint8_t { Direct = 0, Reporting = 1, None = 2 };

inline constexpr std::array<Label, 3> kAllLabels{Label::Direct, Label::Reporting, Label::None};
inline constexpr std::size_t kNumLabels = kAllLabels.size();

/// Binary toxicity view: Direct is Toxic, everything else NonToxic.
enum class BinaryLabel : std::uint8_t { Toxic = 0, NonToxic = 1 };

inline constexpr std::array<BinaryLabel, 2> kAllBinaryLabels{BinaryLabel::Toxic, BinaryLabel::NonToxic};

std::string_view to_string(Label label);
std::string_view to_string(BinaryLabel label);

/// Case-insensitive exact parse of a class name ("direct", "Reporting", ...).
std::optional<Label> label_from_string(std::string_view text);
std::optional<BinaryLabel> binary_label_from_string(std::string_view text);

inline std::size_t index_of(Label label) { return static_cast<std::size_t>(label); }

}  // namespace aporo
