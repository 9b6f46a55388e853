#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace aporo {

enum class Region : std::uint8_t { NorthAmerica = 0, Europe, Africa, SouthAsia, Oceania, Other };

inline constexpr std::array<Region, 6> kAllRegions{Region::NorthAmerica, Region::Europe, Region::Africa,
                                                   Region::SouthAsia,    Region::Oceania, Region::Other};
inline constexpr std::size_t kNumRegions = kAllRegions.size();

std::string_view to_string(Region region);

/// Accepts the canonical names ("NorthAmerica") and spaced display names ("North America").
std::optional<Region> region_from_string(std::string_view text);

/// Human-readable name used in report tables.
std::string_view display_name(Region region);

inline std::size_t index_of(Region region) { return static_cast<std::size_t>(region); }

}  // namespace aporo
