#include "aporo/common/region.hpp"

#include <string>

#include "aporo/common/text.hpp"

namespace aporo {

std::string_view to_string(Region region) {
  switch (region) {
    case Region::NorthAmerica:
      return "NorthAmerica";
    case Region::Europe:
      return "Europe";
    case Region::Africa:
      return "Africa";
    case Region::SouthAsia:
      return "SouthAsia";
    case Region::Oceania:
      return "Oceania";
    case Region::Other:
      return "Other";
  }
  return "Other";
}

std::string_view display_name(Region region) {
  switch (region) {
    case Region::NorthAmerica:
      return "North America";
    case Region::SouthAsia:
      return "South Asia";
    default:
      return to_string(region);
  }
}

std::optional<Region> region_from_string(std::string_view s) {
  std::string key;
  for (char c : text::to_lower(s)) {
    if (c != ' ' && c != '_' && c != '-') key.push_back(c);
  }
  for (Region r : kAllRegions) {
    if (key == text::to_lower(to_string(r))) return r;
  }
  return std::nullopt;
}

}  // namespace aporo
