#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/common/region.hpp"
#include "aporo/ingest/post_record.hpp"

namespace aporo::geo {

/// Matching priority: countries, then states/provinces, then cities.
enum class Tier { Country = 0, Subdivision = 1, City = 2 };

std::string_view to_string(Tier tier);

struct GazetteerEntry {
  std::string name;
  Tier tier = Tier::Country;
  Region region = Region::Other;
  /// Canonical country the entry belongs to ("United States" for "TX").
  std::string country;
};

/// Place names mapped to regions. Two-letter all-caps names (state, province
/// and country codes) only match as standalone upper-case tokens.
class Gazetteer {
 public:
  /// Loads "name<TAB>tier<TAB>region[<TAB>country]" lines; '#' starts a comment.
  static Gazetteer load(const std::string& path);

  void add(GazetteerEntry entry);
  const std::vector<GazetteerEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Exact (case-insensitive) lookup of a whole place field among countries.
  const GazetteerEntry* lookup_country(std::string_view place) const;

  /// Best entry mentioned in a free-text location, honouring tier priority.
  const GazetteerEntry* match_location(std::string_view location) const;

 private:
  std::vector<GazetteerEntry> entries_;
};

enum class LocationSource { Place, UserLocation, None };

struct Resolution {
  Region region = Region::Other;
  std::optional<std::string> country;
  LocationSource source = LocationSource::None;
};

/// Tweet place first, then user location; Other when nothing matches.
Resolution resolve_location(const ingest::PostRecord& record, const Gazetteer& gaz);

inline Region resolve_region(const ingest::PostRecord& record, const Gazetteer& gaz) {
  return resolve_location(record, gaz).region;
}

/// Sets region and country on every record.
void resolve_all(std::vector<ingest::PostRecord>& records, const Gazetteer& gaz);

struct RegionDistribution {
  std::array<std::size_t, kNumRegions> counts{};
  std::size_t total = 0;

  double fraction(Region r) const {
    return total ? static_cast<double>(counts[index_of(r)]) / static_cast<double>(total) : 0.0;
  }
  nlohmann::json to_json() const;
};

/// Counts per region. Records must already carry a region.
RegionDistribution region_distribution(const std::vector<ingest::PostRecord>& records);
RegionDistribution region_distribution(const std::vector<Region>& regions);

}  // namespace aporo::geo
