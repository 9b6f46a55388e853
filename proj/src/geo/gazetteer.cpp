#include "aporo/geo/gazetteer.hpp"

#include <fstream>

#include "aporo/common/error.hpp"
#include "aporo/common/text.hpp"

namespace aporo::geo {

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::Country:
      return "country";
    case Tier::Subdivision:
      return "subdivision";
    case Tier::City:
      return "city";
  }
  return "country";
}

namespace {

Tier tier_from_string(std::string_view s, std::size_t line) {
  const auto lower = text::to_lower(s);
  if (lower == "country") return Tier::Country;
  if (lower == "subdivision" || lower == "state" || lower == "province") return Tier::Subdivision;
  if (lower == "city") return Tier::City;
  throw ParseError("unknown tier '" + std::string(s) + "'", line);
}

bool is_code(std::string_view name) {
  return name.size() == 2 && name[0] >= 'A' && name[0] <= 'Z' && name[1] >= 'A' && name[1] <= 'Z';
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.emplace_back(text::trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Hit {
  std::size_t position;
  std::size_t length;
};

std::optional<Hit> find_name(std::string_view location, std::string_view lower_location,
                             const GazetteerEntry& entry) {
  if (is_code(entry.name)) {
    // Standalone upper-case token delimited by start/end, spaces or commas.
    std::size_t pos = location.find(entry.name);
    while (pos != std::string_view::npos) {
      const bool left_ok = pos == 0 || location[pos - 1] == ',' || text::is_space(location[pos - 1]);
      const std::size_t after = pos + entry.name.size();
      const bool right_ok = after == location.size() || location[after] == ',' || text::is_space(location[after]);
      if (left_ok && right_ok) return Hit{pos, entry.name.size()};
      pos = location.find(entry.name, pos + 1);
    }
    return std::nullopt;
  }
  const auto needle = text::to_lower(entry.name);
  if (needle.empty()) return std::nullopt;
  std::size_t pos = lower_location.find(needle);
  while (pos != std::string_view::npos) {
    const std::size_t after = pos + needle.size();
    const bool left_ok = pos == 0 || !text::is_alnum(lower_location[pos - 1]) || !text::is_alnum(needle.front());
    const bool right_ok =
        after == lower_location.size() || !text::is_alnum(lower_location[after]) || !text::is_alnum(needle.back());
    if (left_ok && right_ok) return Hit{pos, needle.size()};
    pos = lower_location.find(needle, pos + 1);
  }
  return std::nullopt;
}

}  // namespace

Gazetteer Gazetteer::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open gazetteer " + path);
  Gazetteer gaz;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (text::trim(line).empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 3) throw ParseError("expected name<TAB>tier<TAB>region", lineno);
    auto region = region_from_string(fields[2]);
    if (!region) throw ParseError("unknown region '" + fields[2] + "'", lineno);
    GazetteerEntry e{fields[0], tier_from_string(fields[1], lineno), *region,
                     fields.size() > 3 && !fields[3].empty() ? fields[3] : fields[0]};
    gaz.add(std::move(e));
  }
  return gaz;
}

void Gazetteer::add(GazetteerEntry entry) { entries_.push_back(std::move(entry)); }

const GazetteerEntry* Gazetteer::lookup_country(std::string_view place) const {
  const auto key = text::to_lower(text::trim(place));
  if (key.empty()) return nullptr;
  for (const auto& e : entries_) {
    if (e.tier == Tier::Country && text::to_lower(e.name) == key) return &e;
  }
  return nullptr;
}

const GazetteerEntry* Gazetteer::match_location(std::string_view location) const {
  const auto lower = text::to_lower(location);
  for (Tier tier : {Tier::Country, Tier::Subdivision, Tier::City}) {
    const GazetteerEntry* best = nullptr;
    Hit best_hit{};
    for (const auto& e : entries_) {
      if (e.tier != tier) continue;
      auto hit = find_name(location, lower, e);
      if (!hit) continue;
      if (!best || hit->length > best_hit.length ||
          (hit->length == best_hit.length && hit->position < best_hit.position)) {
        best = &e;
        best_hit = *hit;
      }
    }
    if (best) return best;
  }
  return nullptr;
}

Resolution resolve_location(const ingest::PostRecord& record, const Gazetteer& gaz) {
  if (record.place_country) {
    if (const auto* e = gaz.lookup_country(*record.place_country)) {
      return {e->region, e->country, LocationSource::Place};
    }
  }
  if (record.user_location_raw) {
    if (const auto* e = gaz.match_location(*record.user_location_raw)) {
      return {e->region, e->country, LocationSource::UserLocation};
    }
  }
  return {};
}

void resolve_all(std::vector<ingest::PostRecord>& records, const Gazetteer& gaz) {
  for (auto& r : records) {
    const auto res = resolve_location(r, gaz);
    r.region = res.region;
    r.country = res.country;
  }
}

nlohmann::json RegionDistribution::to_json() const {
  nlohmann::json counts_j = nlohmann::json::object();
  nlohmann::json fractions_j = nlohmann::json::object();
  for (Region r : kAllRegions) {
    counts_j[std::string(aporo::to_string(r))] = counts[index_of(r)];
    fractions_j[std::string(aporo::to_string(r))] = fraction(r);
  }
  return {{"total", total}, {"counts", counts_j}, {"fractions", fractions_j}};
}

RegionDistribution region_distribution(const std::vector<Region>& regions) {
  RegionDistribution d;
  for (Region r : regions) ++d.counts[index_of(r)];
  d.total = regions.size();
  return d;
}

RegionDistribution region_distribution(const std::vector<ingest::PostRecord>& records) {
  std::vector<Region> regions;
  regions.reserve(records.size());
  for (const auto& r : records) {
    if (!r.region) throw ContractViolation("record " + r.id + " has no region");
    regions.push_back(*r.region);
  }
  return region_distribution(regions);
}

}  // namespace aporo::geo
