#include <doctest.h>

#include "aporo/geo/gazetteer.hpp"
#include "test_util.hpp"

using namespace aporo;
using namespace aporo::geo;

namespace {

const Gazetteer& gaz() {
  static const Gazetteer g = Gazetteer::load(testutil::data_path("gazetteer.tsv"));
  return g;
}

Region region_of(std::optional<std::string> place, std::optional<std::string> loc) {
  ingest::PostRecord r;
  r.id = "x";
  r.place_country = std::move(place);
  r.user_location_raw = std::move(loc);
  return resolve_region(r, gaz());
}

}  // namespace

TEST_SUITE("geo") {
  TEST_CASE("examples") {
    CHECK(region_of({}, "Lagos, Nigeria") == Region::Africa);
    CHECK(region_of({}, "Austin, TX") == Region::NorthAmerica);
    CHECK(region_of({}, {}) == Region::Other);
    CHECK(region_of({}, "somewhere on Earth") == Region::Other);
    CHECK(region_of({}, "") == Region::Other);
    CHECK(region_of({}, "Dubai, UAE") == Region::Other);
  }

  TEST_CASE("required country coverage") {
    const std::vector<std::pair<std::string, Region>> cases = {
        {"United States", Region::NorthAmerica}, {"Canada", Region::NorthAmerica}, {"United Kingdom", Region::Europe},
        {"Ireland", Region::Europe},             {"France", Region::Europe},       {"Germany", Region::Europe},
        {"Nigeria", Region::Africa},             {"South Africa", Region::Africa}, {"Kenya", Region::Africa},
        {"Uganda", Region::Africa},              {"Ghana", Region::Africa},        {"India", Region::SouthAsia},
        {"Pakistan", Region::SouthAsia},         {"Philippines", Region::SouthAsia}, {"Australia", Region::Oceania},
        {"New Zealand", Region::Oceania}};
    for (const auto& [name, region] : cases) {
      CAPTURE(name);
      REQUIRE(gaz().lookup_country(name));
      CHECK(gaz().lookup_country(name)->region == region);
      CHECK(region_of(name, {}) == region);
    }
  }

  TEST_CASE("place overrides user location") {
    CHECK(region_of("India", "London") == Region::SouthAsia);
    CHECK(region_of("Atlantis", "London") == Region::Europe);
  }

  TEST_CASE("tier priority and code boundaries") {
    // Country beats city even when the city appears first.
    CHECK(region_of({}, "London, Ontario, Canada") == Region::NorthAmerica);
    CHECK(region_of({}, "CAmera shop") == Region::Other);
    CHECK(region_of({}, "Toronto ON") == Region::NorthAmerica);
    CHECK(region_of({}, "on the road") == Region::Other);
    CHECK(region_of({}, "sydney") == Region::Oceania);
  }

  TEST_CASE("resolution records the source and country") {
    ingest::PostRecord r;
    r.user_location_raw = "Austin, TX";
    const auto res = resolve_location(r, gaz());
    CHECK(res.source == LocationSource::UserLocation);
    CHECK(res.country == "United States");
    r.place_country = "Kenya";
    CHECK(resolve_location(r, gaz()).source == LocationSource::Place);
  }

  TEST_CASE("unrelated entries do not change results") {
    Gazetteer g = gaz();
    ingest::PostRecord r;
    r.user_location_raw = "Lagos, Nigeria";
    const auto before = resolve_region(r, g);
    g.add({"Atlantis", Tier::City, Region::Europe, "Atlantis"});
    CHECK(resolve_region(r, g) == before);
  }

  TEST_CASE("region distribution") {
    std::vector<Region> regions(10, Region::Europe);
    const auto d = region_distribution(regions);
    CHECK(d.counts[index_of(Region::Europe)] == 10);
    CHECK(d.total == 10);
    double sum = 0;
    for (Region r : kAllRegions) sum += d.fraction(r);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(region_distribution(std::vector<Region>{}).total == 0);
  }

  TEST_CASE("corpus proportions are reproduced from a fixed multinomial") {
    // Other 62%, North America 26%, Europe 7%, remainder spread.
    const std::vector<std::pair<std::string, std::size_t>> locations = {
        {"", 620}, {"Chicago", 260}, {"London", 70}, {"Lagos", 17}, {"Mumbai", 17}, {"Sydney", 16}};
    std::vector<ingest::PostRecord> recs;
    for (const auto& [loc, n] : locations) {
      for (std::size_t i = 0; i < n; ++i) {
        ingest::PostRecord r;
        r.id = loc + std::to_string(i);
        if (!loc.empty()) r.user_location_raw = loc;
        recs.push_back(r);
      }
    }
    resolve_all(recs, gaz());
    const auto d = region_distribution(recs);
    CHECK(d.counts[index_of(Region::Other)] == 620);
    CHECK(d.counts[index_of(Region::NorthAmerica)] == 260);
    CHECK(d.counts[index_of(Region::Europe)] == 70);
    CHECK(d.fraction(Region::Other) > 0.6);
  }
}
