#include <doctest.h>

#include "aporo/common/error.hpp"
#include "aporo/taxonomy/taxonomy.hpp"
#include "test_util.hpp"

using namespace aporo;
using namespace aporo::taxonomy;

namespace {

const Catalog& shipped() {
  static const Catalog c = Catalog::load(testutil::data_path("taxonomy_catalog.tsv"));
  return c;
}

std::string category_for(DegreeOfAction d) {
  for (const auto& c : shipped().categories())
    if (c.degree == d) return c.id;
  return {};
}

}  // namespace

TEST_SUITE("taxonomy") {
  TEST_CASE("speech and degree grid") {
    std::size_t valid = 0;
    for (auto s : kAllSpeechTypes) {
      for (auto d : kAllDegrees) {
        TaxonomyAssignment a{"x", s, d, {}, {}};
        const auto cat = category_for(d);
        if (!cat.empty()) a.categories.insert(cat);
        const bool ok = validate_assignment(a, shipped()).empty();
        CHECK(ok == degree_allowed(s, d));
        valid += ok;
      }
    }
    CHECK(valid == 7);
  }

  TEST_CASE("examples") {
    CHECK_FALSE(validate_assignment({"x", SpeechType::Direct, DegreeOfAction::Discrimination, {}, {}}, shipped()).empty());
    CHECK(validate_assignment(
              {"x", SpeechType::Reporting, DegreeOfAction::PhysicalAttack, {"physical-attack-incidents"}, {}}, shipped())
              .empty());
    CHECK(validate_assignment(
              {"x", SpeechType::Direct, DegreeOfAction::Antilocution, {"addiction"}, {Aggravator::Xenophobia}}, shipped())
              .empty());
    CHECK(validate_assignment({"x", SpeechType::Reporting, DegreeOfAction::Extermination, {}, {}}, shipped()).empty());
  }

  TEST_CASE("every violation is reported") {
    const auto v = validate_assignment({"x", SpeechType::Direct, DegreeOfAction::Discrimination,
                                        {"no-such-category", "physical-attack-incidents"}, {}},
                                       shipped());
    CHECK(v.size() >= 3);
  }

  TEST_CASE("catalog loading") {
    CHECK(shipped().size() == 14);
    for (const auto& c : shipped().categories()) CHECK(c.degree != DegreeOfAction::Extermination);

    testutil::TempDir dir;
    testutil::write_file(dir.file("empty.tsv"), "");
    std::vector<std::string> warnings;
    CHECK(Catalog::load(dir.file("empty.tsv"), &warnings).size() == 0);
    CHECK(warnings.size() == 1);

    testutil::write_file(dir.file("dup.tsv"), "id\tdegree\tdescription\na\tAntilocution\tx\na\tAntilocution\ty\n");
    CHECK_THROWS(Catalog::load(dir.file("dup.tsv")));
  }

  TEST_CASE("catalog round trip") {
    testutil::TempDir dir;
    shipped().save(dir.file("c.tsv"));
    const auto back = Catalog::load(dir.file("c.tsv"));
    CHECK(back.serialize() == shipped().serialize());
    CHECK(back.size() == shipped().size());
  }

  TEST_CASE("enum names round trip") {
    for (auto d : kAllDegrees) CHECK(degree_from_string(to_string(d)) == d);
    for (auto s : kAllSpeechTypes) CHECK(speech_type_from_string(to_string(s)) == s);
    CHECK(aggravator_from_string("Racism") == Aggravator::Racism);
    CHECK_FALSE(degree_from_string("nope"));
  }
}
