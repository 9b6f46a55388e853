#include <doctest.h>

#include <sstream>

#include "aporo/common/csv.hpp"
#include "aporo/common/hash.hpp"
#include "aporo/common/label.hpp"
#include "aporo/common/region.hpp"
#include "aporo/common/text.hpp"
#include "aporo/common/time.hpp"
#include "test_util.hpp"

using namespace aporo;

TEST_SUITE("common") {
  TEST_CASE("timestamps round-trip in UTC") {
    const auto t = parse_timestamp("2022-10-24T00:00:00Z");
    REQUIRE(t);
    CHECK(format_timestamp(*t) == "2022-10-24T00:00:00Z");
    CHECK(parse_timestamp("2022-10-24 13:05:09") == parse_timestamp("2022-10-24T13:05:09Z"));
    CHECK_FALSE(parse_timestamp("yesterday"));
    CHECK_FALSE(parse_timestamp("2022-13-01T00:00:00Z"));
  }

  TEST_CASE("csv fields with commas, quotes and newlines survive a round trip") {
    std::ostringstream out;
    const csv::Row row = {"plain", "with, comma", "with \"quote\"", "multi\nline", ""};
    csv::write_row(out, row);
    std::istringstream in(out.str());
    csv::Reader reader(in);
    csv::Row back;
    REQUIRE(reader.next(back));
    CHECK(back == row);
    CHECK_FALSE(reader.next(back));
  }

  TEST_CASE("csv reader reports the starting line of each record") {
    std::istringstream in("a,b\n\"x\ny\",1\nz,2\n");
    csv::Reader reader(in);
    csv::Row row;
    REQUIRE(reader.next(row));
    CHECK(reader.line() == 1);
    REQUIRE(reader.next(row));
    CHECK(reader.line() == 2);
    REQUIRE(reader.next(row));
    CHECK(reader.line() == 4);
    CHECK(row[0] == "z");
  }

  TEST_CASE("hashes are stable across runs") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(keyed_hash(1, "x") != keyed_hash(2, "x"));
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("labels and regions parse case-insensitively") {
    CHECK(label_from_string(" direct ") == Label::Direct);
    CHECK(label_from_string("REPORTING") == Label::Reporting);
    CHECK_FALSE(label_from_string("toxic"));
    CHECK(binary_label_from_string("Non-toxic") == BinaryLabel::NonToxic);
    CHECK(region_from_string("North America") == Region::NorthAmerica);
    CHECK(region_from_string("south_asia") == Region::SouthAsia);
    CHECK_FALSE(region_from_string("Mars"));
    for (Region r : kAllRegions) CHECK(region_from_string(to_string(r)) == r);
  }

  TEST_CASE("text helpers") {
    CHECK(text::normalize_for_dedup("  Hello   WORLD ") == "hello world");
    CHECK(text::strip_mentions_and_urls("@bob see https://x.co/a now") == "see now");
    const auto toks = text::word_tokens("It's a good-day, ok?", 2);
    CHECK(std::find(toks.begin(), toks.end(), "good") != toks.end());
    CHECK(std::find(toks.begin(), toks.end(), "a") == toks.end());
  }
}
