#include <doctest.h>

#include <random>

#include "aporo/common/error.hpp"
#include "aporo/ingest/ingest.hpp"
#include "test_util.hpp"

using namespace aporo;
using namespace aporo::ingest;

namespace {

PostRecord post(std::string id, std::string text, std::string user = "user", std::string screen = "user") {
  PostRecord r;
  r.id = std::move(id);
  r.text = std::move(text);
  r.user_name = std::move(user);
  r.screen_name = std::move(screen);
  return r;
}

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("jsonl load keeps file order and parses timestamps") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("p.jsonl"),
                         R"({"id":"1","text":"a","created_at":"2022-09-01T12:00:00Z"}
{"id":"2","text":"b","created_at":"2022-09-02T12:00:00Z"}
{"id":"3","text":"c","created_at":"2022-09-03T12:00:00Z"}
)");
    const auto r = load_records(dir.file("p.jsonl"), RecordFormat::Jsonl);
    REQUIRE(r.records.size() == 3);
    CHECK(r.records[0].id == "1");
    CHECK(r.records[2].id == "3");
    CHECK(r.records[0].created_at == *parse_timestamp("2022-09-01T12:00:00Z"));
    CHECK(r.records[0].masked_text.empty());
  }

  TEST_CASE("missing required field is skipped with a warning or fails fast") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("p.jsonl"),
                         R"({"id":"1","text":"a","created_at":"2022-09-01T12:00:00Z"}
{"id":"2","created_at":"2022-09-02T12:00:00Z"}
{"id":"3","text":"c","created_at":"2022-09-03T12:00:00Z"}
)");
    const auto r = load_records(dir.file("p.jsonl"), RecordFormat::Jsonl);
    CHECK(r.records.size() == 2);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].line == 2);

    LoadOptions strict;
    strict.fail_fast = true;
    try {
      load_records(dir.file("p.jsonl"), RecordFormat::Jsonl, strict);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }

  TEST_CASE("malformed json line reports its line number") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("p.jsonl"), "{\"id\":\"1\",\"text\":\"a\",\"created_at\":\"2022-09-01T00:00:00Z\"}\n{oops\n");
    const auto r = load_records(dir.file("p.jsonl"), RecordFormat::Jsonl);
    CHECK(r.records.size() == 1);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].line == 2);
  }

  TEST_CASE("csv records load") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("p.csv"),
                         "id,text,created_at,user_location\n1,\"hello, world\",2022-09-01T00:00:00Z,\"Lagos, Nigeria\"\n");
    const auto r = load_records(dir.file("p.csv"), RecordFormat::Csv);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].text == "hello, world");
    CHECK(r.records[0].user_location_raw == "Lagos, Nigeria");
  }

  TEST_CASE("hashtag count") {
    CHECK(count_hashtags("#a #b c #") == 2);
    CHECK(count_hashtags("no tags") == 0);
  }

  TEST_CASE("filter rules in order") {
    std::vector<PostRecord> in;
    in.push_back(post("rt", "RT @x: hi"));
    in.back().is_retweet = true;
    in.push_back(post("a", "Help the poor"));
    in.push_back(post("dup", "  help   THE poor "));
    in.push_back(post("url", "see https://example.com"));
    in.push_back(post("tags", "#a #b #c #d #e #f"));
    in.push_back(post("five", "#a #b #c #d #e ok"));
    in.push_back(post("bot", "hello", "Plain", "NewsBot_Daily"));
    const auto out = filter_records(in);
    REQUIRE(out.kept.size() == 2);
    CHECK(out.kept[0].id == "a");
    CHECK(out.kept[1].id == "five");
    CHECK(out.kept[1].hashtag_count == 5);
    CHECK(out.rejections.retweet == 1);
    CHECK(out.rejections.duplicate == 1);
    CHECK(out.rejections.url == 1);
    CHECK(out.rejections.hashtags == 1);
    CHECK(out.rejections.bot == 1);
    CHECK(out.kept.size() + out.rejections.total() == in.size());
  }

  TEST_CASE("bot rule modes") {
    CHECK(looks_like_bot("NewsBot_Daily", BotRule::Substring));
    CHECK(looks_like_bot("abbott", BotRule::Substring));
    CHECK_FALSE(looks_like_bot("abbott", BotRule::Token));
    CHECK(looks_like_bot("news bot", BotRule::Token));
    CHECK(filter_records({}).kept.empty());
  }

  TEST_CASE("filtering is idempotent and conserves counts on random input") {
    std::mt19937_64 rng(5);
    const std::vector<std::string> pieces = {"the poor", "hi", "#tag", "https://t.co/x", "HI", "  ", "bot"};
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<PostRecord> in;
      for (int i = 0; i < 40; ++i) {
        std::string text;
        for (int k = 0; k < 4; ++k) text += pieces[rng() % pieces.size()] + " ";
        auto p = post(std::to_string(i), text, rng() % 10 == 0 ? "bot" : "u", "s");
        p.is_retweet = rng() % 8 == 0;
        in.push_back(p);
      }
      const auto once = filter_records(in);
      CHECK(once.kept.size() + once.rejections.total() == in.size());
      const auto twice = filter_records(once.kept);
      REQUIRE(twice.kept.size() == once.kept.size());
      for (std::size_t i = 0; i < once.kept.size(); ++i) CHECK(twice.kept[i].id == once.kept[i].id);
    }
  }

  TEST_CASE("default query terms") {
    const auto terms = QueryTermSet::defaults();
    CHECK(terms.terms().size() == 12);
    std::size_t noun_only = 0;
    for (const auto& t : terms.terms()) noun_only += t.noun_only;
    CHECK(noun_only == 1);
  }

  TEST_CASE("query term matching") {
    const auto terms = QueryTermSet::defaults();
    auto m = match_query_terms("help the poor.", terms);
    REQUIRE(m.size() == 1);
    CHECK(m[0].term_id == "the_poor");
    CHECK(m[0].span.begin == 5);
    CHECK(m[0].span.end == 13);

    CHECK(match_query_terms("the poor performance of the team", terms).empty());
    CHECK(match_query_terms("the poor are ignored", terms).size() == 1);

    m = match_query_terms("Poor people deserve dignity", terms);
    REQUIRE(m.size() == 1);
    CHECK(m[0].term_id == "poor_people");

    CHECK(match_query_terms("homelessness rises", terms).empty());
    CHECK(match_query_terms("LOW-INCOME and homeless", terms).size() == 2);
  }

  TEST_CASE("noun judge hook replaces the follower rule") {
    auto terms = QueryTermSet::defaults();
    terms.set_noun_judge([](std::string_view, const Span&) { return true; });
    CHECK(match_query_terms("the poor performance", terms).size() == 1);
  }

  TEST_CASE("masking") {
    auto r = post("1", "the homeless need help");
    const auto masked = mask_terms(r, {{"homeless", {4, 12}}});
    CHECK(masked.masked_text == "the [GROUP] need help");
    CHECK(masked.text == r.text);
    CHECK(masked.matched_terms == std::vector<std::string>{"homeless"});

    CHECK(mask_terms(r, {}).masked_text == r.text);
    CHECK_THROWS_AS(mask_terms(r, {{"a", {0, 8}}, {"b", {4, 12}}}), ContractViolation);
    CHECK_THROWS_AS(mask_terms(r, {{"a", {20, 40}}}), ContractViolation);
  }

  TEST_CASE("placeholder count equals match count and outside bytes are preserved") {
    std::mt19937_64 rng(11);
    const std::vector<std::string> words = {"the poor", "poor people", "homeless", "help", "city", "on welfare",
                                            "lower class", "underprivileged", "rain", "the poor performance"};
    const auto terms = QueryTermSet::defaults();
    for (int trial = 0; trial < 200; ++trial) {
      std::string text;
      for (int k = 0; k < 6; ++k) text += words[rng() % words.size()] + (rng() % 3 ? " " : ", ");
      std::vector<PostRecord> recs{post("x", text)};
      annotate_terms(recs, terms);
      const auto& r = recs[0];
      CHECK(count_of(r.masked_text, "[GROUP]") == r.matched_spans.size());
      // Rebuild the masked text from the spans.
      std::string rebuilt;
      std::size_t pos = 0;
      for (const auto& s : r.matched_spans) {
        rebuilt += text.substr(pos, s.begin - pos) + "[GROUP]";
        pos = s.end;
      }
      rebuilt += text.substr(pos);
      CHECK(rebuilt == r.masked_text);
    }
  }
}
