#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/common/region.hpp"
#include "aporo/common/time.hpp"

namespace aporo::ingest {

/// Byte range [begin, end) into a post's text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct TermMatch {
  std::string term_id;
  Span span;

  friend bool operator==(const TermMatch&, const TermMatch&) = default;
};

/// One raw or filtered social-media post.
struct PostRecord {
  std::string id;
  std::string text;
  Timestamp created_at{};
  std::optional<std::string> place_country;
  std::optional<std::string> user_location_raw;
  std::string user_name;
  std::string screen_name;
  bool is_retweet = false;

  // Derived fields.
  std::size_t hashtag_count = 0;
  std::vector<std::string> matched_terms;
  std::vector<Span> matched_spans;
  std::string masked_text;

  // Set by geolocation.
  std::optional<Region> region;
  std::optional<std::string> country;
};

/// Number of whitespace tokens starting with '#' followed by at least one character.
std::size_t count_hashtags(std::string_view text);

nlohmann::json to_json(const PostRecord& record);

/// Reads the record schema; throws ParseError naming the first missing or
/// malformed required field (id, text, created_at).
PostRecord from_json(const nlohmann::json& j);

}  // namespace aporo::ingest
