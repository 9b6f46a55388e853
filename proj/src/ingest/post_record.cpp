#include "aporo/ingest/post_record.hpp"

#include "aporo/common/error.hpp"
#include "aporo/common/text.hpp"

namespace aporo::ingest {

std::size_t count_hashtags(std::string_view text) {
  std::size_t n = 0;
  for (auto tok : text::split_whitespace(text)) {
    if (tok.size() > 1 && tok.front() == '#') ++n;
  }
  return n;
}

nlohmann::json to_json(const PostRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["text"] = r.text;
  j["created_at"] = format_timestamp(r.created_at);
  j["place_country"] = r.place_country ? nlohmann::json(*r.place_country) : nlohmann::json(nullptr);
  j["user_location_raw"] = r.user_location_raw ? nlohmann::json(*r.user_location_raw) : nlohmann::json(nullptr);
  j["user_name"] = r.user_name;
  j["screen_name"] = r.screen_name;
  j["is_retweet"] = r.is_retweet;
  j["hashtag_count"] = r.hashtag_count;
  j["matched_terms"] = r.matched_terms;
  auto spans = nlohmann::json::array();
  for (const auto& s : r.matched_spans) spans.push_back({s.begin, s.end});
  j["matched_spans"] = std::move(spans);
  j["masked_text"] = r.masked_text;
  if (r.region) j["region"] = std::string(to_string(*r.region));
  if (r.country) j["country"] = *r.country;
  return j;
}

namespace {

std::optional<std::string> optional_string(const nlohmann::json& j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = j.find(k);
    if (it != j.end() && it->is_string() && !it->get<std::string>().empty()) return it->get<std::string>();
  }
  return std::nullopt;
}

}  // namespace

PostRecord from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("record is not a JSON object");
  PostRecord r;
  auto id_it = j.find("id");
  if (id_it == j.end() || id_it->is_null()) throw ParseError("missing required field 'id'");
  r.id = id_it->is_string() ? id_it->get<std::string>() : id_it->dump();
  if (r.id.empty()) throw ParseError("empty 'id'");

  auto text_it = j.find("text");
  if (text_it == j.end() || !text_it->is_string()) throw ParseError("missing required field 'text'");
  r.text = text_it->get<std::string>();

  auto ts_it = j.find("created_at");
  if (ts_it == j.end() || !ts_it->is_string()) throw ParseError("missing required field 'created_at'");
  auto ts = parse_timestamp(ts_it->get<std::string>());
  if (!ts) throw ParseError("unparseable created_at '" + ts_it->get<std::string>() + "'");
  r.created_at = *ts;

  r.place_country = optional_string(j, {"place_country", "place"});
  r.user_location_raw = optional_string(j, {"user_location_raw", "user_location"});
  r.user_name = j.value("user_name", std::string{});
  r.screen_name = j.value("screen_name", std::string{});
  if (auto it = j.find("is_retweet"); it != j.end()) {
    if (it->is_boolean()) {
      r.is_retweet = it->get<bool>();
    } else if (it->is_string()) {
      const auto v = text::to_lower(it->get<std::string>());
      r.is_retweet = v == "true" || v == "1" || v == "yes";
    } else if (it->is_number_integer()) {
      r.is_retweet = it->get<int>() != 0;
    }
  }
  r.hashtag_count = j.value("hashtag_count", count_hashtags(r.text));
  if (auto it = j.find("matched_terms"); it != j.end() && it->is_array()) {
    r.matched_terms = it->get<std::vector<std::string>>();
  }
  if (auto it = j.find("matched_spans"); it != j.end() && it->is_array()) {
    for (const auto& s : *it) r.matched_spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
  }
  r.masked_text = j.value("masked_text", std::string{});
  if (auto s = optional_string(j, {"region"})) {
    r.region = region_from_string(*s);
    if (!r.region) throw ParseError("unknown region '" + *s + "'");
  }
  r.country = optional_string(j, {"country"});
  return r;
}

}  // namespace aporo::ingest
