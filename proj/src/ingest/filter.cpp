#include "aporo/common/text.hpp"
#include "aporo/ingest/ingest.hpp"

namespace aporo::ingest {

nlohmann::json RejectionLog::to_json() const {
  return {{"retweet", retweet}, {"duplicate", duplicate}, {"url", url}, {"hashtags", hashtags},
          {"bot", bot},         {"total", total()}};
}

bool contains_url(std::string_view t) {
  const auto lower = text::to_lower(t);
  return lower.find("http://") != std::string::npos || lower.find("https://") != std::string::npos;
}

bool looks_like_bot(std::string_view name, BotRule rule) {
  const auto lower = text::to_lower(name);
  if (rule == BotRule::Substring) return lower.find("bot") != std::string::npos;
  for (const auto& tok : text::word_tokens(lower, 1)) {
    if (tok == "bot") return true;
  }
  return false;
}

FilterResult filter_records(std::vector<PostRecord> records, const FilterOptions& options) {
  FilterResult result;
  std::unordered_set<std::string> seen;
  for (auto& r : records) {
    r.hashtag_count = count_hashtags(r.text);
    if (r.is_retweet) {
      ++result.rejections.retweet;
      continue;
    }
    if (!seen.insert(text::normalize_for_dedup(r.text)).second) {
      ++result.rejections.duplicate;
      continue;
    }
    if (contains_url(r.text)) {
      ++result.rejections.url;
      continue;
    }
    if (r.hashtag_count > options.max_hashtags) {
      ++result.rejections.hashtags;
      continue;
    }
    if (looks_like_bot(r.user_name, options.bot_rule) || looks_like_bot(r.screen_name, options.bot_rule)) {
      ++result.rejections.bot;
      continue;
    }
    result.kept.push_back(std::move(r));
  }
  return result;
}

}  // namespace aporo::ingest
