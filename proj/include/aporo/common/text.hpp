#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace aporo::text {

/// ASCII case-fold; non-ASCII UTF-8 bytes pass through untouched.
std::string to_lower(std::string_view s);

inline bool is_alnum(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

/// Case-fold and collapse whitespace runs into one space; trims the ends.
std::string normalize_for_dedup(std::string_view s);

std::string_view trim(std::string_view s);

/// Whitespace-separated tokens.
std::vector<std::string_view> split_whitespace(std::string_view s);

/// Lowercased runs of alphanumerics; tokens shorter than `min_len` are dropped.
std::vector<std::string> word_tokens(std::string_view s, std::size_t min_len = 2);

/// Removes @mentions and http(s) URLs, collapsing the leftover whitespace.
std::string strip_mentions_and_urls(std::string_view s);

/// Built-in English stopword list (scikit-learn's list).
const std::vector<std::string>& english_stopwords();

}  // namespace aporo::text
