#include <algorithm>

#include "aporo/common/error.hpp"
#include "aporo/common/text.hpp"
#include "aporo/ingest/ingest.hpp"

namespace aporo::ingest {

QueryTermSet::QueryTermSet(std::vector<QueryTerm> terms)
    : terms_(std::move(terms)), closed_class_(default_closed_class_words()) {}

QueryTermSet QueryTermSet::defaults() {
  return QueryTermSet({
      {"the_poor", "the poor", true},
      {"poor_people", "poor people", false},
      {"poor_ppl", "poor ppl", false},
      {"poor_folks", "poor folks", false},
      {"poor_families", "poor families", false},
      {"homeless", "homeless", false},
      {"on_welfare", "on welfare", false},
      {"welfare_recipients", "welfare recipients", false},
      {"low_income", "low-income", false},
      {"underprivileged", "underprivileged", false},
      {"disadvantaged", "disadvantaged", false},
      {"lower_class", "lower class", false},
  });
}

const std::unordered_set<std::string>& default_closed_class_words() {
  static const std::unordered_set<std::string> words{
      // auxiliaries and modals
      "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "do", "does", "did", "will",
      "would", "shall", "should", "can", "could", "may", "might", "must", "get", "gets", "got", "need", "needs",
      "aren", "isn", "don", "didn", "won", "can't", "don't", "won't", "aren't", "isn't", "didn't", "doesn't",
      // prepositions
      "in", "on", "at", "of", "for", "to", "from", "with", "without", "by", "about", "into", "onto", "over",
      "under", "than", "as", "like", "because", "through", "across", "against", "among", "around", "behind",
      "during", "off", "out", "up", "down", "near", "since", "until", "upon", "via", "within",
      // conjunctions and relativizers
      "and", "or", "but", "nor", "so", "yet", "while", "who", "whom", "whose", "that", "which", "when", "where",
      "if", "then", "though", "although",
      // pronouns
      "i", "me", "my", "you", "your", "he", "him", "his", "she", "her", "it", "its", "we", "us", "our", "they",
      "them", "their", "this", "these", "those", "themselves", "ourselves", "yourself", "everyone", "anyone",
      // adverbs that commonly follow the nominal use
      "too", "also", "only", "even", "always", "never", "often", "more", "less", "first", "again", "here",
      "there", "now", "already", "still", "just"};
  return words;
}

namespace {

struct CompiledTerm {
  const QueryTerm* term;
  std::vector<std::string> words;
};

/// Word following `pos` (lower-cased), or empty if the next thing is
/// punctuation or end of text. `is_word` tells which.
std::string next_token(std::string_view lower, std::size_t pos, bool& is_word) {
  while (pos < lower.size() && text::is_space(lower[pos])) ++pos;
  is_word = false;
  if (pos >= lower.size() || !text::is_alnum(lower[pos])) return {};
  is_word = true;
  std::size_t end = pos;
  while (end < lower.size() && (text::is_alnum(lower[end]) || lower[end] == '\'')) ++end;
  return std::string(lower.substr(pos, end - pos));
}

/// Returns the end offset of a match of `words` starting at `pos`, or npos.
std::size_t match_at(std::string_view lower, std::size_t pos, const std::vector<std::string>& words) {
  std::size_t cur = pos;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (w > 0) {
      const std::size_t ws = cur;
      while (cur < lower.size() && text::is_space(lower[cur])) ++cur;
      if (cur == ws) return std::string::npos;
    }
    if (lower.compare(cur, words[w].size(), words[w]) != 0) return std::string::npos;
    cur += words[w].size();
  }
  if (cur < lower.size() && text::is_alnum(lower[cur])) return std::string::npos;
  return cur;
}

}  // namespace

std::vector<TermMatch> match_query_terms(std::string_view text_in, const QueryTermSet& terms) {
  std::vector<CompiledTerm> compiled;
  for (const auto& t : terms.terms()) {
    CompiledTerm c{&t, {}};
    for (auto w : text::split_whitespace(text::to_lower(t.surface))) c.words.emplace_back(w);
    if (!c.words.empty()) compiled.push_back(std::move(c));
  }
  const std::string lower = text::to_lower(text_in);
  std::vector<TermMatch> matches;
  std::size_t i = 0;
  while (i < lower.size()) {
    const bool at_boundary = i == 0 || !text::is_alnum(lower[i - 1]);
    if (!at_boundary || !text::is_alnum(lower[i])) {
      ++i;
      continue;
    }
    const CompiledTerm* best = nullptr;
    std::size_t best_end = 0;
    for (const auto& c : compiled) {
      const std::size_t end = match_at(lower, i, c.words);
      if (end == std::string::npos || end <= best_end) continue;
      if (c.term->noun_only) {
        bool accepted = false;
        if (terms.noun_judge()) {
          accepted = terms.noun_judge()(text_in, Span{i, end});
        } else {
          bool is_word = false;
          const auto follower = next_token(lower, end, is_word);
          accepted = !is_word || terms.closed_class().contains(follower);
        }
        if (!accepted) continue;
      }
      best = &c;
      best_end = end;
    }
    if (best) {
      matches.push_back({best->term->id, Span{i, best_end}});
      i = best_end;
    } else {
      ++i;
    }
  }
  return matches;
}

PostRecord mask_terms(PostRecord record, const std::vector<TermMatch>& matches, std::string_view placeholder) {
  std::vector<TermMatch> sorted = matches;
  std::sort(sorted.begin(), sorted.end(),
            [](const TermMatch& a, const TermMatch& b) { return a.span.begin < b.span.begin; });
  std::size_t prev_end = 0;
  for (const auto& m : sorted) {
    if (m.span.begin >= m.span.end || m.span.end > record.text.size()) {
      throw ContractViolation("span out of range in record " + record.id);
    }
    if (m.span.begin < prev_end) throw ContractViolation("overlapping spans in record " + record.id);
    prev_end = m.span.end;
  }
  std::string masked;
  masked.reserve(record.text.size());
  std::size_t cur = 0;
  record.matched_terms.clear();
  record.matched_spans.clear();
  for (const auto& m : sorted) {
    masked.append(record.text, cur, m.span.begin - cur);
    masked.append(placeholder);
    cur = m.span.end;
    record.matched_terms.push_back(m.term_id);
    record.matched_spans.push_back(m.span);
  }
  masked.append(record.text, cur, std::string::npos);
  record.masked_text = std::move(masked);
  return record;
}

void annotate_terms(std::vector<PostRecord>& records, const QueryTermSet& terms, std::string_view placeholder) {
  for (auto& r : records) {
    auto matches = match_query_terms(r.text, terms);
    r = mask_terms(std::move(r), matches, placeholder);
  }
}

}  // namespace aporo::ingest
