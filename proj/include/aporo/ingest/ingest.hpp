#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "aporo/ingest/post_record.hpp"

namespace aporo::ingest {

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

enum class RecordFormat { Jsonl, Csv };

RecordFormat format_from_string(std::string_view name);

struct LoadWarning {
  std::size_t line = 0;
  std::string message;
};

struct LoadResult {
  std::vector<PostRecord> records;
  std::vector<LoadWarning> warnings;
};

struct LoadOptions {
  /// Throw on the first malformed row instead of skipping it.
  bool fail_fast = false;
};

/// Reads records in file order. Derived fields are left unset.
LoadResult load_records(const std::string& path, RecordFormat format, const LoadOptions& options = {});

void write_records_jsonl(const std::string& path, const std::vector<PostRecord>& records);

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

enum class BotRule { Substring, Token };

struct FilterOptions {
  std::size_t max_hashtags = 5;
  BotRule bot_rule = BotRule::Substring;
};

/// Counts per rejection rule, in application order.
struct RejectionLog {
  std::size_t retweet = 0;
  std::size_t duplicate = 0;
  std::size_t url = 0;
  std::size_t hashtags = 0;
  std::size_t bot = 0;

  std::size_t total() const { return retweet + duplicate + url + hashtags + bot; }
  nlohmann::json to_json() const;
};

struct FilterResult {
  std::vector<PostRecord> kept;
  RejectionLog rejections;
};

/// Removes retweets, case/whitespace-insensitive duplicates (first kept),
/// posts with an http(s) URL, posts with more than `max_hashtags` hashtags and
/// posts from accounts whose name contains "bot". Fills hashtag_count.
FilterResult filter_records(std::vector<PostRecord> records, const FilterOptions& options = {});

bool contains_url(std::string_view text);
bool looks_like_bot(std::string_view name, BotRule rule);

// ---------------------------------------------------------------------------
// Query terms
// ---------------------------------------------------------------------------

struct QueryTerm {
  std::string id;
  std::string surface;
  bool noun_only = false;
};

/// Hook deciding whether a noun-only match at `span` is used as a noun.
using NounJudge = std::function<bool(std::string_view text, const Span& span)>;

class QueryTermSet {
 public:
  QueryTermSet() = default;
  explicit QueryTermSet(std::vector<QueryTerm> terms);

  /// The twelve collection terms.
  static QueryTermSet defaults();

  const std::vector<QueryTerm>& terms() const { return terms_; }

  /// Words allowed right after a noun-only term (auxiliaries, prepositions,
  /// conjunctions, pronouns). Lower-case.
  const std::unordered_set<std::string>& closed_class() const { return closed_class_; }
  void set_closed_class(std::unordered_set<std::string> words) { closed_class_ = std::move(words); }

  /// Replaces the follower-word rule for noun-only terms when set.
  void set_noun_judge(NounJudge judge) { noun_judge_ = std::move(judge); }
  const NounJudge& noun_judge() const { return noun_judge_; }

 private:
  std::vector<QueryTerm> terms_;
  std::unordered_set<std::string> closed_class_;
  NounJudge noun_judge_;
};

const std::unordered_set<std::string>& default_closed_class_words();

/// Case-insensitive, token-bounded, leftmost-longest non-overlapping matches.
std::vector<TermMatch> match_query_terms(std::string_view text, const QueryTermSet& terms);

// ---------------------------------------------------------------------------
// Masking
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDefaultPlaceholder = "[GROUP]";

/// Returns a copy with masked_text set (each span replaced by `placeholder`)
/// and matched_terms/matched_spans filled. Throws ContractViolation if spans
/// overlap or fall outside the text.
PostRecord mask_terms(PostRecord record, const std::vector<TermMatch>& matches,
                      std::string_view placeholder = kDefaultPlaceholder);

/// match + mask over a whole corpus.
void annotate_terms(std::vector<PostRecord>& records, const QueryTermSet& terms,
                    std::string_view placeholder = kDefaultPlaceholder);

}  // namespace aporo::ingest
