#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace aporo::topics {

struct TermWeight {
  std::string term;
  double weight = 0.0;

  friend bool operator==(const TermWeight&, const TermWeight&) = default;
};

/// Lowercase, split on non-alphanumerics, drop 1-character tokens. Every
/// occurrence of `placeholder` is removed first.
std::vector<std::string> tokenize_for_ctfidf(std::string_view text, std::string_view placeholder = {});

struct CtfidfOptions {
  std::size_t k = 10;
  /// Minimum document frequency as a fraction of all documents.
  double min_df = 0.05;
  std::unordered_set<std::string> stopwords;
};

/// Full weight table: class id -> term -> W(t, c), zero-weight terms omitted.
struct CtfidfTable {
  std::vector<std::string> vocabulary;
  std::map<int, std::map<std::string, double>> weights;
  /// Average term count per class (A).
  double average_class_size = 0.0;
};

/// W(t, c) = tf(t, c) * log(1 + A / f(t)). `class_ids` lists every class,
/// including empty ones; when empty the distinct labels are used.
CtfidfTable ctfidf_weights(std::span<const int> labels, std::span<const std::vector<std::string>> docs,
                           const CtfidfOptions& options, std::span<const int> class_ids = {});

struct CtfidfResult {
  std::map<int, std::vector<TermWeight>> words;
  std::vector<std::string> warnings;
};

/// Top-k positive-weight terms per class, by weight then term.
CtfidfResult ctfidf_topic_words(std::span<const int> labels, std::span<const std::vector<std::string>> docs,
                                const CtfidfOptions& options, std::span<const int> class_ids = {});

}  // namespace aporo::topics
