#include "aporo/topics/ctfidf.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "aporo/common/error.hpp"
#include "aporo/common/text.hpp"

namespace aporo::topics {

std::vector<std::string> tokenize_for_ctfidf(std::string_view text, std::string_view placeholder) {
  std::string cleaned(text);
  if (!placeholder.empty()) {
    for (auto pos = cleaned.find(placeholder); pos != std::string::npos; pos = cleaned.find(placeholder, pos)) {
      cleaned.replace(pos, placeholder.size(), " ");
    }
  }
  return text::word_tokens(cleaned, 2);
}

CtfidfTable ctfidf_weights(std::span<const int> labels, std::span<const std::vector<std::string>> docs,
                           const CtfidfOptions& options, std::span<const int> class_ids) {
  if (labels.size() != docs.size()) throw ContractViolation("labels and docs differ in length");
  if (options.min_df < 0.0 || options.min_df >= 1.0) throw ContractViolation("min_df must be in [0, 1)");

  std::set<int> classes(class_ids.begin(), class_ids.end());
  if (classes.empty()) classes.insert(labels.begin(), labels.end());
  for (int l : labels) {
    if (!classes.contains(l)) throw ContractViolation(fmt::format("document label {} is not a listed class", l));
  }

  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    std::set<std::string_view> seen(doc.begin(), doc.end());
    for (auto t : seen) ++df[std::string(t)];
  }
  const double threshold = options.min_df * static_cast<double>(docs.size());
  CtfidfTable table;
  for (const auto& [term, count] : df) {
    if (options.stopwords.contains(term)) continue;
    if (static_cast<double>(count) + 1e-9 < threshold) continue;
    table.vocabulary.push_back(term);
  }
  std::sort(table.vocabulary.begin(), table.vocabulary.end());
  const std::set<std::string_view> vocab(table.vocabulary.begin(), table.vocabulary.end());

  std::map<int, std::map<std::string, double>> tf;
  for (int c : classes) tf[c];
  std::map<std::string, double> total;
  double all = 0.0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (const auto& t : docs[i]) {
      if (!vocab.contains(t)) continue;
      tf[labels[i]][t] += 1.0;
      total[t] += 1.0;
      all += 1.0;
    }
  }
  table.average_class_size = classes.empty() ? 0.0 : all / static_cast<double>(classes.size());
  for (const auto& [c, counts] : tf) {
    auto& w = table.weights[c];
    for (const auto& [t, f] : counts) {
      w[t] = f * std::log(1.0 + table.average_class_size / total[t]);
    }
  }
  return table;
}

CtfidfResult ctfidf_topic_words(std::span<const int> labels, std::span<const std::vector<std::string>> docs,
                                const CtfidfOptions& options, std::span<const int> class_ids) {
  const CtfidfTable table = ctfidf_weights(labels, docs, options, class_ids);
  CtfidfResult result;
  for (const auto& [c, weights] : table.weights) {
    std::vector<TermWeight> ranked;
    for (const auto& [t, w] : weights) {
      if (w > 0.0) ranked.push_back({t, w});
    }
    std::sort(ranked.begin(), ranked.end(), [](const TermWeight& a, const TermWeight& b) {
      return a.weight != b.weight ? a.weight > b.weight : a.term < b.term;
    });
    if (ranked.size() > options.k) ranked.resize(options.k);
    if (ranked.empty()) result.warnings.push_back(fmt::format("class {} has no terms", c));
    result.words[c] = std::move(ranked);
  }
  return result;
}

}  // namespace aporo::topics
