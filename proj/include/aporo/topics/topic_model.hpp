#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/topics/ctfidf.hpp"
#include "aporo/topics/embedding.hpp"

namespace aporo::topics {

struct Topic {
  int topic_id = 0;
  std::vector<std::string> member_ids;
  std::vector<TermWeight> topic_words;
  std::vector<std::string> representative_ids;
};

enum class Reduction { None, Pca };

struct ClusterOptions {
  /// 0 selects default_min_cluster_size(n).
  std::size_t min_cluster_size = 0;
  std::size_t min_samples = 0;
  Reduction reduction = Reduction::Pca;
  std::size_t n_components = 5;
};

/// max(5, round(n / 1200)).
std::size_t default_min_cluster_size(std::size_t n_docs);

struct ClusterResult {
  /// Numbered 0.. by size (largest first), members in embedding order.
  std::vector<Topic> topics;
  std::vector<std::string> outlier_ids;
  std::size_t min_cluster_size = 0;
  bool single_cluster_fallback = false;
  std::vector<std::string> warnings;
};

ClusterResult cluster_documents(const EmbeddingMatrix& emb, const ClusterOptions& options = {});

/// The m members closest (cosine) to the topic centroid; ties by id.
std::vector<std::string> representative_docs(const Topic& topic, const EmbeddingMatrix& emb, std::size_t m = 3);

struct TopicModelOptions {
  ClusterOptions cluster;
  CtfidfOptions ctfidf;
  std::string placeholder = "[GROUP]";
  std::size_t n_representatives = 3;
};

struct TopicModel {
  std::string encoder_id;
  std::size_t min_cluster_size = 0;
  std::vector<Topic> topics;
  std::vector<std::string> outlier_ids;
  /// Parameters actually used, for the run manifest.
  nlohmann::json parameters;

  const Topic* find(int topic_id) const;
  /// doc id -> topic id (-1 for outliers).
  std::map<std::string, int> assignments() const;
};

nlohmann::json to_json(const TopicModel& model);
TopicModel topic_model_from_json(const nlohmann::json& j);
void save_topic_model(const std::string& path, const TopicModel& model);
TopicModel load_topic_model(const std::string& path);

/// Clusters, then fills topic words and representatives. `texts` is aligned
/// with emb.doc_ids().
TopicModel build_topic_model(const EmbeddingMatrix& emb, const std::vector<std::string>& texts,
                             const TopicModelOptions& options, std::vector<std::string>* warnings = nullptr);

struct TopicSelection {
  std::vector<int> selected_topic_ids;
  std::map<int, std::string> rationale;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Reads "<topic id> [rationale]" lines; '#' starts a comment and a line
/// holding only "*" selects every topic. Unknown ids are an error.
TopicSelection select_topics(const TopicModel& model, const std::string& path);

/// Topic ids in the published topic table.
inline const std::vector<int> kReferenceTopicIds = {5, 6, 10, 14, 38, 49, 56, 67, 88, 91, 96, 100, 106, 118, 139};

}  // namespace aporo::topics
