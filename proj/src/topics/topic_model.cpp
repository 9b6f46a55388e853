#include "aporo/topics/topic_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "aporo/common/error.hpp"
#include "aporo/common/text.hpp"
#include "aporo/topics/hdbscan.hpp"

namespace aporo::topics {

std::size_t default_min_cluster_size(std::size_t n_docs) {
  const auto scaled = static_cast<std::size_t>(std::llround(static_cast<double>(n_docs) / 1200.0));
  return std::max<std::size_t>(5, scaled);
}

ClusterResult cluster_documents(const EmbeddingMatrix& emb, const ClusterOptions& options) {
  ClusterResult result;
  const std::size_t n = emb.size();
  result.min_cluster_size = options.min_cluster_size ? options.min_cluster_size : default_min_cluster_size(n);
  if (result.min_cluster_size < 2) throw ContractViolation("min_cluster_size must be at least 2");
  if (n < result.min_cluster_size) {
    result.outlier_ids = emb.doc_ids();
    result.warnings.push_back(
        fmt::format("{} documents is fewer than min_cluster_size {}; all are outliers", n, result.min_cluster_size));
    return result;
  }

  PointSet points;
  points.n = n;
  points.dim = emb.dim();
  points.values.assign(emb.values().begin(), emb.values().end());
  if (options.reduction == Reduction::Pca) points = reduce_pca(points, options.n_components);

  const HdbscanResult h = hdbscan(points, {result.min_cluster_size, options.min_samples, false});
  result.single_cluster_fallback = h.single_cluster_fallback;
  if (h.single_cluster_fallback) result.warnings.push_back("no cluster survived selection; densest root members kept");

  std::vector<std::vector<std::string>> members(h.n_clusters);
  for (std::size_t i = 0; i < n; ++i) {
    if (h.labels[i] < 0) {
      result.outlier_ids.push_back(emb.doc_ids()[i]);
    } else {
      members[static_cast<std::size_t>(h.labels[i])].push_back(emb.doc_ids()[i]);
    }
  }
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return members[a].size() > members[b].size(); });
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    Topic t;
    t.topic_id = static_cast<int>(rank);
    t.member_ids = std::move(members[order[rank]]);
    result.topics.push_back(std::move(t));
  }
  return result;
}

std::vector<std::string> representative_docs(const Topic& topic, const EmbeddingMatrix& emb, std::size_t m) {
  if (topic.member_ids.empty()) throw ContractViolation(fmt::format("topic {} has no members", topic.topic_id));
  std::vector<std::string> ids = topic.member_ids;
  std::sort(ids.begin(), ids.end());
  std::vector<double> centroid(emb.dim(), 0.0);
  for (const auto& id : ids) {
    const auto row = emb.row(emb.index_of(id));
    for (std::size_t d = 0; d < emb.dim(); ++d) centroid[d] += row[d];
  }
  double norm = 0.0;
  for (double& c : centroid) {
    c /= static_cast<double>(ids.size());
    norm += c * c;
  }
  norm = std::sqrt(norm);
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& id : ids) {
    const auto row = emb.row(emb.index_of(id));
    double dot = 0.0, rn = 0.0;
    for (std::size_t d = 0; d < emb.dim(); ++d) {
      dot += centroid[d] * row[d];
      rn += static_cast<double>(row[d]) * row[d];
    }
    const double cos = (norm == 0.0 || rn == 0.0) ? 0.0 : dot / (norm * std::sqrt(rn));
    scored.emplace_back(cos, id);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(m, scored.size()); ++i) out.push_back(scored[i].second);
  return out;
}

const Topic* TopicModel::find(int topic_id) const {
  for (const auto& t : topics) {
    if (t.topic_id == topic_id) return &t;
  }
  return nullptr;
}

std::map<std::string, int> TopicModel::assignments() const {
  std::map<std::string, int> out;
  for (const auto& t : topics) {
    for (const auto& id : t.member_ids) out[id] = t.topic_id;
  }
  for (const auto& id : outlier_ids) out[id] = -1;
  return out;
}

nlohmann::json to_json(const TopicModel& model) {
  nlohmann::json topics = nlohmann::json::array();
  for (const auto& t : model.topics) {
    nlohmann::json words = nlohmann::json::array();
    for (const auto& w : t.topic_words) words.push_back({w.term, w.weight});
    topics.push_back({{"topic_id", t.topic_id},
                      {"size", t.member_ids.size()},
                      {"topic_words", words},
                      {"representative_ids", t.representative_ids},
                      {"member_ids", t.member_ids}});
  }
  return {{"encoder_id", model.encoder_id},
          {"min_cluster_size", model.min_cluster_size},
          {"parameters", model.parameters},
          {"topics", topics},
          {"outlier_ids", model.outlier_ids}};
}

TopicModel topic_model_from_json(const nlohmann::json& j) {
  try {
    TopicModel m;
    m.encoder_id = j.at("encoder_id").get<std::string>();
    m.min_cluster_size = j.at("min_cluster_size").get<std::size_t>();
    m.parameters = j.value("parameters", nlohmann::json::object());
    for (const auto& tj : j.at("topics")) {
      Topic t;
      t.topic_id = tj.at("topic_id").get<int>();
      for (const auto& w : tj.at("topic_words")) t.topic_words.push_back({w.at(0).get<std::string>(), w.at(1).get<double>()});
      t.representative_ids = tj.at("representative_ids").get<std::vector<std::string>>();
      t.member_ids = tj.at("member_ids").get<std::vector<std::string>>();
      m.topics.push_back(std::move(t));
    }
    m.outlier_ids = j.at("outlier_ids").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("topic model: ") + e.what());
  }
}

void save_topic_model(const std::string& path, const TopicModel& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_json(model).dump(1) << '\n';
}

TopicModel load_topic_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open topic model " + path);
  try {
    return topic_model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("topic model: ") + e.what());
  }
}

TopicModel build_topic_model(const EmbeddingMatrix& emb, const std::vector<std::string>& texts,
                             const TopicModelOptions& options, std::vector<std::string>* warnings) {
  if (texts.size() != emb.size()) throw ContractViolation("texts and embeddings differ in length");
  ClusterResult clusters = cluster_documents(emb, options.cluster);

  TopicModel model;
  model.encoder_id = emb.encoder_id();
  model.min_cluster_size = clusters.min_cluster_size;
  model.outlier_ids = std::move(clusters.outlier_ids);
  model.topics = std::move(clusters.topics);
  model.parameters = {{"min_cluster_size", clusters.min_cluster_size},
                      {"min_samples", options.cluster.min_samples ? options.cluster.min_samples
                                                                  : clusters.min_cluster_size},
                      {"reduction", options.cluster.reduction == Reduction::Pca ? "pca" : "none"},
                      {"n_components", options.cluster.n_components},
                      {"cluster_selection", "eom"},
                      {"metric", "euclidean"},
                      {"k", options.ctfidf.k},
                      {"min_df", options.ctfidf.min_df},
                      {"stopwords", options.ctfidf.stopwords.size()},
                      {"single_cluster_fallback", clusters.single_cluster_fallback}};
  if (warnings) warnings->insert(warnings->end(), clusters.warnings.begin(), clusters.warnings.end());

  const auto assign = model.assignments();
  std::vector<int> labels(emb.size());
  std::vector<std::vector<std::string>> docs(emb.size());
  for (std::size_t i = 0; i < emb.size(); ++i) {
    labels[i] = assign.at(emb.doc_ids()[i]);
    docs[i] = tokenize_for_ctfidf(texts[i], options.placeholder);
  }
  std::vector<int> classes;
  for (const auto& t : model.topics) classes.push_back(t.topic_id);
  if (!model.outlier_ids.empty()) classes.push_back(-1);
  if (!classes.empty()) {
    const CtfidfResult words = ctfidf_topic_words(labels, docs, options.ctfidf, classes);
    if (warnings) warnings->insert(warnings->end(), words.warnings.begin(), words.warnings.end());
    for (auto& t : model.topics) t.topic_words = words.words.at(t.topic_id);
  }
  for (auto& t : model.topics) t.representative_ids = representative_docs(t, emb, options.n_representatives);
  return model;
}

nlohmann::json TopicSelection::to_json() const {
  nlohmann::json r = nlohmann::json::object();
  for (const auto& [id, text] : rationale) r[std::to_string(id)] = text;
  return {{"selected_topic_ids", selected_topic_ids}, {"rationale", r}};
}

TopicSelection select_topics(const TopicModel& model, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open selection file " + path);
  TopicSelection sel;
  std::set<int> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string_view body = text::trim(line);
    if (body.empty()) continue;
    if (body == "*") {
      for (const auto& t : model.topics) {
        if (seen.insert(t.topic_id).second) {
          sel.selected_topic_ids.push_back(t.topic_id);
          sel.rationale[t.topic_id] = "";
        }
      }
      continue;
    }
    const auto space = body.find_first_of(" \t");
    const std::string id_text(body.substr(0, space));
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(id_text, &used);
      if (used != id_text.size()) throw std::invalid_argument(id_text);
    } catch (const std::exception&) {
      throw ParseError("bad topic id '" + id_text + "'", line_no);
    }
    if (!model.find(id)) throw ParseError(fmt::format("unknown topic id {}", id), line_no);
    if (!seen.insert(id).second) throw ParseError(fmt::format("topic {} selected twice", id), line_no);
    sel.selected_topic_ids.push_back(id);
    sel.rationale[id] = space == std::string_view::npos ? "" : std::string(text::trim(body.substr(space)));
  }
  if (sel.selected_topic_ids.empty()) sel.warnings.push_back("selection file " + path + " selects no topics");
  return sel;
}

}  // namespace aporo::topics
