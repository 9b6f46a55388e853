#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "aporo/common/error.hpp"
#include "aporo/topics/ctfidf.hpp"
#include "aporo/topics/embedding.hpp"
#include "aporo/topics/hdbscan.hpp"
#include "aporo/topics/topic_model.hpp"
#include "test_util.hpp"

using namespace aporo;
using namespace aporo::topics;

namespace {

EmbeddingMatrix from_rows(const std::vector<std::vector<float>>& rows) {
  EmbeddingMatrix m("test", rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.add("d" + std::to_string(i), rows[i]);
  return m;
}

std::vector<std::vector<float>> two_blobs(std::uint64_t seed, std::size_t per_blob = 50) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.05f);
  std::vector<std::vector<float>> rows;
  for (int blob = 0; blob < 2; ++blob) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      std::vector<float> v(8);
      for (auto& x : v) x = noise(rng);
      v[blob] += 1.0f;
      rows.push_back(v);
    }
  }
  return rows;
}

// Direct evaluation of W(t, c) = tf(t, c) * log(1 + A / f(t)).
std::map<int, std::map<std::string, double>> brute_force_ctfidf(const std::vector<int>& labels,
                                                               const std::vector<std::vector<std::string>>& docs,
                                                               double min_df) {
  std::set<std::string> terms;
  for (const auto& d : docs) terms.insert(d.begin(), d.end());
  std::set<int> classes(labels.begin(), labels.end());
  std::vector<std::string> vocab;
  for (const auto& t : terms) {
    std::size_t df = 0;
    for (const auto& d : docs) df += std::find(d.begin(), d.end(), t) != d.end();
    if (static_cast<double>(df) >= min_df * static_cast<double>(docs.size()) - 1e-9) vocab.push_back(t);
  }
  double all = 0;
  for (const auto& d : docs)
    for (const auto& w : d) all += std::find(vocab.begin(), vocab.end(), w) != vocab.end();
  const double a = all / static_cast<double>(classes.size());
  std::map<int, std::map<std::string, double>> out;
  for (const auto& t : vocab) {
    double f = 0;
    for (const auto& d : docs) f += static_cast<double>(std::count(d.begin(), d.end(), t));
    for (int c : classes) {
      double tf = 0;
      for (std::size_t i = 0; i < docs.size(); ++i)
        if (labels[i] == c) tf += static_cast<double>(std::count(docs[i].begin(), docs[i].end(), t));
      if (tf > 0) out[c][t] = tf * std::log(1.0 + a / f);
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("topics") {
  TEST_CASE("hashing encoder is deterministic and unit length") {
    HashingEncoder enc(64);
    const std::vector<std::string> texts = {"shelter food help", "shelter food help", "crime police"};
    const std::vector<std::string> ids = {"a", "b", "c"};
    const auto m = embed_documents(ids, texts, enc);
    REQUIRE(m.size() == 3);
    for (std::size_t i = 0; i < 64; ++i) CHECK(m.row(0)[i] == m.row(1)[i]);
    for (std::size_t r = 0; r < 3; ++r) {
      double norm = 0;
      for (float x : m.row(r)) norm += static_cast<double>(x) * x;
      CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("related texts are closer than unrelated ones") {
    HashingEncoder enc(256);
    const std::vector<std::string> texts = {"homeless shelters are full tonight", "the homeless shelter is full",
                                            "stock markets rallied on earnings"};
    const std::vector<std::string> ids = {"a", "b", "c"};
    const auto m = embed_documents(ids, texts, enc);
    CHECK(cosine(m.row(0), m.row(1)) > cosine(m.row(0), m.row(2)));
  }

  TEST_CASE("empty input") {
    HashingEncoder enc(16);
    const std::vector<std::string> none;
    CHECK(embed_documents(none, none, enc).empty());
    EmbedOptions strict;
    strict.error_on_empty = true;
    CHECK_THROWS(embed_documents(none, none, enc, strict));
  }

  TEST_CASE("encoder failure names the batch") {
    struct Failing : TextEncoder {
      std::string id() const override { return "failing"; }
      std::size_t dim() const override { return 4; }
      std::vector<std::vector<float>> encode(std::span<const std::string>) const override {
        throw std::runtime_error("boom");
      }
    } enc;
    const std::vector<std::string> texts(5, "x"), ids = {"1", "2", "3", "4", "5"};
    try {
      embed_documents(ids, texts, enc);
      FAIL("expected failure");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("batch") != std::string::npos);
    }
  }

  TEST_CASE("embedding cache round trip") {
    testutil::TempDir dir;
    HashingEncoder enc(32);
    const std::vector<std::string> texts = {"one", "two", "three"}, ids = {"x", "y", "z"};
    const auto m = embed_documents(ids, texts, enc);
    save_embedding_cache(dir.file("c.bin"), m);
    const auto back = load_embedding_cache(dir.file("c.bin"));
    CHECK(back.encoder_id() == m.encoder_id());
    CHECK(back.doc_ids() == m.doc_ids());
    CHECK(back.values() == m.values());
    testutil::write_file(dir.file("bad.bin"), "not a cache");
    CHECK_THROWS(load_embedding_cache(dir.file("bad.bin")));
  }

  TEST_CASE("default min cluster size") {
    CHECK(default_min_cluster_size(100) == 5);
    CHECK(default_min_cluster_size(600000) == 500);
    CHECK(default_min_cluster_size(12000) == 10);
  }

  TEST_CASE("two separated blobs give two clusters") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
      ClusterOptions opts;
      opts.min_cluster_size = 10;
      opts.reduction = Reduction::None;
      const auto r = cluster_documents(from_rows(two_blobs(seed)), opts);
      CAPTURE(seed);
      CHECK(r.topics.size() == 2);
      CHECK(r.outlier_ids.size() <= 5);
    }
  }

  TEST_CASE("cluster membership is a partition with minimum sizes") {
    ClusterOptions opts;
    opts.min_cluster_size = 10;
    const auto emb = from_rows(two_blobs(9));
    const auto r = cluster_documents(emb, opts);
    std::multiset<std::string> seen(r.outlier_ids.begin(), r.outlier_ids.end());
    for (const auto& t : r.topics) {
      CHECK(t.member_ids.size() >= 10);
      seen.insert(t.member_ids.begin(), t.member_ids.end());
    }
    CHECK(seen.size() == emb.size());
    CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == emb.size());
  }

  TEST_CASE("identical vectors form one cluster") {
    std::vector<std::vector<float>> rows(30, std::vector<float>{0.6f, 0.8f, 0.0f});
    ClusterOptions opts;
    opts.min_cluster_size = 5;
    const auto r = cluster_documents(from_rows(rows), opts);
    REQUIRE(r.topics.size() == 1);
    CHECK(r.topics[0].member_ids.size() == 30);
    CHECK(r.outlier_ids.empty());
  }

  TEST_CASE("fewer docs than min cluster size are all outliers") {
    ClusterOptions opts;
    opts.min_cluster_size = 50;
    const auto r = cluster_documents(from_rows(two_blobs(1, 10)), opts);
    CHECK(r.topics.empty());
    CHECK(r.outlier_ids.size() == 20);
    CHECK_FALSE(r.warnings.empty());
  }

  TEST_CASE("pca keeps distances between separated groups") {
    PointSet ps;
    const auto rows = two_blobs(3);
    ps.n = rows.size();
    ps.dim = 8;
    for (const auto& r : rows) ps.values.insert(ps.values.end(), r.begin(), r.end());
    const auto reduced = reduce_pca(ps, 2);
    CHECK(reduced.dim == 2);
    CHECK(reduced.n == ps.n);
    const auto again = reduce_pca(ps, 2);
    CHECK(again.values == reduced.values);
  }

  TEST_CASE("c-TF-IDF toy corpus") {
    const std::vector<std::vector<std::string>> docs = {tokenize_for_ctfidf("crime crime police"),
                                                         tokenize_for_ctfidf("shelter shelter food")};
    const std::vector<int> labels = {1, 2};
    CtfidfOptions opts;
    opts.min_df = 0.0;
    const auto r = ctfidf_topic_words(labels, docs, opts);
    CHECK(r.words.at(1).front().term == "crime");
    CHECK(r.words.at(2).front().term == "shelter");
    // A = 3, f(crime) = 2.
    CHECK(r.words.at(1).front().weight == doctest::Approx(2.0 * std::log(1.0 + 3.0 / 2.0)));
  }

  TEST_CASE("equal tf across classes gives equal weight") {
    const std::vector<std::vector<std::string>> docs = {{"help", "crime"}, {"help", "food", "food"}};
    const std::vector<int> labels = {0, 1};
    const auto t = ctfidf_weights(labels, docs, {});
    CHECK(t.weights.at(0).at("help") == t.weights.at(1).at("help"));
  }

  TEST_CASE("single class weights equal the formula") {
    const std::vector<std::vector<std::string>> docs = {{"a1", "b1", "b1"}, {"b1", "c1"}};
    const std::vector<int> labels = {0, 0};
    const auto t = ctfidf_weights(labels, docs, {});
    CHECK(t.average_class_size == 5.0);
    CHECK(t.weights.at(0).at("b1") == doctest::Approx(3.0 * std::log(1.0 + 5.0 / 3.0)).epsilon(1e-12));
    CHECK(t.weights.at(0).at("a1") == doctest::Approx(std::log(1.0 + 5.0)).epsilon(1e-12));
  }

  TEST_CASE("c-TF-IDF matches a brute-force evaluation on random corpora") {
    std::mt19937_64 rng(77);
    const std::vector<std::string> words = {"aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh", "ii", "jj"};
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + rng() % 49;
      const int n_classes = 1 + static_cast<int>(rng() % 4);
      std::vector<std::vector<std::string>> docs(n);
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i % static_cast<std::size_t>(n_classes));
        const std::size_t len = 1 + rng() % 8;
        for (std::size_t k = 0; k < len; ++k) docs[i].push_back(words[rng() % (1 + rng() % words.size())]);
      }
      CtfidfOptions opts;
      opts.min_df = static_cast<double>(rng() % 4) / 10.0;
      const auto got = ctfidf_weights(labels, docs, opts);
      const auto want = brute_force_ctfidf(labels, docs, opts.min_df);
      for (const auto& [c, terms] : want) {
        for (const auto& [t, w] : terms) {
          CAPTURE(t);
          REQUIRE(got.weights.at(c).contains(t));
          CHECK(std::abs(got.weights.at(c).at(t) - w) < 1e-9);
        }
        CHECK(got.weights.at(c).size() == terms.size());
      }
    }
  }

  TEST_CASE("topic words exclude stopwords and rare terms") {
    const std::vector<std::vector<std::string>> docs = {{"the", "shelter", "rare"}, {"the", "shelter"}, {"the", "food"},
                                                        {"food", "shelter"}};
    const std::vector<int> labels = {0, 0, 1, 1};
    CtfidfOptions opts;
    opts.min_df = 0.5;
    opts.stopwords = {"the"};
    const auto r = ctfidf_topic_words(labels, docs, opts);
    for (const auto& [c, words] : r.words) {
      for (const auto& w : words) {
        CHECK(w.term != "the");
        CHECK(w.term != "rare");
      }
      for (std::size_t i = 1; i < words.size(); ++i) CHECK(words[i - 1].weight >= words[i].weight);
    }
  }

  TEST_CASE("empty class gives an empty list and a warning") {
    const std::vector<std::vector<std::string>> docs = {{"aa"}};
    const std::vector<int> labels = {0};
    const std::vector<int> classes = {0, 1};
    const auto r = ctfidf_topic_words(labels, docs, {}, classes);
    CHECK(r.words.at(1).empty());
    CHECK(r.warnings.size() == 1);
  }

  TEST_CASE("placeholder removed before tokenizing") {
    CHECK(tokenize_for_ctfidf("help [GROUP] now a", "[GROUP]") == std::vector<std::string>{"help", "now"});
  }

  TEST_CASE("representative docs") {
    const auto emb = from_rows({{1, 0, 0}, {0.9f, 0.1f, 0}, {0.5f, 0.5f, 0}, {0.1f, 0.9f, 0}, {0.7f, 0.3f, 0}});
    Topic single{0, {"d2"}, {}, {}};
    CHECK(representative_docs(single, emb) == std::vector<std::string>{"d2"});

    // d2 sits at the centroid of the other pair.
    Topic centred{0, {"d0", "d2", "d3"}, {}, {}};
    const auto emb2 = from_rows({{1, 0, 0}, {0, 0, 1}, {0.5f, 0.5f, 0}, {0, 1, 0}});
    CHECK(representative_docs(centred, emb2, 1) == std::vector<std::string>{"d2"});
  }

  TEST_CASE("representative docs match the exhaustive ranking and ignore member order") {
    std::mt19937_64 rng(3);
    std::normal_distribution<float> g;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::vector<float>> rows(20, std::vector<float>(6));
      for (auto& r : rows)
        for (auto& x : r) x = g(rng);
      const auto emb = from_rows(rows);
      Topic t;
      for (std::size_t i = 0; i < 20; ++i)
        if (rng() % 2) t.member_ids.push_back("d" + std::to_string(i));
      if (t.member_ids.empty()) continue;

      std::vector<double> centroid(6, 0.0);
      for (const auto& id : t.member_ids) {
        const auto row = emb.row(emb.index_of(id));
        for (std::size_t k = 0; k < 6; ++k) centroid[k] += row[k];
      }
      std::vector<std::pair<double, std::string>> scored;
      for (const auto& id : t.member_ids) {
        const auto row = emb.row(emb.index_of(id));
        double dot = 0, na = 0, nb = 0;
        for (std::size_t k = 0; k < 6; ++k) {
          dot += row[k] * centroid[k];
          na += static_cast<double>(row[k]) * row[k];
          nb += centroid[k] * centroid[k];
        }
        scored.emplace_back(-dot / std::sqrt(na * nb), id);
      }
      std::sort(scored.begin(), scored.end());
      std::vector<std::string> want;
      for (std::size_t i = 0; i < std::min<std::size_t>(3, scored.size()); ++i) want.push_back(scored[i].second);

      const auto got = representative_docs(t, emb, 3);
      CHECK(got == want);
      std::shuffle(t.member_ids.begin(), t.member_ids.end(), rng);
      CHECK(representative_docs(t, emb, 3) == got);
    }
  }

  TEST_CASE("topic selection") {
    testutil::TempDir dir;
    TopicModel model;
    for (int id : kReferenceTopicIds) model.topics.push_back({id, {}, {}, {}});

    std::string listing;
    for (int id : kReferenceTopicIds) listing += std::to_string(id) + " reviewed\n";
    testutil::write_file(dir.file("sel.txt"), listing);
    const auto sel = select_topics(model, dir.file("sel.txt"));
    CHECK(sel.selected_topic_ids.size() == 15);
    CHECK(sel.warnings.empty());

    testutil::write_file(dir.file("empty.txt"), "");
    const auto empty = select_topics(model, dir.file("empty.txt"));
    CHECK(empty.selected_topic_ids.empty());
    CHECK(empty.warnings.size() == 1);

    testutil::write_file(dir.file("bad.txt"), "9999\n");
    CHECK_THROWS(select_topics(model, dir.file("bad.txt")));

    testutil::write_file(dir.file("all.txt"), "# everything\n*\n");
    CHECK(select_topics(model, dir.file("all.txt")).selected_topic_ids.size() == 15);
  }

  TEST_CASE("topic model round trip") {
    HashingEncoder enc(64);
    std::vector<std::string> ids, texts;
    for (int i = 0; i < 30; ++i) {
      ids.push_back("s" + std::to_string(i));
      texts.push_back("shelter beds cold night " + std::to_string(i % 3));
      ids.push_back("c" + std::to_string(i));
      texts.push_back("police crime arrests street " + std::to_string(i % 3));
    }
    const auto emb = embed_documents(ids, texts, enc);
    TopicModelOptions opts;
    opts.cluster.min_cluster_size = 10;
    opts.ctfidf.min_df = 0.0;
    const auto model = build_topic_model(emb, texts, opts);
    CHECK(model.topics.size() == 2);
    testutil::TempDir dir;
    save_topic_model(dir.file("m.json"), model);
    const auto back = load_topic_model(dir.file("m.json"));
    CHECK(to_json(back) == to_json(model));
    CHECK(back.assignments().size() == 60);
  }
}
