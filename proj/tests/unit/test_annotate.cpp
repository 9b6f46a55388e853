#include <doctest.h>

#include <httplib.h>

#include <random>
#include <set>
#include <thread>

#include "aporo/annotate/agreement.hpp"
#include "aporo/annotate/server.hpp"
#include "aporo/annotate/store.hpp"
#include "aporo/common/error.hpp"
#include "test_util.hpp"

using namespace aporo;
using namespace aporo::annotate;

namespace {

Timestamp fixed_clock() { return *parse_timestamp("2022-12-01T00:00:00Z"); }

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("i" + std::to_string(i));
  return out;
}

// Store with `n` items, each assigned to a1 and a2.
void seed_store(AnnotationStore& store, std::size_t n) {
  for (const auto& id : ids(n)) store.add_item({id, "text of " + id, Region::Europe, 5, 1, {}});
  store.apply_assignment(assign_items(ids(n), {"a1", "a2"}, 2, 1));
}

std::size_t load_of(const Assignment& a, const std::string& annotator) {
  std::size_t n = 0;
  for (const auto& [item, list] : a) n += std::count(list.begin(), list.end(), annotator);
  return n;
}

}  // namespace

TEST_SUITE("annotate") {
  TEST_CASE("assignment balance") {
    const auto two = assign_items(ids(4), {"a", "b"}, 2, 0);
    CHECK(load_of(two, "a") == 4);
    CHECK(load_of(two, "b") == 4);

    const auto three = assign_items(ids(9), {"a", "b", "c"}, 2, 3);
    for (const auto& who : {"a", "b", "c"}) CHECK(load_of(three, who) == 6);
    for (const auto& [item, list] : three) CHECK(std::set<std::string>(list.begin(), list.end()).size() == 2);

    CHECK_THROWS(assign_items(ids(3), {"a", "b"}, 3, 0));
  }

  TEST_CASE("assignment is deterministic and balanced within one") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n_items = 1 + rng() % 40, n_ann = 2 + rng() % 5, per = 1 + rng() % n_ann;
      std::vector<std::string> annotators;
      for (std::size_t k = 0; k < n_ann; ++k) annotators.push_back("a" + std::to_string(k));
      const auto a = assign_items(ids(n_items), annotators, per, trial);
      CHECK(a == assign_items(ids(n_items), annotators, per, trial));
      std::size_t hi = 0, lo = SIZE_MAX;
      for (const auto& who : annotators) {
        hi = std::max(hi, load_of(a, who));
        lo = std::min(lo, load_of(a, who));
      }
      CHECK(hi - lo <= 1);
    }
  }

  TEST_CASE("label storage, conflicts and authorization") {
    AnnotationStore store({}, fixed_clock);
    seed_store(store, 2);
    store.add_item({"solo", "x", {}, {}, {}, {}});
    store.assign("solo", "a1");

    const auto r = store.record_label("i0", "a1", Label::Direct, false);
    CHECK(r.timestamp == fixed_clock());
    try {
      store.record_label("i0", "a1", Label::None, false);
      FAIL("expected conflict");
    } catch (const StoreError& e) {
      CHECK(e.kind() == StoreError::Kind::Conflict);
    }
    try {
      store.record_label("solo", "a2", Label::None, false);
      FAIL("expected unauthorized");
    } catch (const StoreError& e) {
      CHECK(e.kind() == StoreError::Kind::Unauthorized);
    }
    CHECK_THROWS_AS(store.record_label("i1", "a1", std::nullopt, false), StoreError);
    CHECK(store.record_label("i1", "a1", std::nullopt, true).insufficient_context);
  }

  TEST_CASE("resubmission with the same submission id is idempotent") {
    AnnotationStore store({}, fixed_clock);
    seed_store(store, 1);
    const auto first = store.record_label("i0", "a1", Label::Reporting, false, "sub-1");
    const auto again = store.record_label("i0", "a1", Label::Reporting, false, "sub-1");
    CHECK(again.submission_id == first.submission_id);
    CHECK(store.records().size() == 1);
  }

  TEST_CASE("kappa") {
    const Confusion c{{{30, 5, 5}, {5, 30, 5}, {5, 5, 10}}};
    const auto s = agreement_stats(c);
    CHECK(s.n == 100);
    CHECK(s.percent_agreement == doctest::Approx(0.70));
    CHECK(s.kappa == doctest::Approx(0.53125).epsilon(1e-12));

    const std::vector<Label> v = {Label::Direct, Label::None, Label::Reporting, Label::None};
    const auto same = agreement_stats(v, v);
    CHECK(same.percent_agreement == 1.0);
    CHECK(same.kappa == 1.0);

    const std::vector<Label> empty;
    CHECK_THROWS_AS(agreement_stats(empty, empty), ContractViolation);
  }

  TEST_CASE("independent random labelers have kappa near zero") {
    std::mt19937_64 rng(99);
    std::vector<Label> a, b;
    for (int i = 0; i < 10000; ++i) {
      a.push_back(kAllLabels[rng() % 3]);
      b.push_back(kAllLabels[rng() % 3]);
    }
    CHECK(std::abs(agreement_stats(a, b).kappa) <= 0.03);
  }

  TEST_CASE("kappa is symmetric and bounded") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Label> a, b;
      const int n = 1 + static_cast<int>(rng() % 50);
      for (int i = 0; i < n; ++i) {
        a.push_back(kAllLabels[rng() % 3]);
        b.push_back(rng() % 2 ? a.back() : kAllLabels[rng() % 3]);
      }
      const auto ab = agreement_stats(a, b), ba = agreement_stats(b, a);
      CHECK(ab.kappa == doctest::Approx(ba.kappa).epsilon(1e-12));
      CHECK(ab.kappa <= 1.0 + 1e-12);
      CHECK(ab.kappa >= -1.0 - 1e-12);
    }
  }

  TEST_CASE("store agreement pools double-annotated items") {
    AnnotationStore store({}, fixed_clock);
    seed_store(store, 3);
    store.record_label("i0", "a1", Label::Direct, false);
    store.record_label("i0", "a2", Label::Direct, false);
    store.record_label("i1", "a1", Label::None, false);
    store.record_label("i1", "a2", Label::Reporting, false);
    store.record_label("i2", "a1", Label::None, false);
    const auto s = store.agreement();
    CHECK(s.n == 2);
    CHECK(s.percent_agreement == 0.5);
    CHECK(s.confusion[index_of(Label::None)][index_of(Label::Reporting)] == 1);
  }

  TEST_CASE("disagreement queue") {
    const auto rec = [](std::string item, std::string who, std::optional<Label> l, bool insufficient = false) {
      AnnotationRecord r;
      r.item_id = std::move(item);
      r.annotator_id = std::move(who);
      r.label = l;
      r.insufficient_context = insufficient;
      return r;
    };
    CHECK(disagreement_queue({rec("x", "a", Label::Direct), rec("x", "b", Label::Direct)}).empty());
    CHECK(disagreement_queue({rec("x", "a", Label::Direct), rec("x", "b", Label::None)}).size() == 1);
    CHECK(disagreement_queue({rec("x", "a", Label::Direct), rec("x", "b", std::nullopt, true)}).size() == 1);
    CHECK(disagreement_queue({rec("x", "a", Label::Direct)}).empty());

    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<AnnotationRecord> records;
      std::size_t conflicts = 0;
      for (int i = 0; i < 30; ++i) {
        const auto id = "x" + std::to_string(i);
        const Label a = kAllLabels[rng() % 3], b = kAllLabels[rng() % 3];
        records.push_back(rec(id, "a", a));
        records.push_back(rec(id, "b", b));
        conflicts += a != b;
      }
      std::shuffle(records.begin(), records.end(), rng);
      CHECK(disagreement_queue(records).size() == conflicts);
    }
  }

  TEST_CASE("adjudication and export") {
    testutil::TempDir dir;
    AnnotationStore store({}, fixed_clock);
    seed_store(store, 4);
    store.record_label("i0", "a1", Label::Direct, false);
    store.record_label("i0", "a2", Label::Direct, false);
    store.record_label("i1", "a1", Label::Direct, false);
    store.record_label("i1", "a2", Label::Reporting, false);
    store.record_label("i2", "a1", Label::None, false);
    store.record_label("i2", "a2", std::nullopt, true);
    store.record_label("i3", "a1", Label::None, false);

    CHECK(store.adjudicated().at("i0").final_label == Label::Direct);
    CHECK(store.adjudicated().at("i0").automatic);
    CHECK(store.queue().size() == 2);
    CHECK_THROWS_AS(store.adjudicate("i3", Label::None, ""), StoreError);

    try {
      store.export_rows();
      FAIL("expected conflict");
    } catch (const StoreError& e) {
      CHECK(e.kind() == StoreError::Kind::Conflict);
      CHECK(std::string(e.what()).find("i1") != std::string::npos);
    }

    CHECK(store.adjudicate("i1", Label::Reporting, "context shows a news report").final_label == Label::Reporting);
    CHECK_THROWS_AS(store.adjudicate("i1", Label::Direct, ""), StoreError);
    const auto removed = store.adjudicate("i2", std::nullopt, "not enough context");
    CHECK(removed.removed);
    CHECK_FALSE(removed.final_label);
    store.record_label("i3", "a2", Label::None, false);

    const auto summary = store.export_dataset(dir.file("d.csv"));
    CHECK(summary.rows == 3);
    CHECK(summary.removed == 1);
    const auto rows = data::load_dataset(dir.file("d.csv"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].id == "i1");
    CHECK(rows[1].label == Label::Reporting);
    CHECK(rows[0].region == Region::Europe);
  }

  TEST_CASE("unanimous items can still be overridden") {
    AnnotationStore store({}, fixed_clock);
    seed_store(store, 1);
    store.record_label("i0", "a1", Label::Direct, false);
    store.record_label("i0", "a2", Label::Direct, false);
    store.adjudicate("i0", Label::Reporting, "override");
    CHECK(store.adjudicated().at("i0").final_label == Label::Reporting);
    CHECK_FALSE(store.adjudicated().at("i0").automatic);
  }

  TEST_CASE("empty store exports a header") {
    testutil::TempDir dir;
    AnnotationStore store;
    CHECK(store.export_dataset(dir.file("e.csv")).rows == 0);
    CHECK(testutil::read_file(dir.file("e.csv")).find("id,text") == 0);
  }

  TEST_CASE("log replay restores state") {
    testutil::TempDir dir;
    const auto log = dir.file("log.jsonl");
    {
      AnnotationStore store(log, fixed_clock);
      seed_store(store, 2);
      store.record_label("i0", "a1", Label::Direct, false);
      store.record_label("i0", "a2", Label::None, false);
      store.adjudicate("i0", Label::None, "n");
    }
    AnnotationStore reopened(log, fixed_clock);
    CHECK(reopened.item_count() == 2);
    CHECK(reopened.records().size() == 2);
    CHECK(reopened.adjudicated().at("i0").final_label == Label::None);
    CHECK_THROWS_AS(reopened.record_label("i0", "a1", Label::None, false), StoreError);
    CHECK(reopened.next_item("a1")->id == "i1");
  }

  TEST_CASE("concurrent labelling keeps one record per annotator") {
    AnnotationStore store({}, fixed_clock);
    seed_store(store, 50);
    std::vector<std::thread> threads;
    std::atomic<int> conflicts{0};
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&, t] {
        for (const auto& id : ids(50)) {
          try {
            store.record_label(id, t % 2 ? "a1" : "a2", Label::None, false);
          } catch (const StoreError&) {
            ++conflicts;
          }
        }
      });
    }
    for (auto& th : threads) th.join();
    CHECK(store.records().size() == 100);
    CHECK(conflicts == 100);
  }

  TEST_CASE("api routes and status codes") {
    testutil::TempDir dir;
    AnnotationStore store({}, fixed_clock);
    seed_store(store, 2);
    const auto catalog = taxonomy::Catalog::load(testutil::data_path("taxonomy_catalog.tsv"));
    ApiOptions opts;
    opts.guidelines_path = testutil::data_path("guidelines.md");
    opts.catalog = &catalog;
    AnnotationApi api(store, opts);

    auto res = api.handle({"GET", "/items/next", {{"annotator", "a1"}}, ""});
    CHECK(res.status == 200);
    auto body = nlohmann::json::parse(res.body);
    CHECK(body["id"] == "i0");
    CHECK_FALSE(body.contains("region"));
    res = api.handle({"GET", "/items/next", {{"annotator", "a1"}, {"meta", "1"}}, ""});
    CHECK(nlohmann::json::parse(res.body).contains("region"));
    CHECK(api.handle({"GET", "/items/next", {}, ""}).status == 400);

    CHECK(api.handle({"POST", "/items/i0/label", {}, R"({"annotator":"a1","label":"Direct"})"}).status == 200);
    CHECK(api.handle({"POST", "/items/i0/label", {}, R"({"annotator":"a1","label":"Direct"})"}).status == 409);
    CHECK(api.handle({"POST", "/items/i0/label", {}, R"({"annotator":"zz","label":"Direct"})"}).status == 403);
    CHECK(api.handle({"POST", "/items/nope/label", {}, R"({"annotator":"a1","label":"Direct"})"}).status == 404);
    CHECK(api.handle({"POST", "/items/i1/label", {}, R"({"annotator":"a1","label":"Maybe"})"}).status == 422);
    CHECK(api.handle({"POST", "/items/i1/label", {}, "{not json"}).status == 400);
    CHECK(api.handle({"POST", "/items/i0/label", {}, R"({"annotator":"a2","label":"None"})"}).status == 200);

    CHECK(api.handle({"GET", "/export", {}, ""}).status == 409);
    const auto queue = nlohmann::json::parse(api.handle({"GET", "/queue", {}, ""}).body);
    REQUIRE(queue.size() == 1);
    CHECK(queue[0]["item_id"] == "i0");
    CHECK(api.handle({"POST", "/items/i0/adjudicate", {}, R"({"decision":"None","note":"x"})"}).status == 200);
    CHECK(api.handle({"POST", "/items/i0/adjudicate", {}, R"({"decision":"None"})"}).status == 409);

    api.handle({"POST", "/items/i1/label", {}, R"({"annotator":"a1","label":"Reporting"})"});
    api.handle({"POST", "/items/i1/label", {}, R"({"annotator":"a2","label":"Reporting"})"});
    CHECK(api.handle({"GET", "/items/next", {{"annotator", "a1"}}, ""}).status == 204);
    res = api.handle({"GET", "/export", {}, ""});
    CHECK(res.status == 200);
    CHECK(res.content_type == "text/csv");
    CHECK(res.body.find("i1") != std::string::npos);

    const auto agreement = nlohmann::json::parse(api.handle({"GET", "/agreement", {}, ""}).body);
    CHECK(agreement["n"] == 2);
    CHECK(api.handle({"GET", "/guidelines", {}, ""}).body.find("Direct") != std::string::npos);
    CHECK(nlohmann::json::parse(api.handle({"GET", "/taxonomy", {}, ""}).body).size() == 14);
    CHECK(api.handle({"DELETE", "/queue", {}, ""}).status == 404);
  }

  TEST_CASE("http server") {
    AnnotationStore store({}, fixed_clock);
    seed_store(store, 1);
    AnnotationApi api(store, {});
    HttpServer server(api);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread th([&] { server.run(); });

    httplib::Client cli("127.0.0.1", port);
    auto res = cli.Get("/items/next?annotator=a1");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(nlohmann::json::parse(res->body)["id"] == "i0");
    res = cli.Post("/items/i0/label", R"({"annotator":"a1","label":"Direct"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    res = cli.Post("/items/i0/label", R"({"annotator":"a1","label":"Direct"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 409);
    res = cli.Get("/export");
    REQUIRE(res);
    CHECK(res->status == 409);

    server.stop();
    th.join();
  }
}
