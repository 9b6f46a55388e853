#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "aporo/bench/adapters.hpp"
#include "aporo/bench/harness.hpp"
#include "aporo/bench/prompt.hpp"
#include "aporo/bench/split.hpp"
#include "aporo/common/error.hpp"
#include "test_util.hpp"

using namespace aporo;
using namespace aporo::bench;

namespace {

data::DatasetRow row(std::string id, Label label, std::string ts, std::string text = "x") {
  data::DatasetRow r;
  r.id = std::move(id);
  r.label = label;
  r.text = std::move(text);
  r.created_at = parse_timestamp(ts);
  return r;
}

std::vector<data::DatasetRow> synthetic_rows(std::mt19937_64& rng, std::size_t n) {
  std::vector<data::DatasetRow> rows;
  const auto start = *parse_timestamp("2022-08-25T00:00:00Z");
  for (std::size_t i = 0; i < n; ++i) {
    auto r = row("r" + std::to_string(i), kAllLabels[rng() % 3], "2022-08-25");
    r.created_at = start + std::chrono::seconds(rng() % (90 * 86400));
    r.region = kAllRegions[rng() % kNumRegions];
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_SUITE("bench") {
  TEST_CASE("chronological split invariants") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
      const auto rows = synthetic_rows(rng, 20 + rng() % 200);
      const auto split = chronological_split(rows);
      CHECK(split.train_ids.size() + split.test_ids.size() == rows.size());
      std::set<std::string> train(split.train_ids.begin(), split.train_ids.end());
      for (const auto& r : rows) {
        if (train.contains(r.id)) CHECK(*r.created_at < split.cut);
        else CHECK(*r.created_at >= split.cut);
      }
      const auto again = chronological_split(rows, split.cut);
      CHECK(again.train_ids == split.train_ids);
      CHECK(again.test_ids == split.test_ids);
    }
  }

  TEST_CASE("auto cut on uniform timestamps gives a two to one split") {
    std::vector<data::DatasetRow> rows;
    const auto start = *parse_timestamp("2022-08-25T00:00:00Z");
    for (int i = 0; i < 300; ++i) {
      auto r = row("u" + std::to_string(i), Label::None, "2022-08-25");
      r.created_at = start + std::chrono::hours(i);
      rows.push_back(r);
    }
    const auto s = chronological_split(rows);
    CHECK(std::abs(static_cast<long>(s.train_ids.size()) - 2 * static_cast<long>(s.test_ids.size())) <= 3);
  }

  TEST_CASE("split errors and serialization") {
    std::vector<data::DatasetRow> same = {row("a", Label::None, "2022-09-01"), row("b", Label::None, "2022-09-01")};
    CHECK_THROWS(chronological_split(same));
    std::vector<data::DatasetRow> undated = {row("a", Label::None, "2022-09-01"), row("b", Label::None, "2022-09-02")};
    undated[1].created_at.reset();
    CHECK_THROWS(chronological_split(undated));

    std::vector<data::DatasetRow> ok = {row("a", Label::None, "2022-09-01"), row("b", Label::None, "2022-10-30")};
    const auto s = chronological_split(ok, kReferenceCut);
    const auto back = DatasetSplit::from_json(s.to_json());
    CHECK(back.train_ids == s.train_ids);
    CHECK(back.test_ids == s.test_ids);
    CHECK(back.cut == s.cut);
  }

  TEST_CASE("k-fold") {
    std::vector<data::DatasetRow> rows;
    for (int i = 0; i < 9; ++i) rows.push_back(row("k" + std::to_string(i), kAllLabels[i % 3], "2022-09-01"));
    const auto folds = kfold_split(rows, 3, 7);
    REQUIRE(folds.size() == 3);
    std::map<std::string, Label> label_of;
    for (const auto& r : rows) label_of[r.id] = r.label;
    for (const auto& f : folds) {
      CHECK(f.size() == 3);
      std::set<Label> labels;
      for (const auto& id : f) labels.insert(label_of[id]);
      CHECK(labels.size() == 3);
    }
    CHECK_THROWS(kfold_split(rows, 0, 1));
    CHECK_THROWS(kfold_split(rows, 10, 1));

    std::mt19937_64 rng(3);
    const auto big = synthetic_rows(rng, 1816);
    std::vector<std::size_t> sizes;
    for (const auto& f : kfold_split(big, 3, 1)) sizes.push_back(f.size());
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{605, 605, 606});
  }

  TEST_CASE("shipped prompt specs") {
    const auto zero = load_prompt_spec(testutil::data_path("prompts/zeroshot.json"));
    const auto few = load_prompt_spec(testutil::data_path("prompts/fewshot.json"));
    CHECK(zero.exemplars.empty());
    REQUIRE(few.exemplars.size() == 9);
    for (Label l : kAllLabels)
      CHECK(std::count_if(few.exemplars.begin(), few.exemplars.end(), [&](const Exemplar& e) { return e.label == l; }) == 3);
    CHECK(few.decoding.temperature == 0.7);
    CHECK(few.decoding.max_tokens == 10);
    CHECK(few.decoding.n == 1);

    const auto few_msgs = build_prompt(few, "some post");
    REQUIRE(few_msgs.size() == 2);
    CHECK(few_msgs[0].role == "system");
    for (const auto& e : few.exemplars) CHECK(few_msgs[1].content.find(e.text) != std::string::npos);
    const auto zero_msgs = build_prompt(zero, "some post");
    CHECK(zero_msgs[1].content.find("Examples") == std::string::npos);
  }

  TEST_CASE("tweets are inserted verbatim") {
    const auto zero = load_prompt_spec(testutil::data_path("prompts/zeroshot.json"));
    const std::string tweet = R"(they said "get a job" {tweet} {examples})";
    const auto msgs = build_prompt(zero, tweet);
    CHECK(msgs[1].content.find(tweet) != std::string::npos);
    std::set<std::string> seen;
    for (int i = 0; i < 200; ++i) seen.insert(build_prompt(zero, "post " + std::to_string(i))[1].content);
    CHECK(seen.size() == 200);
  }

  TEST_CASE("prompt spec validation") {
    PromptSpec s{"s", "sys", "no slot", {}, {}};
    CHECK_THROWS_AS(validate_prompt_spec(s), ContractViolation);
    s.user_template = "{tweet} {tweet}";
    CHECK_THROWS_AS(validate_prompt_spec(s), ContractViolation);
    s.user_template = "{examples}{tweet}";
    CHECK_NOTHROW(validate_prompt_spec(s));
    s.exemplars = {{"a", Label::Direct}};
    CHECK_THROWS_AS(validate_prompt_spec(s), ContractViolation);
  }

  TEST_CASE("label parsing") {
    CHECK(parse_label("Reporting").label == Label::Reporting);
    CHECK(parse_label(" direct.").label == Label::Direct);
    CHECK(parse_label("Label: None").label == Label::None);
    CHECK(parse_label("It is Direct and also Reporting").failed());
    CHECK(parse_label("").failed());
    CHECK(parse_label("no idea").scored() == Label::None);
    CHECK(parse_binary_label("Toxic") == BinaryLabel::Toxic);
    CHECK(parse_binary_label("non-toxic") == BinaryLabel::NonToxic);
    CHECK_FALSE(parse_binary_label("maybe"));
  }

  TEST_CASE("binary collapse") {
    CHECK(collapse_binary(Label::Direct) == BinaryLabel::Toxic);
    CHECK(collapse_binary(Label::Reporting) == BinaryLabel::NonToxic);
    const std::vector<Label> nones(5, Label::None);
    for (auto b : collapse_binary(nones)) CHECK(b == BinaryLabel::NonToxic);

    std::mt19937_64 rng(6);
    std::vector<Label> v;
    for (int i = 0; i < 500; ++i) v.push_back(kAllLabels[rng() % 3]);
    const auto b = collapse_binary(v);
    CHECK(std::count(b.begin(), b.end(), BinaryLabel::Toxic) == std::count(v.begin(), v.end(), Label::Direct));
  }

  TEST_CASE("preprocessing strips mentions and urls") {
    CHECK(preprocess_for_model("@bob look https://t.co/x now") == "look now");
  }

  TEST_CASE("bow-linear fits a small separable set") {
    std::vector<data::DatasetRow> rows;
    const std::vector<std::string> cues = {"lazy scroungers should starve", "news report on shelters closing",
                                           "lovely weather at the park"};
    for (int i = 0; i < 30; ++i) {
      rows.push_back(row("b" + std::to_string(i), kAllLabels[i % 3],
                         "2022-09-01", cues[i % 3] + " " + std::to_string(i)));
    }
    DatasetSplit split;
    for (const auto& r : rows) {
      split.train_ids.push_back(r.id);
      split.test_ids.push_back(r.id);
    }
    AdapterConfig cfg;
    cfg.epochs = 20;
    BowLinearAdapter adapter(cfg);
    TrainRunOptions opts;
    opts.seeds = {42, 62, 82};
    const auto preds = train_and_predict(adapter, rows, split, opts);
    REQUIRE(preds.size() == 3);
    for (const auto& seed_preds : preds) {
      REQUIRE(seed_preds.size() == rows.size());
      std::size_t correct = 0;
      for (const auto& p : seed_preds) correct += p.gold == p.pred;
      CHECK(static_cast<double>(correct) / static_cast<double>(rows.size()) >= 0.95);
    }
    CHECK(train_and_predict(adapter, rows, split, opts)[0] == preds[0]);
  }

  TEST_CASE("lexicon prompt evaluation") {
    std::vector<data::DatasetRow> rows = {row("p1", Label::Direct, "2022-09-01", "lazy scum"),
                                          row("p2", Label::None, "2022-09-01", "nice day")};
    AdapterConfig cfg;
    cfg.kind = "lexicon";
    cfg.adapter_id = "lex";
    const auto adapter = make_generative_adapter(cfg);
    const auto spec = load_prompt_spec(testutil::data_path("prompts/zeroshot.json"));
    const auto preds = prompt_eval(*adapter, spec, rows, {"p1", "p2"}, 42);
    REQUIRE(preds.size() == 2);
    CHECK(preds[0].gold == "Direct");
    for (const auto& p : preds) CHECK(label_from_string(p.pred));

    cfg.label_space = "binary";
    const auto bin = make_generative_adapter(cfg);
    const auto bpreds = prompt_eval(*bin, spec, rows, {"p1", "p2"}, 42, true);
    CHECK(bpreds[0].gold == "Toxic");
    CHECK(bpreds[1].gold == "NonToxic");
  }

  TEST_CASE("openai adapter needs its key") {
    AdapterConfig cfg;
    cfg.kind = "openai";
    cfg.api_key_env = "APORO_TEST_KEY_THAT_IS_NOT_SET";
    CHECK_THROWS(make_generative_adapter(cfg));
  }

  TEST_CASE("prediction file round trip") {
    testutil::TempDir dir;
    const std::vector<Prediction> preds = {{"a", "Direct", "None", 42, true}, {"b,c", "None", "None", 62, false}};
    write_predictions(dir.file("p.csv"), preds);
    CHECK(read_predictions(dir.file("p.csv")) == preds);
  }

  TEST_CASE("adapter config") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("a.ini"), "adapter_id = roberta\nkind = external\nbackbone = roberta-base\n"
                                            "batch_size = 4\nepochs = 4\ncommand = python3 trainer.py\n");
    const auto cfg = load_adapter_config(dir.file("a.ini"));
    CHECK(cfg.adapter_id == "roberta");
    CHECK(cfg.kind == "external");
    CHECK(is_finetune_kind(cfg.kind));
    CHECK_FALSE(is_finetune_kind("lexicon"));
    CHECK(cfg.to_json().dump().find("api_key\"") == std::string::npos);
    testutil::write_file(dir.file("bad.ini"), "epochs = many\n");
    CHECK_THROWS(load_adapter_config(dir.file("bad.ini")));
  }
}
