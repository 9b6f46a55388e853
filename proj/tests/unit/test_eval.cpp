#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include "aporo/bench/adapters.hpp"
#include "aporo/common/csv.hpp"
#include "aporo/common/error.hpp"
#include "aporo/eval/metrics.hpp"
#include "aporo/eval/report.hpp"
#include "test_util.hpp"

using namespace aporo;
using namespace aporo::eval;
using bench::Prediction;

namespace {

std::vector<csv::Row> parse_csv(const std::string& text) {
  std::istringstream in(text);
  csv::Reader reader(in);
  std::vector<csv::Row> rows;
  csv::Row row;
  while (reader.next(row)) rows.push_back(row);
  return rows;
}

constexpr Label D = Label::Direct, R = Label::Reporting, N = Label::None;

std::vector<Prediction> to_predictions(const std::vector<Label>& gold, const std::vector<Label>& pred,
                                       std::uint64_t seed = 42) {
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < gold.size(); ++i)
    out.push_back({"p" + std::to_string(i), std::string(to_string(gold[i])), std::string(to_string(pred[i])), seed, false});
  return out;
}

// Standard weighted scores computed from scratch.
struct Oracle {
  double accuracy, precision, recall, f1;
};

Oracle oracle(const std::vector<Label>& gold, const std::vector<Label>& pred) {
  const double n = static_cast<double>(gold.size());
  Oracle o{0, 0, 0, 0};
  for (std::size_t i = 0; i < gold.size(); ++i) o.accuracy += gold[i] == pred[i];
  o.accuracy /= n;
  for (Label c : kAllLabels) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      tp += gold[i] == c && pred[i] == c;
      fp += gold[i] != c && pred[i] == c;
      fn += gold[i] == c && pred[i] != c;
    }
    const double support = tp + fn;
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = support > 0 ? tp / support : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    o.precision += p * support / n;
    o.recall += r * support / n;
    o.f1 += f * support / n;
  }
  return o;
}

std::vector<data::DatasetRow> rows_for(const std::vector<Prediction>& preds, std::mt19937_64& rng) {
  std::vector<data::DatasetRow> rows;
  for (const auto& p : preds) {
    data::DatasetRow r;
    r.id = p.id;
    r.text = "t";
    r.label = *label_from_string(p.gold);
    r.region = kAllRegions[rng() % kNumRegions];
    r.topic_id = static_cast<int>(rng() % 3);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("perfect predictions") {
    const std::vector<Label> g = {D, R, N, N};
    const auto m = weighted_metrics(g, g);
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
  }

  TEST_CASE("hand computed example") {
    const std::vector<Label> g = {D, D, R, N}, p = {D, R, R, N};
    const auto m = weighted_metrics(g, p);
    CHECK(m.accuracy == doctest::Approx(0.75));
    CHECK(m.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.per_class[1].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.per_class[2].f1 == doctest::Approx(1.0));
    CHECK(m.f1 == doctest::Approx(0.75));
  }

  TEST_CASE("constant predictor") {
    std::vector<Label> g;
    g.insert(g.end(), 173, D);
    g.insert(g.end(), 229, R);
    g.insert(g.end(), 184, N);
    const std::vector<Label> p(g.size(), R);
    const auto m = weighted_metrics(g, p);
    CHECK(m.accuracy == doctest::Approx(229.0 / 586.0));
    CHECK(m.per_class[0].precision_undefined);
  }

  TEST_CASE("empty and mismatched input") {
    const std::vector<Label> none, one = {D};
    CHECK_THROWS(weighted_metrics(none, none));
    CHECK_THROWS(weighted_metrics(one, none));
  }

  TEST_CASE("metrics match a brute-force oracle") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 1 + rng() % 80;
      std::vector<Label> g, p;
      for (std::size_t i = 0; i < n; ++i) {
        g.push_back(kAllLabels[rng() % 3]);
        p.push_back(rng() % 3 ? g.back() : kAllLabels[rng() % 3]);
      }
      const auto m = weighted_metrics(g, p);
      const auto o = oracle(g, p);
      CHECK(m.accuracy == doctest::Approx(o.accuracy).epsilon(1e-12));
      CHECK(m.precision == doctest::Approx(o.precision).epsilon(1e-12));
      CHECK(m.recall == doctest::Approx(o.recall).epsilon(1e-12));
      CHECK(m.f1 == doctest::Approx(o.f1).epsilon(1e-12));
      CHECK(m.accuracy == doctest::Approx(m.recall).epsilon(1e-12));
      for (double v : {m.accuracy, m.precision, m.recall, m.f1}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }

  TEST_CASE("region slices cover the test set") {
    std::mt19937_64 rng(5);
    std::vector<Label> g, p;
    for (int i = 0; i < 200; ++i) {
      g.push_back(kAllLabels[rng() % 3]);
      p.push_back(kAllLabels[rng() % 3]);
    }
    const auto preds = to_predictions(g, p);
    const auto rows = rows_for(preds, rng);
    const auto report = evaluate("m", preds, rows);
    std::size_t total = 0;
    for (const auto& s : report.by_region) total += s.support;
    CHECK(total == 200);
    CHECK(report.by_topic.size() == 3);

    std::vector<std::string> tags(preds.size(), "a");
    tags[0] = "b";
    const auto slices = slice_report(preds, tags, ternary_classes(), 10);
    REQUIRE(slices.size() == 2);
    CHECK(slices[1].low_support);
    CHECK_FALSE(slices[0].low_support);
  }

  TEST_CASE("seed averaging") {
    std::mt19937_64 rng(9);
    std::vector<Label> g;
    for (int i = 0; i < 60; ++i) g.push_back(kAllLabels[rng() % 3]);
    std::vector<EvalReport> reports;
    std::vector<Prediction> first_preds;
    std::vector<data::DatasetRow> rows;
    for (std::uint64_t seed : {42u, 62u, 82u}) {
      std::vector<Label> p;
      for (auto l : g) p.push_back(rng() % 2 ? l : kAllLabels[rng() % 3]);
      const auto preds = to_predictions(g, p, seed);
      if (rows.empty()) rows = rows_for(preds, rng);
      reports.push_back(evaluate("m", preds, rows));
    }
    const auto avg = seed_average(reports);
    double f1 = 0, acc = 0;
    for (const auto& r : reports) {
      f1 += r.overall.f1 / 3.0;
      acc += r.overall.accuracy / 3.0;
    }
    CHECK(avg.overall.f1 == doctest::Approx(f1).epsilon(1e-12));
    CHECK(avg.overall.accuracy == doctest::Approx(acc).epsilon(1e-12));
    CHECK(avg.seeds.size() == 3);

    auto shuffled = reports;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto avg2 = seed_average(shuffled);
    CHECK(avg2.overall.f1 == doctest::Approx(avg.overall.f1).epsilon(1e-12));
    for (std::size_t i = 0; i < avg.by_region.size(); ++i)
      CHECK(avg2.by_region[i].metrics.f1 == doctest::Approx(avg.by_region[i].metrics.f1).epsilon(1e-12));

    const std::vector<EvalReport> same(3, reports[0]);
    CHECK(seed_average(same).overall.f1 == doctest::Approx(reports[0].overall.f1).epsilon(1e-12));
    CHECK_THROWS(seed_average({}));

    auto other = reports;
    other[1].gold_digest = "different";
    CHECK_THROWS(seed_average(other));
  }

  TEST_CASE("report json round trip") {
    std::mt19937_64 rng(2);
    const auto preds = to_predictions({D, R, N, D}, {D, N, N, D});
    const auto report = evaluate("m", preds, rows_for(preds, rng), {1, false});
    CHECK(EvalReport::from_json(report.to_json()).to_json() == report.to_json());
  }

  TEST_CASE("rounding") {
    CHECK(format2(0.635) == "0.64");
    CHECK(format2(0.625) == "0.63");
    CHECK(format2(0.7549) == "0.75");
    CHECK(format2(1.0) == "1.00");
    CHECK(round2(0.835) == doctest::Approx(0.84));
  }

  TEST_CASE("tables are written in both formats") {
    testutil::TempDir dir;
    std::mt19937_64 rng(4);
    const auto preds = to_predictions({D, R, N, D, R, N}, {D, R, R, D, N, N});
    const auto rows = rows_for(preds, rng);
    ReportBundle bundle;
    bundle.dataset = data::count_classes(rows);
    bundle.models.push_back(evaluate("bow", preds, rows, {1, false}));

    const auto md = emit_tables(bundle, TableFormat::Markdown, dir.file("md"));
    CHECK(md.size() == 5);
    for (const auto& p : md) CHECK(std::filesystem::exists(p));
    const auto table2 = testutil::read_file(dir.file("md/table2.md"));
    CHECK(table2.find("| bow |") != std::string::npos);
    CHECK(table2.find(format2(bundle.models[0].overall.f1)) != std::string::npos);

    const auto csvs = emit_tables(bundle, TableFormat::Csv, dir.file("csv"));
    CHECK(csvs.size() == 5);
    const auto parsed = parse_csv(testutil::read_file(dir.file("csv/table2.csv")));
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0][0] == "Model");
    CHECK(parsed[1][0] == "bow");
    CHECK(parsed[1][4] == format2(bundle.models[0].overall.f1));

    const auto a1 = parse_csv(testutil::read_file(dir.file("csv/tableA1.csv")));
    CHECK(a1.size() == kNumRegions + 2);
  }

  TEST_CASE("misclassified listing") {
    testutil::TempDir dir;
    std::mt19937_64 rng(4);
    const auto preds = to_predictions({D, R, N}, {D, N, N});
    write_misclassified(dir.file("m.csv"), preds, rows_for(preds, rng));
    const auto parsed = parse_csv(testutil::read_file(dir.file("m.csv")));
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[1][0] == "p1");
  }

  TEST_CASE("ablation keeping every region equals the baseline") {
    std::vector<data::DatasetRow> rows;
    std::mt19937_64 rng(17);
    const std::vector<std::string> cues = {"scroungers leeches", "report shelter closing", "sunny park walk"};
    bench::DatasetSplit split;
    for (int i = 0; i < 120; ++i) {
      data::DatasetRow r;
      r.id = "a" + std::to_string(i);
      r.label = kAllLabels[i % 3];
      r.text = cues[i % 3] + " w" + std::to_string(rng() % 20);
      r.region = kAllRegions[rng() % kNumRegions];
      rows.push_back(r);
      (i < 80 ? split.train_ids : split.test_ids).push_back(r.id);
    }
    bench::BowLinearAdapter adapter({});
    const std::vector<Region> all(kAllRegions.begin(), kAllRegions.end());
    const auto full = region_ablation(adapter, rows, split, {42, 62}, all);
    CHECK(full.ablated_train_size == full.baseline_train_size);
    CHECK(full.ablated.overall.f1 == full.baseline.overall.f1);
    CHECK(full.ablated_predictions.size() == 2);

    const auto dominant = region_ablation(adapter, rows, split, {42, 62}, kDominantRegions, &full.baseline_predictions);
    CHECK(dominant.ablated_train_size < dominant.baseline_train_size);
    CHECK(dominant.baseline.overall.f1 == full.baseline.overall.f1);
    CHECK(AblationResult::from_json(dominant.to_json()).to_json() == dominant.to_json());

    CHECK_THROWS(region_ablation(adapter, rows, split, {42}, {}));
  }

  TEST_CASE("split counts") {
    std::vector<data::DatasetRow> rows(4);
    const std::vector<Label> labels = {D, R, N, N};
    for (int i = 0; i < 4; ++i) {
      rows[i].id = std::to_string(i);
      rows[i].label = labels[i];
    }
    bench::DatasetSplit s{{"0", "1"}, {"2", "3"}, {}};
    const auto c = split_counts(rows, s);
    CHECK(c.train == std::array<std::size_t, 3>{1, 1, 0});
    CHECK(c.test == std::array<std::size_t, 3>{0, 0, 2});
  }
}
