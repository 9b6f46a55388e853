#include "aporo/eval/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <fmt/format.h>

#include "aporo/common/csv.hpp"
#include "aporo/common/error.hpp"

namespace aporo::eval {

namespace {

nlohmann::json predictions_json(const std::vector<std::vector<bench::Prediction>>& runs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& run : runs) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& p : run) r.push_back({p.id, p.gold, p.pred, p.seed, p.parse_failure});
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::vector<bench::Prediction>> predictions_from_json(const nlohmann::json& j) {
  std::vector<std::vector<bench::Prediction>> out;
  for (const auto& run : j) {
    std::vector<bench::Prediction> r;
    for (const auto& p : run) {
      r.push_back({p.at(0).get<std::string>(), p.at(1).get<std::string>(), p.at(2).get<std::string>(),
                   p.at(3).get<std::uint64_t>(), p.at(4).get<bool>()});
    }
    out.push_back(std::move(r));
  }
  return out;
}

EvalReport score_runs(const std::string& model_id, const std::vector<std::vector<bench::Prediction>>& runs,
                      const std::vector<data::DatasetRow>& rows, std::size_t min_support) {
  std::vector<EvalReport> per_seed;
  for (const auto& run : runs) per_seed.push_back(evaluate(model_id, run, rows, {min_support, false}));
  return seed_average(per_seed);
}

}  // namespace

nlohmann::json AblationResult::to_json() const {
  nlohmann::json k = nlohmann::json::array();
  for (Region r : kept) k.push_back(std::string(to_string(r)));
  return {{"kept", k},
          {"baseline_train_size", baseline_train_size},
          {"ablated_train_size", ablated_train_size},
          {"baseline", baseline.to_json()},
          {"ablated", ablated.to_json()},
          {"baseline_predictions", predictions_json(baseline_predictions)},
          {"ablated_predictions", predictions_json(ablated_predictions)}};
}

AblationResult AblationResult::from_json(const nlohmann::json& j) {
  AblationResult a;
  for (const auto& r : j.at("kept")) {
    const auto region = region_from_string(r.get<std::string>());
    if (!region) throw ParseError("unknown region " + r.dump());
    a.kept.push_back(*region);
  }
  a.baseline_train_size = j.at("baseline_train_size").get<std::size_t>();
  a.ablated_train_size = j.at("ablated_train_size").get<std::size_t>();
  a.baseline = EvalReport::from_json(j.at("baseline"));
  a.ablated = EvalReport::from_json(j.at("ablated"));
  a.baseline_predictions = predictions_from_json(j.at("baseline_predictions"));
  a.ablated_predictions = predictions_from_json(j.at("ablated_predictions"));
  return a;
}

AblationResult region_ablation(const bench::FinetuneAdapter& adapter, const std::vector<data::DatasetRow>& rows,
                               const bench::DatasetSplit& split, const std::vector<std::uint64_t>& seeds,
                               const std::vector<Region>& kept,
                               const std::vector<std::vector<bench::Prediction>>* baseline, std::size_t min_support) {
  if (kept.empty()) throw ContractViolation("no regions kept");
  AblationResult a;
  a.kept = kept;
  std::unordered_map<std::string, const data::DatasetRow*> by_id;
  for (const auto& r : rows) by_id.emplace(r.id, &r);
  for (const auto& id : split.train_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ContractViolation("split id '" + id + "' is not in the dataset");
    const auto& r = *it->second;
    if (!r.region) throw ContractViolation("row '" + id + "' has no region");
    ++a.baseline_train_size;
    if (std::find(kept.begin(), kept.end(), *r.region) != kept.end()) ++a.ablated_train_size;
  }
  if (a.ablated_train_size == 0) throw ContractViolation("no training rows in the kept regions");

  bench::TrainRunOptions opts;
  opts.seeds = seeds;
  if (baseline) {
    if (baseline->size() != seeds.size()) throw ContractViolation("baseline has a different number of seeds");
    a.baseline_predictions = *baseline;
  } else {
    a.baseline_predictions = bench::train_and_predict(adapter, rows, split, opts);
  }
  opts.train_regions = kept;
  a.ablated_predictions = bench::train_and_predict(adapter, rows, split, opts);
  a.baseline = score_runs(adapter.id(), a.baseline_predictions, rows, min_support);
  a.ablated = score_runs(adapter.id() + "+region-ablation", a.ablated_predictions, rows, min_support);
  return a;
}

SplitCounts split_counts(const std::vector<data::DatasetRow>& rows, const bench::DatasetSplit& split) {
  std::unordered_map<std::string, Label> labels;
  for (const auto& r : rows) labels.emplace(r.id, r.label);
  SplitCounts c;
  for (const auto& id : split.train_ids) ++c.train[index_of(labels.at(id))];
  for (const auto& id : split.test_ids) ++c.test[index_of(labels.at(id))];
  return c;
}

nlohmann::json ReportBundle::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  if (split) j["split"] = {{"train", split->train}, {"test", split->test}};
  if (dataset) {
    nlohmann::json regions = nlohmann::json::object();
    for (Region r : kAllRegions) regions[std::string(to_string(r))] = dataset->by_region[index_of(r)];
    j["dataset"] = {{"by_label", dataset->by_label}, {"by_region", regions}, {"total", dataset->total},
                    {"without_region", dataset->without_region}};
  }
  j["models"] = nlohmann::json::array();
  for (const auto& m : models) j["models"].push_back(m.to_json());
  j["binary_models"] = nlohmann::json::array();
  for (const auto& m : binary_models) j["binary_models"].push_back(m.to_json());
  if (ablation) j["ablation"] = ablation->to_json();
  return j;
}

ReportBundle ReportBundle::from_json(const nlohmann::json& j) {
  try {
    ReportBundle b;
    if (j.contains("split")) {
      SplitCounts s;
      s.train = j["split"].at("train").get<std::array<std::size_t, kNumLabels>>();
      s.test = j["split"].at("test").get<std::array<std::size_t, kNumLabels>>();
      b.split = s;
    }
    if (j.contains("dataset")) {
      data::ClassCounts c;
      c.by_label = j["dataset"].at("by_label").get<std::array<std::size_t, kNumLabels>>();
      for (Region r : kAllRegions) {
        c.by_region[index_of(r)] =
            j["dataset"].at("by_region").at(std::string(to_string(r))).get<std::array<std::size_t, kNumLabels>>();
      }
      c.total = j["dataset"].at("total").get<std::size_t>();
      c.without_region = j["dataset"].value("without_region", std::size_t{0});
      b.dataset = c;
    }
    for (const auto& m : j.value("models", nlohmann::json::array())) b.models.push_back(EvalReport::from_json(m));
    for (const auto& m : j.value("binary_models", nlohmann::json::array())) b.binary_models.push_back(EvalReport::from_json(m));
    if (j.contains("ablation")) b.ablation = AblationResult::from_json(j["ablation"]);
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report bundle: ") + e.what());
  }
}

double round2(double x) { return std::floor(x * 100.0 + 0.5 + 1e-9) / 100.0; }

std::string format2(double x) { return fmt::format("{:.2f}", round2(x)); }

namespace {

using Table = std::vector<std::vector<std::string>>;

void write_table(const std::string& path, const Table& t, TableFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  if (format == TableFormat::Csv) {
    for (const auto& row : t) csv::write_row(out, row);
    return;
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << "|";
    for (const auto& cell : t[i]) out << ' ' << cell << " |";
    out << '\n';
    if (i == 0) {
      out << "|";
      for (std::size_t c = 0; c < t[0].size(); ++c) out << (c == 0 ? " --- |" : " ---: |");
      out << '\n';
    }
  }
}

std::string total_of(const std::array<std::size_t, kNumLabels>& a) { return std::to_string(a[0] + a[1] + a[2]); }

const SliceRow* find_slice(const std::vector<SliceRow>& rows, std::string_view name) {
  for (const auto& r : rows) {
    if (r.slice == name) return &r;
  }
  return nullptr;
}

std::string class_f1(const Metrics& m, const std::string& cls) {
  for (const auto& c : m.per_class) {
    if (c.name == cls) return format2(c.f1);
  }
  return "";
}

}  // namespace

std::vector<std::string> emit_tables(const ReportBundle& b, TableFormat format, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string ext = format == TableFormat::Csv ? ".csv" : ".md";
  auto path = [&](const char* name) { return (std::filesystem::path(dir) / (std::string(name) + ext)).string(); };
  std::vector<std::string> written;

  Table t1{{"Split", "Direct", "Reporting", "None", "Total"}};
  if (b.split) {
    const auto& s = *b.split;
    t1.push_back({"Train", std::to_string(s.train[0]), std::to_string(s.train[1]), std::to_string(s.train[2]), total_of(s.train)});
    t1.push_back({"Test", std::to_string(s.test[0]), std::to_string(s.test[1]), std::to_string(s.test[2]), total_of(s.test)});
  }
  write_table(path("table1"), t1, format);
  written.push_back(path("table1"));

  Table t2{{"Model", "Accuracy", "Precision", "Recall", "F1", "Parse failures"}};
  for (const auto& m : b.models) {
    t2.push_back({m.model_id, format2(m.overall.accuracy), format2(m.overall.precision), format2(m.overall.recall),
                  format2(m.overall.f1), std::to_string(m.parse_failures)});
  }
  write_table(path("table2"), t2, format);
  written.push_back(path("table2"));

  Table a1{{"Region", "Direct", "Reporting", "None", "Total"}};
  if (b.dataset) {
    for (Region r : kTableRegionOrder) {
      const auto& c = b.dataset->by_region[index_of(r)];
      a1.push_back({std::string(display_name(r)), std::to_string(c[0]), std::to_string(c[1]), std::to_string(c[2]), total_of(c)});
    }
    const auto& c = b.dataset->by_label;
    a1.push_back({"Total", std::to_string(c[0]), std::to_string(c[1]), std::to_string(c[2]), total_of(c)});
  }
  write_table(path("tableA1"), a1, format);
  written.push_back(path("tableA1"));

  Table a2{{"Model", "Precision", "Recall", "F1", "Accuracy"}};
  for (const auto& m : b.binary_models) {
    a2.push_back({m.model_id, format2(m.overall.precision), format2(m.overall.recall), format2(m.overall.f1),
                  format2(m.overall.accuracy)});
  }
  write_table(path("tableA2"), a2, format);
  written.push_back(path("tableA2"));

  Table a3{{"Region", "Direct", "Reporting", "None", "Overall (ablated)", "Overall (full)"}};
  if (b.ablation) {
    const auto& ab = *b.ablation;
    for (Region r : kTableRegionOrder) {
      const std::string name(display_name(r));
      const SliceRow* s = find_slice(ab.ablated.by_region, name);
      const SliceRow* f = find_slice(ab.baseline.by_region, name);
      if (!s || !f) {
        a3.push_back({name, "", "", "", "", ""});
        continue;
      }
      a3.push_back({name, class_f1(s->metrics, "Direct"), class_f1(s->metrics, "Reporting"), class_f1(s->metrics, "None"),
                    format2(s->metrics.f1), format2(f->metrics.f1)});
    }
    a3.push_back({"All", class_f1(ab.ablated.overall, "Direct"), class_f1(ab.ablated.overall, "Reporting"),
                  class_f1(ab.ablated.overall, "None"), format2(ab.ablated.overall.f1), format2(ab.baseline.overall.f1)});
  }
  write_table(path("tableA3"), a3, format);
  written.push_back(path("tableA3"));
  return written;
}

void write_misclassified(const std::string& path, const std::vector<bench::Prediction>& predictions,
                         const std::vector<data::DatasetRow>& rows) {
  std::unordered_map<std::string, const data::DatasetRow*> by_id;
  for (const auto& r : rows) by_id.emplace(r.id, &r);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  csv::write_row(out, {"id", "region", "gold", "pred", "text"});
  for (const auto& p : predictions) {
    if (p.gold == p.pred) continue;
    const auto it = by_id.find(p.id);
    const data::DatasetRow* r = it == by_id.end() ? nullptr : it->second;
    csv::write_row(out, {p.id, r && r->region ? std::string(display_name(*r->region)) : "", p.gold, p.pred,
                         r ? r->text : ""});
  }
}

}  // namespace aporo::eval
