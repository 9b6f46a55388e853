#include "aporo/eval/metrics.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "aporo/common/error.hpp"
#include "aporo/common/hash.hpp"

namespace aporo::eval {

const std::vector<std::string>& ternary_classes() {
  static const std::vector<std::string> names = {"Direct", "Reporting", "None"};
  return names;
}

const std::vector<std::string>& binary_classes() {
  static const std::vector<std::string> names = {"Toxic", "NonToxic"};
  return names;
}

Metrics weighted_metrics(std::span<const int> gold, std::span<const int> pred, const std::vector<std::string>& classes) {
  if (gold.empty()) throw ContractViolation("cannot score empty label vectors");
  if (gold.size() != pred.size()) throw ContractViolation("gold and pred differ in length");
  const std::size_t k = classes.size();
  std::vector<std::size_t> tp(k, 0), support(k, 0), predicted(k, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || static_cast<std::size_t>(gold[i]) >= k || pred[i] < 0 || static_cast<std::size_t>(pred[i]) >= k) {
      throw ContractViolation("class index out of range");
    }
    ++support[static_cast<std::size_t>(gold[i])];
    ++predicted[static_cast<std::size_t>(pred[i])];
    if (gold[i] == pred[i]) {
      ++tp[static_cast<std::size_t>(gold[i])];
      ++correct;
    }
  }
  Metrics m;
  m.n = gold.size();
  const auto n = static_cast<double>(m.n);
  m.accuracy = static_cast<double>(correct) / n;
  for (std::size_t c = 0; c < k; ++c) {
    ClassMetrics cm;
    cm.name = classes[c];
    cm.support = support[c];
    cm.predicted = predicted[c];
    cm.precision_undefined = predicted[c] == 0;
    cm.recall_undefined = support[c] == 0;
    cm.precision = cm.precision_undefined ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(predicted[c]);
    cm.recall = cm.recall_undefined ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(support[c]);
    cm.f1 = cm.precision + cm.recall > 0 ? 2 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
    const double w = static_cast<double>(support[c]) / n;
    m.precision += w * cm.precision;
    m.recall += w * cm.recall;
    m.f1 += w * cm.f1;
    m.per_class.push_back(std::move(cm));
  }
  return m;
}

Metrics weighted_metrics(std::span<const Label> gold, std::span<const Label> pred) {
  std::vector<int> g, p;
  for (Label l : gold) g.push_back(static_cast<int>(index_of(l)));
  for (Label l : pred) p.push_back(static_cast<int>(index_of(l)));
  return weighted_metrics(g, p, ternary_classes());
}

namespace {

int class_index(const std::vector<std::string>& classes, const std::string& name) {
  const auto it = std::find(classes.begin(), classes.end(), name);
  if (it == classes.end()) throw ContractViolation("unknown class '" + name + "'");
  return static_cast<int>(it - classes.begin());
}

}  // namespace

Metrics weighted_metrics(const std::vector<bench::Prediction>& predictions, const std::vector<std::string>& classes) {
  std::vector<int> g, p;
  for (const auto& x : predictions) {
    g.push_back(class_index(classes, x.gold));
    p.push_back(class_index(classes, x.pred));
  }
  return weighted_metrics(g, p, classes);
}

nlohmann::json Metrics::to_json() const {
  nlohmann::json pc = nlohmann::json::array();
  for (const auto& c : per_class) {
    pc.push_back({{"class", c.name},
                  {"precision", c.precision},
                  {"recall", c.recall},
                  {"f1", c.f1},
                  {"support", c.support},
                  {"predicted", c.predicted},
                  {"precision_undefined", c.precision_undefined},
                  {"recall_undefined", c.recall_undefined}});
  }
  return {{"n", n}, {"accuracy", accuracy}, {"precision", precision}, {"recall", recall}, {"f1", f1}, {"per_class", pc}};
}

Metrics Metrics::from_json(const nlohmann::json& j) {
  Metrics m;
  m.n = j.at("n").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  for (const auto& c : j.at("per_class")) {
    ClassMetrics cm;
    cm.name = c.at("class").get<std::string>();
    cm.precision = c.at("precision").get<double>();
    cm.recall = c.at("recall").get<double>();
    cm.f1 = c.at("f1").get<double>();
    cm.support = c.at("support").get<std::size_t>();
    cm.predicted = c.at("predicted").get<std::size_t>();
    cm.precision_undefined = c.value("precision_undefined", false);
    cm.recall_undefined = c.value("recall_undefined", false);
    m.per_class.push_back(std::move(cm));
  }
  return m;
}

std::vector<SliceRow> slice_report(const std::vector<bench::Prediction>& predictions,
                                   const std::vector<std::string>& tags, const std::vector<std::string>& classes,
                                   std::size_t min_support) {
  if (tags.size() != predictions.size()) throw ContractViolation("one tag per prediction required");
  std::map<std::string, std::vector<bench::Prediction>> groups;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].empty()) throw ContractViolation("item '" + predictions[i].id + "' has no slice tag");
    groups[tags[i]].push_back(predictions[i]);
  }
  std::vector<SliceRow> rows;
  for (const auto& [tag, preds] : groups) {
    SliceRow r;
    r.slice = tag;
    r.support = preds.size();
    r.low_support = preds.size() < min_support;
    r.metrics = weighted_metrics(preds, classes);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

nlohmann::json slices_json(const std::vector<SliceRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"slice", r.slice}, {"support", r.support}, {"low_support", r.low_support}, {"metrics", r.metrics.to_json()}});
  }
  return out;
}

std::vector<SliceRow> slices_from_json(const nlohmann::json& j) {
  std::vector<SliceRow> rows;
  for (const auto& r : j) {
    rows.push_back({r.at("slice").get<std::string>(), r.at("support").get<std::size_t>(), r.at("low_support").get<bool>(),
                    Metrics::from_json(r.at("metrics"))});
  }
  return rows;
}

std::string gold_digest(const std::vector<bench::Prediction>& preds) {
  std::vector<std::string> pairs;
  for (const auto& p : preds) pairs.push_back(p.id + "\t" + p.gold);
  std::sort(pairs.begin(), pairs.end());
  std::string joined;
  for (const auto& p : pairs) joined += p + "\n";
  return sha256_hex(joined);
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json sp = nlohmann::json::object();
  for (const auto& [k, s] : spread) sp[k] = {{"min", s.min}, {"max", s.max}};
  return {{"model_id", model_id},         {"label_space", label_space},
          {"seeds", seeds},               {"overall", overall.to_json()},
          {"by_region", slices_json(by_region)}, {"by_topic", slices_json(by_topic)},
          {"parse_failures", parse_failures}, {"gold_digest", gold_digest},
          {"spread", sp}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.model_id = j.at("model_id").get<std::string>();
    r.label_space = j.value("label_space", "ternary");
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.overall = Metrics::from_json(j.at("overall"));
    r.by_region = slices_from_json(j.at("by_region"));
    r.by_topic = slices_from_json(j.at("by_topic"));
    r.parse_failures = j.at("parse_failures").get<std::size_t>();
    r.gold_digest = j.at("gold_digest").get<std::string>();
    const auto spread = j.value("spread", nlohmann::json::object());
    for (const auto& [k, s] : spread.items()) {
      r.spread[k] = {s.at("min").get<double>(), s.at("max").get<double>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("eval report: ") + e.what());
  }
}

EvalReport evaluate(const std::string& model_id, const std::vector<bench::Prediction>& predictions,
                    const std::vector<data::DatasetRow>& rows, const EvaluateOptions& options) {
  const auto& classes = options.binary ? binary_classes() : ternary_classes();
  EvalReport r;
  r.model_id = model_id;
  r.label_space = options.binary ? "binary" : "ternary";
  r.overall = weighted_metrics(predictions, classes);
  r.gold_digest = gold_digest(predictions);
  std::set<std::uint64_t> seeds;
  for (const auto& p : predictions) {
    seeds.insert(p.seed);
    if (p.parse_failure) ++r.parse_failures;
  }
  r.seeds.assign(seeds.begin(), seeds.end());

  std::unordered_map<std::string, const data::DatasetRow*> by_id;
  for (const auto& row : rows) by_id.emplace(row.id, &row);
  std::vector<std::string> region_tags, topic_tags;
  bool have_topics = true;
  for (const auto& p : predictions) {
    const auto it = by_id.find(p.id);
    if (it == by_id.end()) throw ContractViolation("prediction for unknown item '" + p.id + "'");
    if (!it->second->region) throw ContractViolation("item '" + p.id + "' has no region");
    region_tags.emplace_back(display_name(*it->second->region));
    if (it->second->topic_id) {
      topic_tags.push_back(std::to_string(*it->second->topic_id));
    } else {
      have_topics = false;
    }
  }
  r.by_region = slice_report(predictions, region_tags, classes, options.min_support);
  if (have_topics) r.by_topic = slice_report(predictions, topic_tags, classes, options.min_support);
  r.spread["accuracy"] = {r.overall.accuracy, r.overall.accuracy};
  r.spread["precision"] = {r.overall.precision, r.overall.precision};
  r.spread["recall"] = {r.overall.recall, r.overall.recall};
  r.spread["f1"] = {r.overall.f1, r.overall.f1};
  return r;
}

namespace {

double mean_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Metrics average_metrics(const std::vector<const Metrics*>& ms) {
  Metrics out = *ms.front();
  auto avg = [&](auto get) {
    std::vector<double> v;
    for (const auto* m : ms) v.push_back(get(*m));
    return mean_of(std::move(v));
  };
  out.accuracy = avg([](const Metrics& m) { return m.accuracy; });
  out.precision = avg([](const Metrics& m) { return m.precision; });
  out.recall = avg([](const Metrics& m) { return m.recall; });
  out.f1 = avg([](const Metrics& m) { return m.f1; });
  for (std::size_t c = 0; c < out.per_class.size(); ++c) {
    out.per_class[c].precision = avg([&](const Metrics& m) { return m.per_class.at(c).precision; });
    out.per_class[c].recall = avg([&](const Metrics& m) { return m.per_class.at(c).recall; });
    out.per_class[c].f1 = avg([&](const Metrics& m) { return m.per_class.at(c).f1; });
    out.per_class[c].predicted = 0;
    bool p_undef = false, r_undef = false;
    for (const auto* m : ms) {
      p_undef = p_undef || m->per_class.at(c).precision_undefined;
      r_undef = r_undef || m->per_class.at(c).recall_undefined;
    }
    out.per_class[c].precision_undefined = p_undef;
    out.per_class[c].recall_undefined = r_undef;
  }
  return out;
}

std::vector<SliceRow> average_slices(const std::vector<const std::vector<SliceRow>*>& all) {
  std::vector<SliceRow> out = *all.front();
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::vector<const Metrics*> ms;
    for (const auto* rows : all) {
      if (rows->size() != out.size() || rows->at(i).slice != out[i].slice) {
        throw ContractViolation("reports have different slices");
      }
      ms.push_back(&rows->at(i).metrics);
    }
    out[i].metrics = average_metrics(ms);
  }
  return out;
}

}  // namespace

EvalReport seed_average(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ContractViolation("no reports to average");
  for (const auto& r : reports) {
    if (r.gold_digest != reports.front().gold_digest) throw ContractViolation("reports were scored on different gold sets");
    if (r.label_space != reports.front().label_space) throw ContractViolation("reports use different label spaces");
  }
  EvalReport out;
  out.model_id = reports.front().model_id;
  out.label_space = reports.front().label_space;
  out.gold_digest = reports.front().gold_digest;
  std::set<std::uint64_t> seeds;
  std::vector<const Metrics*> overall;
  std::vector<const std::vector<SliceRow>*> regions, topics;
  for (const auto& r : reports) {
    seeds.insert(r.seeds.begin(), r.seeds.end());
    overall.push_back(&r.overall);
    regions.push_back(&r.by_region);
    topics.push_back(&r.by_topic);
    out.parse_failures += r.parse_failures;
  }
  out.seeds.assign(seeds.begin(), seeds.end());
  out.overall = average_metrics(overall);
  out.by_region = average_slices(regions);
  out.by_topic = average_slices(topics);
  for (const auto& key : {"accuracy", "precision", "recall", "f1"}) {
    Spread s{1e300, -1e300};
    for (const auto& r : reports) {
      const auto& sp = r.spread.at(key);
      s.min = std::min(s.min, sp.min);
      s.max = std::max(s.max, sp.max);
    }
    out.spread[key] = s;
  }
  return out;
}

}  // namespace aporo::eval
