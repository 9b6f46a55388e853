#include "aporo/bench/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <fmt/format.h>

#include "aporo/common/csv.hpp"
#include "aporo/common/error.hpp"
#include "aporo/common/text.hpp"

namespace aporo::bench {

std::string preprocess_for_model(std::string_view text) { return text::strip_mentions_and_urls(text); }

namespace {

std::unordered_map<std::string, const data::DatasetRow*> index_rows(const std::vector<data::DatasetRow>& rows) {
  std::unordered_map<std::string, const data::DatasetRow*> by_id;
  for (const auto& r : rows) by_id.emplace(r.id, &r);
  return by_id;
}

const data::DatasetRow& row_for(const std::unordered_map<std::string, const data::DatasetRow*>& by_id,
                                const std::string& id) {
  auto it = by_id.find(id);
  if (it == by_id.end()) throw ContractViolation("split id '" + id + "' is not in the dataset");
  return *it->second;
}

}  // namespace

std::vector<std::vector<Prediction>> train_and_predict(const FinetuneAdapter& adapter,
                                                       const std::vector<data::DatasetRow>& rows,
                                                       const DatasetSplit& split, const TrainRunOptions& options) {
  if (options.seeds.empty()) throw ContractViolation("no seeds given");
  const auto by_id = index_rows(rows);
  std::vector<TrainExample> train;
  for (const auto& id : split.train_ids) {
    const auto& r = row_for(by_id, id);
    if (!options.train_regions.empty()) {
      if (!r.region) throw ContractViolation("row '" + id + "' has no region");
      if (std::find(options.train_regions.begin(), options.train_regions.end(), *r.region) == options.train_regions.end()) {
        continue;
      }
    }
    train.push_back({r.id, preprocess_for_model(r.text), r.label});
  }
  if (train.empty()) throw ContractViolation("training set is empty after region filtering");
  std::vector<std::string> test_texts;
  std::vector<const data::DatasetRow*> test_rows;
  for (const auto& id : split.test_ids) {
    const auto& r = row_for(by_id, id);
    test_rows.push_back(&r);
    test_texts.push_back(preprocess_for_model(r.text));
  }

  std::vector<std::vector<Prediction>> out;
  for (std::uint64_t seed : options.seeds) {
    const auto model = adapter.train(train, seed);
    if (!options.artifact_dir.empty()) {
      model->save((std::filesystem::path(options.artifact_dir) / fmt::format("{}-seed{}", adapter.id(), seed)).string());
    }
    const auto labels = model->predict(test_texts);
    if (labels.size() != test_rows.size()) throw Error("adapter returned the wrong number of predictions");
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      preds.push_back({test_rows[i]->id, std::string(to_string(test_rows[i]->label)), std::string(to_string(labels[i])),
                       seed, false});
    }
    out.push_back(std::move(preds));
  }
  return out;
}

std::vector<Prediction> prompt_eval(const GenerativeAdapter& adapter, const PromptSpec& spec,
                                    const std::vector<data::DatasetRow>& rows, const std::vector<std::string>& ids,
                                    std::uint64_t seed, bool binary) {
  const auto by_id = index_rows(rows);
  std::vector<PromptRequest> prompts;
  std::vector<const data::DatasetRow*> items;
  for (const auto& id : ids) {
    const auto& r = row_for(by_id, id);
    const std::string input = preprocess_for_model(r.text);
    prompts.push_back({build_prompt(spec, input), input});
    items.push_back(&r);
  }
  const auto raw = adapter.generate(prompts, spec.decoding, seed);
  if (raw.size() != prompts.size()) throw Error("adapter returned the wrong number of generations");
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Prediction p{items[i]->id, "", "", seed, false};
    if (binary) {
      p.gold = std::string(to_string(collapse_binary(items[i]->label)));
      const auto parsed = parse_binary_label(raw[i]);
      p.parse_failure = !parsed;
      p.pred = std::string(to_string(parsed.value_or(BinaryLabel::NonToxic)));
    } else {
      p.gold = std::string(to_string(items[i]->label));
      const auto parsed = parse_label(raw[i]);
      p.parse_failure = parsed.failed();
      p.pred = std::string(to_string(parsed.scored()));
    }
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions(const std::string& path, const std::vector<Prediction>& predictions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  csv::write_row(out, {"id", "gold", "pred", "seed", "parse_flag"});
  for (const auto& p : predictions) {
    csv::write_row(out, {p.id, p.gold, p.pred, std::to_string(p.seed), p.parse_failure ? "1" : "0"});
  }
}

std::vector<Prediction> read_predictions(const std::string& path) {
  if (!std::ifstream(path)) throw MissingInput("cannot open predictions " + path);
  const auto t = csv::read_table(path);
  constexpr auto npos = static_cast<std::size_t>(-1);
  const auto c_id = t.column({"id"}), c_gold = t.column({"gold"}), c_pred = t.column({"pred"}),
             c_seed = t.column({"seed"}), c_flag = t.column({"parse_flag"});
  if (c_id == npos || c_gold == npos || c_pred == npos || c_seed == npos || c_flag == npos) {
    throw ParseError("predictions file " + path + " needs id, gold, pred, seed, parse_flag", 1);
  }
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    if (r.size() <= std::max({c_id, c_gold, c_pred, c_seed, c_flag})) throw ParseError("short row", t.lines[i]);
    try {
      out.push_back({r[c_id], r[c_gold], r[c_pred], std::stoull(r[c_seed]), r[c_flag] == "1"});
    } catch (const std::logic_error&) {
      throw ParseError("bad seed '" + r[c_seed] + "'", t.lines[i]);
    }
  }
  return out;
}

}  // namespace aporo::bench
