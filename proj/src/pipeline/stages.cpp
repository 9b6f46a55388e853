#include "aporo/pipeline/stages.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "aporo/annotate/server.hpp"
#include "aporo/annotate/store.hpp"
#include "aporo/bench/adapters.hpp"
#include "aporo/bench/harness.hpp"
#include "aporo/bench/prompt.hpp"
#include "aporo/bench/split.hpp"
#include "aporo/common/hash.hpp"
#include "aporo/common/text.hpp"
#include "aporo/data/dataset.hpp"
#include "aporo/eval/metrics.hpp"
#include "aporo/eval/report.hpp"
#include "aporo/geo/gazetteer.hpp"
#include "aporo/ingest/ingest.hpp"
#include "aporo/sample/sampler.hpp"
#include "aporo/taxonomy/taxonomy.hpp"
#include "aporo/topics/embedding.hpp"
#include "aporo/topics/topic_model.hpp"

#ifndef APORO_VERSION
#define APORO_VERSION "dev"
#endif

namespace aporo::pipeline {

namespace fs = std::filesystem;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Ingest: return "ingest";
    case Stage::Geolocate: return "geolocate";
    case Stage::Topics: return "topics";
    case Stage::Sample: return "sample";
    case Stage::AnnotateServe: return "annotate-serve";
    case Stage::Split: return "split";
    case Stage::Train: return "train";
    case Stage::PromptEval: return "prompt-eval";
    case Stage::Evaluate: return "evaluate";
    case Stage::Ablate: return "ablate";
    case Stage::Report: return "report";
  }
  return "?";
}

std::optional<Stage> stage_from_string(std::string_view name) {
  for (Stage s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

nlohmann::json RunManifest::to_json() const {
  return {{"stage", stage},
          {"config_hash", config_hash},
          {"inputs", inputs},
          {"outputs", outputs},
          {"seeds", seeds},
          {"tool_version", tool_version},
          {"started_at", started_at},
          {"finished_at", finished_at},
          {"parameters", parameters},
          {"warnings", warnings}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.stage = j.at("stage").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    m.parameters = j.value("parameters", nlohmann::json::object());
    m.warnings = j.value("warnings", std::vector<std::string>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

std::string manifest_path(const Config& config, Stage stage) {
  return (fs::path(config.workdir()) / "manifests" / (std::string(to_string(stage)) + ".json")).string();
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("manifest not found: " + path);
  try {
    return RunManifest::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const MissingInput*>(&e)) return 2;
  if (dynamic_cast<const ConfigError*>(&e)) return 3;
  return 1;
}

namespace {

std::string now_utc() {
  return format_timestamp(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
}

/// Stage bookkeeping shared by every stage body.
class StageContext {
 public:
  StageContext(Stage stage, const Config& config, std::ostream* echo) : config(config), echo_(echo) {
    manifest.stage = std::string(to_string(stage));
    manifest.config_hash = config.hash();
    manifest.tool_version = APORO_VERSION;
    manifest.started_at = now_utc();
    fs::create_directories(fs::path(config.workdir()) / "logs");
    log_.open(fs::path(config.workdir()) / "logs" / (manifest.stage + ".log"), std::ios::binary | std::ios::trunc);
  }

  const Config& config;
  RunManifest manifest;

  void info(const std::string& message) {
    const auto line = fmt::format("[{}] {}", manifest.stage, message);
    log_ << line << '\n';
    log_.flush();
    if (echo_) *echo_ << line << '\n';
  }

  void warn(const std::string& message) {
    manifest.warnings.push_back(message);
    info("warning: " + message);
  }

  /// Checks existence and records the digest.
  std::string input(const std::string& path) {
    if (path.empty()) throw ConfigError({manifest.stage + ": required input path is not set"});
    if (!fs::is_regular_file(path)) throw MissingInput(manifest.stage + ": input not found: " + path);
    manifest.inputs[display(path)] = sha256_file(path);
    return path;
  }

  /// Creates the parent directory.
  std::string output(const std::string& path) {
    if (path.empty()) throw ConfigError({manifest.stage + ": output path is not set"});
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    outputs_.push_back(path);
    return path;
  }

  std::string work_path(const std::string& relative) {
    return output((fs::path(config.workdir()) / relative).string());
  }

  void finish() {
    for (const auto& p : outputs_) {
      if (fs::is_regular_file(p)) manifest.outputs[display(p)] = sha256_file(p);
    }
    manifest.finished_at = now_utc();
  }

  void fail(const std::exception& e) { info(std::string("failed: ") + e.what()); }

 private:
  std::string display(const std::string& path) const {
    const auto rel = fs::path(path).lexically_normal().lexically_relative(fs::path(config.workdir()).lexically_normal());
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return fs::path(path).lexically_normal().generic_string();
  }

  std::ostream* echo_;
  std::ofstream log_;
  std::vector<std::string> outputs_;
};

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + ": " + e.what(), n);
    }
  }
  return out;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (!text::is_alnum(c) && c != '-' && c != '_' && c != '.') c = '-';
  }
  return s;
}

std::vector<std::uint64_t> seeds_of(const Config& c) { return parse_seed_list(c.get_list("bench", "seeds")); }

// ---------------------------------------------------------------------------

void stage_ingest(StageContext& ctx) {
  const auto& c = ctx.config;
  const auto in = ctx.input(c.get_path("ingest", "input"));
  ingest::LoadOptions lo;
  lo.fail_fast = c.get_bool("ingest", "fail_fast");
  auto loaded = ingest::load_records(in, ingest::format_from_string(c.get_string("ingest", "format")), lo);
  for (const auto& w : loaded.warnings) ctx.warn(fmt::format("line {}: {}", w.line, w.message));

  ingest::FilterOptions fo;
  fo.max_hashtags = static_cast<std::size_t>(c.get_int("ingest", "max_hashtags"));
  fo.bot_rule = c.get_string("ingest", "bot_rule") == "token" ? ingest::BotRule::Token : ingest::BotRule::Substring;
  const std::size_t loaded_count = loaded.records.size();
  auto filtered = ingest::filter_records(std::move(loaded.records), fo);
  ingest::annotate_terms(filtered.kept, ingest::QueryTermSet::defaults(), c.get_string("ingest", "placeholder"));

  ingest::write_records_jsonl(ctx.output(c.get_path("ingest", "output")), filtered.kept);
  auto rejections = filtered.rejections.to_json();
  rejections["loaded"] = loaded_count;
  rejections["skipped_rows"] = loaded.warnings.size();
  rejections["kept"] = filtered.kept.size();
  write_json(ctx.work_path("ingest/rejections.json"), rejections);
  ctx.manifest.parameters = {{"ingest", c.to_json()["ingest"]}, {"counts", rejections}};
  ctx.info(fmt::format("kept {} of {} records", filtered.kept.size(), loaded_count));
}

std::vector<ingest::PostRecord> read_records(const std::string& path) {
  std::vector<ingest::PostRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(ingest::from_json(j));
  return out;
}

void stage_geolocate(StageContext& ctx) {
  const auto& c = ctx.config;
  auto records = read_records(ctx.input(c.get_path("geo", "input")));
  const auto gaz = geo::Gazetteer::load(ctx.input(c.get_path("geo", "gazetteer")));
  geo::resolve_all(records, gaz);
  ingest::write_records_jsonl(ctx.output(c.get_path("geo", "output")), records);
  const auto dist = geo::region_distribution(records).to_json();
  write_json(ctx.work_path("geolocate/regions.json"), dist);
  ctx.manifest.parameters = {{"geo", c.to_json()["geo"]}, {"distribution", dist}};
  ctx.info(fmt::format("resolved {} records", records.size()));
}

/// One post in the tagged pool or the annotation sample.
nlohmann::json pool_json(const ingest::PostRecord& r, int topic_id, int month) {
  return {{"id", r.id},
          {"text", r.text},
          {"created_at", format_timestamp(r.created_at)},
          {"region", std::string(to_string(r.region.value_or(Region::Other)))},
          {"topic_id", topic_id},
          {"month", month}};
}

void stage_topics(StageContext& ctx) {
  const auto& c = ctx.config;
  const auto records = read_records(ctx.input(c.get_path("topics", "input")));
  std::vector<std::string> ids, texts;
  for (const auto& r : records) {
    ids.push_back(r.id);
    texts.push_back(r.masked_text.empty() ? r.text : r.masked_text);
  }

  const topics::HashingEncoder encoder(static_cast<std::size_t>(c.get_int("topics", "encoder_dim")));
  const auto cache_path = c.get_path("topics", "embeddings");
  topics::EmbeddingMatrix emb;
  bool cached = false;
  if (fs::is_regular_file(cache_path)) {
    const auto cache = topics::load_embedding_cache(cache_path);
    bool complete = cache.encoder_id() == encoder.id();
    for (std::size_t i = 0; complete && i < ids.size(); ++i) complete = cache.contains(ids[i]);
    if (complete) {
      ctx.input(cache_path);
      emb = topics::EmbeddingMatrix(cache.encoder_id(), cache.dim());
      for (const auto& id : ids) emb.add(id, cache.row(cache.index_of(id)));
      cached = true;
      ctx.info("using cached embeddings " + cache_path);
    } else {
      ctx.warn("embedding cache " + cache_path + " is stale and will be rebuilt");
    }
  }
  if (!cached) {
    emb = topics::embed_documents(ids, texts, encoder);
    topics::save_embedding_cache(ctx.output(cache_path), emb);
  }

  topics::TopicModelOptions opts;
  opts.cluster.min_cluster_size = static_cast<std::size_t>(c.get_int("topics", "min_cluster_size"));
  opts.cluster.min_samples = static_cast<std::size_t>(c.get_int("topics", "min_samples"));
  opts.cluster.reduction = c.get_string("topics", "reduction") == "none" ? topics::Reduction::None : topics::Reduction::Pca;
  opts.cluster.n_components = static_cast<std::size_t>(c.get_int("topics", "n_components"));
  opts.ctfidf.min_df = c.get_double("topics", "min_df");
  opts.ctfidf.k = static_cast<std::size_t>(c.get_int("topics", "k"));
  opts.placeholder = c.get_string("ingest", "placeholder");
  opts.n_representatives = static_cast<std::size_t>(c.get_int("topics", "n_representatives"));
  std::vector<std::string> warnings;
  const auto model = topics::build_topic_model(emb, texts, opts, &warnings);
  for (const auto& w : warnings) ctx.warn(w);
  topics::save_topic_model(ctx.work_path("topics/topic_model.json"), model);

  topics::TopicSelection selection;
  const auto selection_path = c.get_path("topics", "selection");
  if (selection_path.empty()) {
    for (const auto& t : model.topics) selection.selected_topic_ids.push_back(t.topic_id);
  } else {
    selection = topics::select_topics(model, ctx.input(selection_path));
    for (const auto& w : selection.warnings) ctx.warn(w);
  }
  write_json(ctx.work_path("topics/selection.json"), selection.to_json());

  const std::set<int> selected(selection.selected_topic_ids.begin(), selection.selected_topic_ids.end());
  const auto assignment = model.assignments();
  const int n_months = static_cast<int>(c.get_int("sample", "n_months"));
  std::ofstream out(ctx.output(c.get_path("topics", "output")), std::ios::binary);
  std::size_t pooled = 0, out_of_window = 0;
  for (const auto& r : records) {
    const int topic = assignment.at(r.id);
    if (!selected.contains(topic)) continue;
    const auto month = sample::collection_month(r.created_at, sample::kWindowStart, n_months);
    if (!month) {
      ++out_of_window;
      continue;
    }
    out << pool_json(r, topic, *month).dump() << '\n';
    ++pooled;
  }
  ctx.manifest.parameters = {{"topics", c.to_json()["topics"]},
                             {"model", model.parameters},
                             {"n_topics", model.topics.size()},
                             {"n_outliers", model.outlier_ids.size()},
                             {"selected", selection.selected_topic_ids},
                             {"pooled", pooled},
                             {"out_of_window", out_of_window},
                             {"embeddings_cached", cached}};
  ctx.info(fmt::format("{} topics, {} outliers, {} posts pooled", model.topics.size(), model.outlier_ids.size(), pooled));
}

void stage_sample(StageContext& ctx) {
  const auto& c = ctx.config;
  const auto pool_rows = read_jsonl(ctx.input(c.get_path("sample", "input")));
  std::vector<sample::PoolItem> pool;
  std::vector<int> topic_ids;
  for (const auto& j : pool_rows) {
    const auto region = region_from_string(j.at("region").get<std::string>());
    if (!region) throw ParseError("pool: unknown region " + j.at("region").dump());
    pool.push_back({j.at("id").get<std::string>(), j.at("topic_id").get<int>(), *region, j.at("month").get<int>()});
    topic_ids.push_back(pool.back().topic_id);
  }
  std::sort(topic_ids.begin(), topic_ids.end());
  topic_ids.erase(std::unique(topic_ids.begin(), topic_ids.end()), topic_ids.end());

  std::map<int, std::size_t> quotas;
  const auto quota_path = c.get_path("sample", "quotas");
  if (quota_path.empty()) {
    for (int t : topic_ids) quotas[t] = static_cast<std::size_t>(c.get_int("sample", "default_quota"));
  } else {
    quotas = sample::load_quotas(ctx.input(quota_path), topic_ids);
  }
  const auto seed = static_cast<std::uint64_t>(c.get_int("sample", "seed"));
  ctx.manifest.seeds = {seed};
  sample::SampleOptions so;
  so.n_months = static_cast<int>(c.get_int("sample", "n_months"));
  const auto manifest = sample::stratified_sample(pool, quotas, seed, so);
  const auto report = sample::verify_manifest(manifest, pool);
  if (!report.ok) {
    std::string msg = "sample manifest failed verification:";
    for (const auto& v : report.violations) msg += "\n  " + v;
    throw Error(msg);
  }
  for (const auto& [topic, deficit] : manifest.unfilled) {
    if (deficit) ctx.warn(fmt::format("topic {}: {} items short of quota", topic, deficit));
  }
  write_json(ctx.output(c.get_path("sample", "output")), manifest.to_json());
  write_json(ctx.work_path("sample/verify.json"), report.to_json());

  const std::set<std::string> drawn(manifest.sampled_ids.begin(), manifest.sampled_ids.end());
  std::ofstream out(ctx.work_path("sample/sample.jsonl"), std::ios::binary);
  for (const auto& j : pool_rows) {
    if (drawn.contains(j.at("id").get<std::string>())) out << j.dump() << '\n';
  }
  ctx.manifest.parameters = {{"sample", c.to_json()["sample"]},
                             {"pool_size", pool.size()},
                             {"sampled", manifest.sampled_ids.size()},
                             {"shortfalls", manifest.shortfalls.size()}};
  ctx.info(fmt::format("sampled {} of {} pooled posts", manifest.sampled_ids.size(), pool.size()));
}

annotate::Item item_from_json(const nlohmann::json& j) {
  annotate::Item item;
  item.id = j.at("id").get<std::string>();
  item.text = j.at("text").get<std::string>();
  if (j.contains("region")) item.region = region_from_string(j["region"].get<std::string>());
  if (j.contains("topic_id")) item.topic_id = j["topic_id"].get<int>();
  if (j.contains("month")) item.month = j["month"].get<int>();
  if (j.contains("created_at")) item.created_at = parse_timestamp(j["created_at"].get<std::string>());
  return item;
}

std::atomic<annotate::HttpServer*> g_server{nullptr};

extern "C" void stop_server(int) {
  if (auto* s = g_server.load()) s->stop();
}

void stage_annotate(StageContext& ctx) {
  const auto& c = ctx.config;
  const auto items_json = read_jsonl(ctx.input(c.get_path("annotate", "input")));
  const bool replay = c.get_string("annotate", "mode") == "replay";
  const auto log_path = ctx.work_path("annotate/log.jsonl");
  if (replay) fs::remove(log_path);

  // Replays are stamped with a fixed time so their logs are reproducible.
  annotate::AnnotationStore::Clock clock;
  if (replay) clock = [] { return Timestamp{std::chrono::sys_days{std::chrono::year{2022} / 12 / 1}}; };
  annotate::AnnotationStore store(log_path, clock);

  std::vector<std::string> ids;
  if (store.item_count() == 0) {
    for (const auto& j : items_json) {
      store.add_item(item_from_json(j));
      ids.push_back(j.at("id").get<std::string>());
    }
    const auto annotators = c.get_list("annotate", "annotators");
    const auto seed = static_cast<std::uint64_t>(c.get_int("annotate", "seed"));
    store.apply_assignment(
        annotate::assign_items(ids, annotators, static_cast<std::size_t>(c.get_int("annotate", "per_item")), seed));
    ctx.manifest.seeds = {seed};
  }

  taxonomy::Catalog catalog;
  const auto catalog_path = c.get_path("annotate", "catalog");
  if (!catalog_path.empty()) catalog = taxonomy::Catalog::load(ctx.input(catalog_path));
  annotate::ApiOptions api_opts;
  api_opts.guidelines_path = c.get_path("annotate", "guidelines");
  if (!api_opts.guidelines_path.empty()) ctx.input(api_opts.guidelines_path);
  api_opts.catalog = catalog_path.empty() ? nullptr : &catalog;
  const annotate::AnnotationApi api(store, api_opts);

  nlohmann::json params = {{"annotate", c.to_json()["annotate"]}, {"items", store.item_count()}};
  if (replay) {
    const auto events = read_jsonl(ctx.input(c.get_path("annotate", "annotations")));
    const std::set<std::string> wanted(ids.begin(), ids.end());
    std::size_t labels = 0, decisions = 0;
    auto post = [&](const std::string& path, const nlohmann::json& body) {
      const auto resp = api.handle({"POST", path, {}, body.dump()});
      if (resp.status != 200) throw Error(fmt::format("replay: POST {} -> {} {}", path, resp.status, resp.body));
    };
    for (const auto& e : events) {
      const auto item_id = e.at("item_id").get<std::string>();
      if (!wanted.contains(item_id) || e.value("type", "label") != "label") continue;
      post("/items/" + item_id + "/label", e);
      ++labels;
    }
    std::set<std::string> queued;
    for (const auto& q : store.queue()) queued.insert(q.item_id);
    params["queue_size"] = queued.size();
    const auto agreement = api.handle({"GET", "/agreement", {}, ""});
    if (agreement.status == 200) {
      params["agreement"] = nlohmann::json::parse(agreement.body);
    } else {
      ctx.warn("agreement unavailable: " + agreement.body);
    }
    for (const auto& e : events) {
      const auto item_id = e.at("item_id").get<std::string>();
      if (!wanted.contains(item_id) || e.value("type", "label") != "adjudicate") continue;
      post("/items/" + item_id + "/adjudicate", e);
      ++decisions;
    }
    params["labels_replayed"] = labels;
    params["adjudications_replayed"] = decisions;
  } else {
    annotate::HttpServer server(api, c.get_path("annotate", "static_dir"));
    const int port = server.bind(c.get_string("annotate", "host"), static_cast<int>(c.get_int("annotate", "port")));
    ctx.info(fmt::format("serving on http://{}:{} (Ctrl-C to stop)", c.get_string("annotate", "host"), port));
    g_server = &server;
    auto prev_int = std::signal(SIGINT, stop_server);
    auto prev_term = std::signal(SIGTERM, stop_server);
    server.run();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    g_server = nullptr;
  }

  const auto pending = store.unadjudicated();
  if (!pending.empty()) {
    throw Error(fmt::format("{} items are not adjudicated yet (first: {})", pending.size(), pending.front()));
  }
  const auto exported = api.handle({"GET", "/export", {}, ""});
  if (exported.status != 200) throw Error("export failed: " + exported.body);
  {
    std::ofstream out(ctx.output(c.get_path("annotate", "output")), std::ios::binary);
    out << exported.body;
  }
  const auto rows = store.export_rows();
  const auto counts = data::count_classes(rows);
  params["exported"] = rows.size();
  params["by_label"] = counts.by_label;
  write_json(ctx.work_path("annotate/summary.json"), params);
  ctx.manifest.parameters = params;
  ctx.info(fmt::format("exported {} labelled rows", rows.size()));
}

std::optional<Timestamp> cut_from_config(const Config& c) {
  const auto v = c.get_string("bench", "cut");
  if (v == "auto") return std::nullopt;
  if (v == "reference") return bench::kReferenceCut;
  const auto t = parse_timestamp(v);
  if (!t) throw ConfigError({"bench.cut: expected auto, reference or a timestamp, got '" + v + "'"});
  return t;
}

void stage_split(StageContext& ctx) {
  const auto& c = ctx.config;
  const auto rows = data::load_dataset(ctx.input(c.get_path("bench", "dataset")));
  const auto split = bench::chronological_split(rows, cut_from_config(c));
  write_json(ctx.work_path("split/split.json"), split.to_json());
  const auto counts = eval::split_counts(rows, split);
  ctx.manifest.parameters = {{"cut", format_timestamp(split.cut)},
                             {"train", counts.train},
                             {"test", counts.test},
                             {"setting", c.get_string("bench", "cut")}};
  ctx.info(fmt::format("train {} / test {} at {}", split.train_ids.size(), split.test_ids.size(),
                       format_timestamp(split.cut)));
}

struct BenchInputs {
  std::vector<data::DatasetRow> rows;
  bench::DatasetSplit split;
};

BenchInputs bench_inputs(StageContext& ctx) {
  BenchInputs b;
  b.rows = data::load_dataset(ctx.input(ctx.config.get_path("bench", "dataset")));
  b.split = bench::DatasetSplit::from_json(
      read_json(ctx.input((fs::path(ctx.config.workdir()) / "split/split.json").string())));
  return b;
}

bench::AdapterConfig finetune_config(StageContext& ctx) {
  const auto path = ctx.config.get_path("bench", "adapter");
  bench::AdapterConfig cfg;
  if (!path.empty()) cfg = bench::load_adapter_config(ctx.input(path));
  if (!bench::is_finetune_kind(cfg.kind)) {
    throw ConfigError({"bench.adapter: kind '" + cfg.kind + "' is not a fine-tuning adapter"});
  }
  return cfg;
}

std::vector<std::vector<bench::Prediction>> by_seed(const std::vector<bench::Prediction>& all,
                                                    const std::vector<std::uint64_t>& seeds) {
  std::vector<std::vector<bench::Prediction>> out(seeds.size());
  for (const auto& p : all) {
    const auto it = std::find(seeds.begin(), seeds.end(), p.seed);
    if (it == seeds.end()) throw ContractViolation(fmt::format("prediction for unexpected seed {}", p.seed));
    out[static_cast<std::size_t>(it - seeds.begin())].push_back(p);
  }
  return out;
}

void stage_train(StageContext& ctx) {
  const auto& c = ctx.config;
  const auto in = bench_inputs(ctx);
  const auto cfg = finetune_config(ctx);
  const auto artifact_dir = (fs::path(c.workdir()) / "train" / "artifacts").string();
  fs::create_directories(artifact_dir);
  const auto adapter = bench::make_finetune_adapter(cfg, artifact_dir);
  bench::TrainRunOptions opts;
  opts.seeds = seeds_of(c);
  opts.artifact_dir = artifact_dir;
  ctx.manifest.seeds = opts.seeds;
  const auto runs = bench::train_and_predict(*adapter, in.rows, in.split, opts);
  std::vector<bench::Prediction> all;
  for (const auto& r : runs) all.insert(all.end(), r.begin(), r.end());
  bench::write_predictions(ctx.work_path("train/predictions.csv"), all);
  for (const auto& entry : fs::recursive_directory_iterator(artifact_dir)) {
    if (entry.is_regular_file()) ctx.output(entry.path().string());
  }
  write_json(ctx.work_path("train/runs.json"),
             nlohmann::json::array({{{"model_id", adapter->id()}, {"file", "predictions.csv"}, {"label_space", "ternary"}}}));
  ctx.manifest.parameters = {{"adapter", cfg.to_json()}, {"test_size", in.split.test_ids.size()}};
  ctx.info(fmt::format("trained {} over {} seeds", adapter->id(), opts.seeds.size()));
}

void stage_prompt_eval(StageContext& ctx) {
  const auto& c = ctx.config;
  const auto in = bench_inputs(ctx);
  const auto seed = static_cast<std::uint64_t>(c.get_int("bench", "prompt_seed"));
  ctx.manifest.seeds = {seed};
  std::vector<std::string> ids = in.split.test_ids;
  const auto limit = static_cast<std::size_t>(c.get_int("bench", "prompt_sample"));
  if (limit && limit < ids.size()) ids.resize(limit);

  nlohmann::json runs = nlohmann::json::array();
  nlohmann::json adapters = nlohmann::json::array();
  const auto spec_paths = c.get_path_list("bench", "prompt_specs");
  if (!spec_paths.empty()) {
    bench::AdapterConfig cfg;
    cfg.kind = "lexicon";
    cfg.adapter_id = "lexicon";
    const auto gen_path = c.get_path("bench", "generative");
    if (!gen_path.empty()) cfg = bench::load_adapter_config(ctx.input(gen_path));
    if (bench::is_finetune_kind(cfg.kind)) {
      throw ConfigError({"bench.generative: kind '" + cfg.kind + "' is not a generative adapter"});
    }
    const auto adapter = bench::make_generative_adapter(cfg);
    adapters.push_back(cfg.to_json());
    for (const auto& path : spec_paths) {
      const auto spec = bench::load_prompt_spec(ctx.input(path));
      const auto preds = bench::prompt_eval(*adapter, spec, in.rows, ids, seed, false);
      const std::string model_id = adapter->id() + "/" + spec.name;
      const std::string file = file_safe(model_id) + ".csv";
      bench::write_predictions(ctx.work_path("prompt-eval/" + file), preds);
      const auto failures = std::count_if(preds.begin(), preds.end(), [](const auto& p) { return p.parse_failure; });
      runs.push_back({{"model_id", model_id}, {"file", file}, {"label_space", "ternary"}, {"parse_failures", failures}});
      ctx.info(fmt::format("{}: {} items, {} parse failures", model_id, preds.size(), failures));
    }
  }

  // Toxicity classifiers see the bare post.
  bench::PromptSpec bare;
  bare.name = "bare";
  bare.user_template = "{tweet}";
  bare.decoding.temperature = 0.0;
  for (const auto& path : c.get_path_list("bench", "binary_adapters")) {
    const auto cfg = bench::load_adapter_config(ctx.input(path));
    if (bench::is_finetune_kind(cfg.kind)) {
      throw ConfigError({"bench.binary_adapters: kind '" + cfg.kind + "' is not a generative adapter"});
    }
    const auto adapter = bench::make_generative_adapter(cfg);
    adapters.push_back(cfg.to_json());
    const auto preds = bench::prompt_eval(*adapter, bare, in.rows, ids, seed, true);
    const std::string file = file_safe(adapter->id()) + "-binary.csv";
    bench::write_predictions(ctx.work_path("prompt-eval/" + file), preds);
    runs.push_back({{"model_id", adapter->id()}, {"file", file}, {"label_space", "binary"}});
    ctx.info(fmt::format("{}: {} binary predictions", adapter->id(), preds.size()));
  }
  if (runs.empty()) ctx.warn("no prompt specs or binary adapters configured");
  write_json(ctx.work_path("prompt-eval/runs.json"), runs);
  ctx.manifest.parameters = {{"adapters", adapters}, {"runs", runs}, {"items", ids.size()}};
}

void stage_evaluate(StageContext& ctx) {
  const auto& c = ctx.config;
  const auto rows = data::load_dataset(ctx.input(c.get_path("bench", "dataset")));
  const auto min_support = static_cast<std::size_t>(c.get_int("eval", "min_support"));
  nlohmann::json index = {{"ternary", nlohmann::json::array()}, {"binary", nlohmann::json::array()}};
  for (const char* stage_dir : {"train", "prompt-eval"}) {
    const auto dir = fs::path(c.workdir()) / stage_dir;
    const auto runs = read_json(ctx.input((dir / "runs.json").string()));
    for (const auto& run : runs) {
      const auto model_id = run.at("model_id").get<std::string>();
      const bool binary = run.at("label_space").get<std::string>() == "binary";
      const auto preds = bench::read_predictions(ctx.input((dir / run.at("file").get<std::string>()).string()));
      std::vector<std::uint64_t> seeds;
      for (const auto& p : preds) {
        if (std::find(seeds.begin(), seeds.end(), p.seed) == seeds.end()) seeds.push_back(p.seed);
      }
      std::vector<eval::EvalReport> per_seed;
      for (const auto& run_preds : by_seed(preds, seeds)) {
        per_seed.push_back(eval::evaluate(model_id, run_preds, rows, {min_support, binary}));
      }
      const auto report = eval::seed_average(per_seed);
      const std::string file = file_safe(model_id) + (binary ? "-binary" : "") + ".json";
      write_json(ctx.work_path("evaluate/" + file), report.to_json());
      index[binary ? "binary" : "ternary"].push_back(file);
      ctx.info(fmt::format("{}: weighted F1 {:.4f} over {} seed(s)", model_id, report.overall.f1, seeds.size()));
    }
  }
  write_json(ctx.work_path("evaluate/index.json"), index);
  ctx.manifest.parameters = {{"eval", c.to_json()["eval"]}, {"reports", index}};
}

void stage_ablate(StageContext& ctx) {
  const auto& c = ctx.config;
  const auto in = bench_inputs(ctx);
  const auto cfg = finetune_config(ctx);
  const auto seeds = seeds_of(c);
  ctx.manifest.seeds = seeds;
  std::vector<Region> kept;
  for (const auto& name : c.get_list("eval", "ablation_regions")) {
    const auto r = region_from_string(name);
    if (!r) throw ConfigError({"eval.ablation_regions: unknown region '" + name + "'"});
    kept.push_back(*r);
  }
  const auto baseline = by_seed(
      bench::read_predictions(ctx.input((fs::path(c.workdir()) / "train/predictions.csv").string())), seeds);
  const auto adapter = bench::make_finetune_adapter(cfg, (fs::path(c.workdir()) / "ablate" / "artifacts").string());
  const auto result = eval::region_ablation(*adapter, in.rows, in.split, seeds, kept, &baseline,
                                            static_cast<std::size_t>(c.get_int("eval", "min_support")));
  write_json(ctx.work_path("ablate/ablation.json"), result.to_json());
  ctx.manifest.parameters = {{"kept", c.get_list("eval", "ablation_regions")},
                             {"baseline_train_size", result.baseline_train_size},
                             {"ablated_train_size", result.ablated_train_size},
                             {"baseline_f1", result.baseline.overall.f1},
                             {"ablated_f1", result.ablated.overall.f1}};
  ctx.info(fmt::format("weighted F1 {:.4f} with {} training rows vs {:.4f} with {}", result.ablated.overall.f1,
                       result.ablated_train_size, result.baseline.overall.f1, result.baseline_train_size));
}

void stage_report(StageContext& ctx) {
  const auto& c = ctx.config;
  const auto in = bench_inputs(ctx);
  const auto work = fs::path(c.workdir());
  eval::ReportBundle bundle;
  bundle.split = eval::split_counts(in.rows, in.split);
  bundle.dataset = data::count_classes(in.rows);
  const auto index = read_json(ctx.input((work / "evaluate/index.json").string()));
  for (const auto& f : index.at("ternary")) {
    bundle.models.push_back(eval::EvalReport::from_json(read_json(ctx.input((work / "evaluate" / f.get<std::string>()).string()))));
  }
  for (const auto& f : index.at("binary")) {
    bundle.binary_models.push_back(
        eval::EvalReport::from_json(read_json(ctx.input((work / "evaluate" / f.get<std::string>()).string()))));
  }
  const auto ablation_path = work / "ablate/ablation.json";
  if (fs::is_regular_file(ablation_path)) {
    bundle.ablation = eval::AblationResult::from_json(read_json(ctx.input(ablation_path.string())));
  } else {
    ctx.warn("no ablation result; table A3 is left empty");
  }

  write_json(ctx.work_path("report/summary.json"), bundle.to_json());
  std::string combined;
  for (const auto& fmt_name : c.get_list("eval", "formats")) {
    eval::TableFormat format;
    if (fmt_name == "markdown") {
      format = eval::TableFormat::Markdown;
    } else if (fmt_name == "csv") {
      format = eval::TableFormat::Csv;
    } else {
      throw ConfigError({"eval.formats: unknown format '" + fmt_name + "'"});
    }
    const auto dir = (work / "report" / fmt_name).string();
    for (const auto& path : eval::emit_tables(bundle, format, dir)) {
      ctx.output(path);
      if (format == eval::TableFormat::Markdown) {
        std::ifstream t(path, std::ios::binary);
        std::stringstream ss;
        ss << t.rdbuf();
        combined += "## " + fs::path(path).stem().string() + "\n\n" + ss.str() + "\n";
      }
    }
  }
  {
    std::ofstream out(ctx.work_path("report/report.md"), std::ios::binary);
    out << "# Benchmark report\n\n" << combined;
  }

  const auto train_preds = bench::read_predictions(ctx.input((work / "train/predictions.csv").string()));
  const auto seeds = seeds_of(c);
  if (!seeds.empty()) {
    const auto first = by_seed(train_preds, seeds).front();
    eval::write_misclassified(ctx.work_path("report/misclassified.csv"), first, in.rows);
  }
  ctx.manifest.parameters = {{"models", bundle.models.size()}, {"binary_models", bundle.binary_models.size()}};
  ctx.info("report written to " + (work / "report").string());
}

}  // namespace

RunManifest run_stage(Stage stage, const Config& config, std::ostream* log) {
  StageContext ctx(stage, config, log);
  for (const auto& w : config.warnings()) ctx.warn(w);
  try {
    switch (stage) {
      case Stage::Ingest: stage_ingest(ctx); break;
      case Stage::Geolocate: stage_geolocate(ctx); break;
      case Stage::Topics: stage_topics(ctx); break;
      case Stage::Sample: stage_sample(ctx); break;
      case Stage::AnnotateServe: stage_annotate(ctx); break;
      case Stage::Split: stage_split(ctx); break;
      case Stage::Train: stage_train(ctx); break;
      case Stage::PromptEval: stage_prompt_eval(ctx); break;
      case Stage::Evaluate: stage_evaluate(ctx); break;
      case Stage::Ablate: stage_ablate(ctx); break;
      case Stage::Report: stage_report(ctx); break;
    }
  } catch (const std::exception& e) {
    ctx.fail(e);
    throw;
  }
  ctx.finish();
  const auto path = manifest_path(config, stage);
  fs::create_directories(fs::path(path).parent_path());
  write_json(path, ctx.manifest.to_json());
  return ctx.manifest;
}

std::vector<RunManifest> run_pipeline(const Config& config, std::ostream* log, std::optional<Stage> from,
                                      std::optional<Stage> to) {
  std::vector<RunManifest> out;
  bool active = !from;
  for (Stage s : kAllStages) {
    if (from && s == *from) active = true;
    if (active) out.push_back(run_stage(s, config, log));
    if (to && s == *to) break;
  }
  return out;
}

}  // namespace aporo::pipeline
