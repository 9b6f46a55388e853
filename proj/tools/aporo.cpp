// Command-line entry point for the aporophobia corpus and benchmark pipeline.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "aporo/pipeline/config.hpp"
#include "aporo/pipeline/stages.hpp"
#include "aporo/sample/sampler.hpp"

namespace fs = std::filesystem;
using aporo::pipeline::Config;
using aporo::pipeline::Stage;

namespace {

struct Common {
  std::string config_path;
  std::string workdir;
  bool quiet = false;
};

/// Flag value -> (section, key) override.
struct Override {
  std::string section;
  std::string key;
  std::string value;
};

Config make_config(const Common& common) {
  Config c = common.config_path.empty() ? Config() : Config::load(common.config_path);
  if (const char* data = std::getenv("APORO_DATA_DIR")) c.set_data_dir(data);
  std::string workdir = common.workdir;
  if (workdir.empty()) {
    workdir = common.config_path.empty() ? "work" : (fs::path(c.base_dir()) / "work").string();
  }
  c.set_workdir(workdir);
  return c;
}

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("-c,--config", common.config_path, "pipeline config file");
  cmd->add_option("-w,--workdir", common.workdir, "working directory (default: <config dir>/work)");
  cmd->add_flag("-q,--quiet", common.quiet, "only print errors");
}

int report_error(const std::exception& e) {
  std::cerr << "error: " << e.what() << '\n';
  return aporo::pipeline::exit_code_for(e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aporophobia corpus construction and benchmark pipeline"};
  app.set_version_flag("--version", std::string(APORO_VERSION));
  app.require_subcommand(1);

  Common common;
  std::string from, to;
  auto* run = app.add_subcommand("run", "run every stage in order");
  add_common(run, common);
  run->add_option("--from", from, "first stage");
  run->add_option("--to", to, "last stage");

  std::string stage_name;
  auto* stage = app.add_subcommand("stage", "run one stage from the config");
  add_common(stage, common);
  stage->add_option("name", stage_name, "stage name")->required();

  std::string validate_path;
  bool dump = false;
  auto* validate = app.add_subcommand("validate-config", "check a config file against the schema");
  validate->add_option("path", validate_path, "config file")->required();
  validate->add_flag("--dump", dump, "print the effective configuration");

  app.add_subcommand("print-config", "print the default configuration");

  std::string manifest_path, pool_path;
  auto* verify = app.add_subcommand("verify-sample", "re-check a sample manifest against its pool");
  verify->add_option("--manifest", manifest_path, "sample manifest")->required();
  verify->add_option("--pool", pool_path, "tagged pool (jsonl)")->required();

  // Per-stage commands: each flag overrides one config key.
  std::map<CLI::App*, std::pair<Stage, std::vector<Override>>> stage_cmds;
  std::map<CLI::App*, std::vector<std::pair<std::string, std::string>>> flag_keys;
  std::map<std::string, std::string> flag_values;
  std::map<std::string, bool> flag_bools;
  auto stage_cmd = [&](Stage s, const std::string& help,
                       std::vector<std::tuple<std::string, std::string, std::string, std::string>> flags) {
    auto* cmd = app.add_subcommand(std::string(aporo::pipeline::to_string(s)), help);
    add_common(cmd, common);
    stage_cmds[cmd] = {s, {}};
    for (const auto& [flag, section, key, doc] : flags) {
      const std::string id = std::string(aporo::pipeline::to_string(s)) + flag;
      const auto* spec = aporo::pipeline::find_key(section, key);
      if (spec && spec->type == aporo::pipeline::ValueType::Bool) {
        cmd->add_flag(flag, flag_bools[id], doc);
      } else {
        cmd->add_option(flag, flag_values[id], doc);
      }
      flag_keys[cmd].push_back({id, section + "." + key});
    }
  };
  stage_cmd(Stage::Ingest, "filter raw posts and mask query terms",
            {{"--in", "ingest", "input", "raw post file"},
             {"--format", "ingest", "format", "jsonl or csv"},
             {"--fail-fast", "ingest", "fail_fast", "stop at the first malformed row"},
             {"--placeholder", "ingest", "placeholder", "mask replacement"},
             {"--out", "ingest", "output", "filtered records"}});
  stage_cmd(Stage::Geolocate, "assign regions",
            {{"--in", "geo", "input", "records"},
             {"--gazetteer", "geo", "gazetteer", "place name table"},
             {"--out", "geo", "output", "records with regions"}});
  stage_cmd(Stage::Topics, "embed, cluster and select topics",
            {{"--in", "topics", "input", "records"},
             {"--embeddings", "topics", "embeddings", "embedding cache"},
             {"--min-cluster-size", "topics", "min_cluster_size", "0 = automatic"},
             {"--min-df", "topics", "min_df", "minimum document frequency"},
             {"--k", "topics", "k", "topic words"},
             {"--selection", "topics", "selection", "topic selection file"},
             {"--out", "topics", "output", "tagged pool"}});
  stage_cmd(Stage::Sample, "stratified quota sample",
            {{"--pool", "sample", "input", "tagged pool"},
             {"--quotas", "sample", "quotas", "quota file"},
             {"--seed", "sample", "seed", "draw seed"},
             {"--out", "sample", "output", "sample manifest"}});
  stage_cmd(Stage::AnnotateServe, "serve or replay annotation",
            {{"--items", "annotate", "input", "items (jsonl)"},
             {"--mode", "annotate", "mode", "serve or replay"},
             {"--annotations", "annotate", "annotations", "decision file for replay"},
             {"--annotators", "annotate", "annotators", "comma-separated annotator ids"},
             {"--host", "annotate", "host", "bind address"},
             {"--port", "annotate", "port", "bind port"},
             {"--static", "annotate", "static_dir", "UI files"},
             {"--out", "annotate", "output", "exported dataset"}});
  stage_cmd(Stage::Split, "chronological split",
            {{"--dataset", "bench", "dataset", "labelled dataset"}, {"--cut", "bench", "cut", "auto, reference or timestamp"}});
  stage_cmd(Stage::Train, "fine-tune over seeds",
            {{"--dataset", "bench", "dataset", "labelled dataset"},
             {"--adapter", "bench", "adapter", "adapter config"},
             {"--seeds", "bench", "seeds", "comma-separated seeds"}});
  stage_cmd(Stage::PromptEval, "prompt generative models",
            {{"--dataset", "bench", "dataset", "labelled dataset"},
             {"--specs", "bench", "prompt_specs", "prompt spec files"},
             {"--adapter", "bench", "generative", "generative adapter config"},
             {"--binary-adapters", "bench", "binary_adapters", "binary adapter configs"}});
  stage_cmd(Stage::Evaluate, "score predictions", {{"--dataset", "bench", "dataset", "labelled dataset"}});
  stage_cmd(Stage::Ablate, "region ablation",
            {{"--regions", "eval", "ablation_regions", "regions kept"}, {"--adapter", "bench", "adapter", "adapter config"}});
  stage_cmd(Stage::Report, "emit tables", {{"--formats", "eval", "formats", "markdown,csv"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    std::ostream* log = common.quiet ? nullptr : &std::cerr;
    if (*run) {
      const auto config = make_config(common);
      std::optional<Stage> f, t;
      if (!from.empty() && !(f = aporo::pipeline::stage_from_string(from))) {
        throw aporo::pipeline::ConfigError({"--from: unknown stage " + from});
      }
      if (!to.empty() && !(t = aporo::pipeline::stage_from_string(to))) {
        throw aporo::pipeline::ConfigError({"--to: unknown stage " + to});
      }
      const auto manifests = aporo::pipeline::run_pipeline(config, log, f, t);
      if (!common.quiet) std::cerr << fmt::format("{} stages completed in {}\n", manifests.size(), config.workdir());
      return 0;
    }
    if (*stage) {
      const auto s = aporo::pipeline::stage_from_string(stage_name);
      if (!s) throw aporo::pipeline::ConfigError({"unknown stage " + stage_name});
      aporo::pipeline::run_stage(*s, make_config(common), log);
      return 0;
    }
    if (*validate) {
      const auto result = aporo::pipeline::validate_config(validate_path);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      for (const auto& e : result.errors) std::cerr << "error: " << e << '\n';
      if (!result.ok) return 3;
      if (dump) std::cout << Config::load(validate_path).to_ini();
      std::cout << "ok\n";
      return 0;
    }
    if (app.got_subcommand("print-config")) {
      std::cout << Config().to_ini();
      return 0;
    }
    if (*verify) {
      std::ifstream min(manifest_path);
      if (!min) throw aporo::MissingInput("manifest not found: " + manifest_path);
      const auto manifest = aporo::sample::SampleManifest::from_json(nlohmann::json::parse(min));
      std::ifstream pin(pool_path);
      if (!pin) throw aporo::MissingInput("pool not found: " + pool_path);
      std::vector<aporo::sample::PoolItem> pool;
      for (std::string line; std::getline(pin, line);) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const auto region = aporo::region_from_string(j.at("region").get<std::string>());
        if (!region) throw aporo::ParseError("unknown region in pool");
        pool.push_back({j.at("id").get<std::string>(), j.at("topic_id").get<int>(), *region, j.at("month").get<int>()});
      }
      const auto report = aporo::sample::verify_manifest(manifest, pool);
      std::cout << report.to_json().dump(2) << '\n';
      return report.ok ? 0 : 1;
    }
    for (auto& [cmd, entry] : stage_cmds) {
      if (!*cmd) continue;
      auto config = make_config(common);
      for (const auto& [id, dotted] : flag_keys[cmd]) {
        const auto dot = dotted.find('.');
        const auto section = dotted.substr(0, dot);
        const auto key = dotted.substr(dot + 1);
        if (flag_bools.contains(id)) {
          if (flag_bools[id]) config.set(section, key, "true");
          continue;
        }
        const auto& value = flag_values[id];
        if (value.empty()) continue;
        // Paths given on the command line are relative to the current directory.
        const auto* spec = aporo::pipeline::find_key(section, key);
        const bool is_path = spec && spec->type == aporo::pipeline::ValueType::Path;
        config.set(section, key, is_path ? fs::absolute(value).lexically_normal().string() : value);
      }
      aporo::pipeline::run_stage(entry.first, config, log);
      return 0;
    }
  } catch (const aporo::pipeline::ConfigError& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    return report_error(e);
  }
  return 0;
}
