#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/pipeline/config.hpp"

namespace aporo::pipeline {

enum class Stage {
  Ingest,
  Geolocate,
  Topics,
  Sample,
  AnnotateServe,
  Split,
  Train,
  PromptEval,
  Evaluate,
  Ablate,
  Report,
};

inline constexpr std::array<Stage, 11> kAllStages{Stage::Ingest,   Stage::Geolocate,     Stage::Topics,
                                                  Stage::Sample,   Stage::AnnotateServe, Stage::Split,
                                                  Stage::Train,    Stage::PromptEval,    Stage::Evaluate,
                                                  Stage::Ablate,   Stage::Report};

std::string_view to_string(Stage stage);
std::optional<Stage> stage_from_string(std::string_view name);

/// Record of one stage invocation. File maps are display path -> sha256.
/// Outputs under the workdir are keyed relative to it, so two runs in
/// different workdirs compare equal.
struct RunManifest {
  std::string stage;
  std::string config_hash;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::vector<std::uint64_t> seeds;
  std::string tool_version;
  std::string started_at;
  std::string finished_at;
  nlohmann::json parameters = nlohmann::json::object();
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

std::string manifest_path(const Config& config, Stage stage);
RunManifest load_manifest(const std::string& path);

/// Runs one stage and writes its manifest to <workdir>/manifests/<stage>.json.
/// Progress goes to `log` and <workdir>/logs/<stage>.log. Throws
/// MissingInput when an input file is absent, ConfigError on settings the
/// stage cannot use, and other errors on runtime failure.
RunManifest run_stage(Stage stage, const Config& config, std::ostream* log = nullptr);

/// Runs the stages in order, stopping at the first failure.
std::vector<RunManifest> run_pipeline(const Config& config, std::ostream* log = nullptr,
                                      std::optional<Stage> from = std::nullopt,
                                      std::optional<Stage> to = std::nullopt);

/// Process exit code for an exception escaping a stage: 2 missing input,
/// 3 config schema violation, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace aporo::pipeline
