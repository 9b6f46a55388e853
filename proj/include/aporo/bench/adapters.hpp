#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/bench/prompt.hpp"
#include "aporo/common/label.hpp"

namespace aporo::bench {

/// Adapter settings. Credentials are never stored here, only the name of the
/// environment variable holding them.
struct AdapterConfig {
  std::string adapter_id = "bow-linear";
  /// finetune: bow-linear | external. generative: openai | lexicon.
  std::string kind = "bow-linear";
  std::string backbone;
  std::size_t batch_size = 4;
  std::size_t epochs = 4;
  std::string optimizer = "adam";
  double learning_rate = 0.01;
  /// Hashed feature count for bow-linear.
  std::size_t feature_dim = 1u << 16;
  /// External trainer command line; the harness appends its arguments.
  std::string command;
  std::string endpoint;
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t max_parallel = 4;
  std::size_t max_retries = 3;
  double timeout_seconds = 60.0;
  /// ternary | binary. Binary adapters answer Toxic/NonToxic.
  std::string label_space = "ternary";

  nlohmann::json to_json() const;
};

/// Reads an INI file with keys matching the field names (no sections).
AdapterConfig load_adapter_config(const std::string& path);

bool is_finetune_kind(const std::string& kind);

struct TrainExample {
  std::string id;
  std::string text;
  Label label = Label::None;
};

class TrainedModel {
 public:
  virtual ~TrainedModel() = default;
  virtual std::vector<Label> predict(std::span<const std::string> texts) const = 0;
  virtual void save(const std::string& dir) const = 0;
};

class FinetuneAdapter {
 public:
  virtual ~FinetuneAdapter() = default;
  virtual std::string id() const = 0;
  virtual std::unique_ptr<TrainedModel> train(std::span<const TrainExample> examples, std::uint64_t seed) const = 0;
};

/// Hashed unigram+bigram features, softmax regression trained with Adam in
/// seeded mini-batches.
class BowLinearAdapter final : public FinetuneAdapter {
 public:
  explicit BowLinearAdapter(AdapterConfig config) : config_(std::move(config)) {}
  std::string id() const override { return config_.adapter_id; }
  std::unique_ptr<TrainedModel> train(std::span<const TrainExample> examples, std::uint64_t seed) const override;

 private:
  AdapterConfig config_;
};

/// Runs an external trainer:
///   <command> train --train <csv> --model-dir <dir> --seed S --batch-size B --epochs E [--backbone X]
///   <command> predict --model-dir <dir> --input <csv> --output <txt>
/// The output file holds one label per line.
class ExternalAdapter final : public FinetuneAdapter {
 public:
  ExternalAdapter(AdapterConfig config, std::string work_dir);
  std::string id() const override { return config_.adapter_id; }
  std::unique_ptr<TrainedModel> train(std::span<const TrainExample> examples, std::uint64_t seed) const override;

 private:
  AdapterConfig config_;
  std::string work_dir_;
};

std::unique_ptr<FinetuneAdapter> make_finetune_adapter(const AdapterConfig& config, const std::string& work_dir);

struct PromptRequest {
  std::vector<ChatMessage> messages;
  /// The unformatted input, for adapters that do not read chat messages.
  std::string tweet;
};

/// Chat-completion client returning raw text, one per prompt.
class GenerativeAdapter {
 public:
  virtual ~GenerativeAdapter() = default;
  virtual std::string id() const = 0;
  virtual std::vector<std::string> generate(const std::vector<PromptRequest>& prompts,
                                            const Decoding& decoding, std::uint64_t seed) const = 0;
};

/// OpenAI-compatible /v1/chat/completions client with bounded parallelism
/// and exponential-backoff retries on 429, 5xx and transport errors.
class OpenAiAdapter final : public GenerativeAdapter {
 public:
  explicit OpenAiAdapter(AdapterConfig config);
  std::string id() const override { return config_.adapter_id; }
  std::vector<std::string> generate(const std::vector<PromptRequest>& prompts, const Decoding& decoding,
                                    std::uint64_t seed) const override;

 private:
  AdapterConfig config_;
  std::string api_key_;
};

/// Offline keyword stand-in for a generative model, for wiring tests.
/// Binary mode answers Toxic/NonToxic.
class LexiconAdapter final : public GenerativeAdapter {
 public:
  explicit LexiconAdapter(AdapterConfig config) : config_(std::move(config)) {}
  std::string id() const override { return config_.adapter_id; }
  std::vector<std::string> generate(const std::vector<PromptRequest>& prompts, const Decoding& decoding,
                                    std::uint64_t seed) const override;

 private:
  AdapterConfig config_;
};

std::unique_ptr<GenerativeAdapter> make_generative_adapter(const AdapterConfig& config);

}  // namespace aporo::bench
