#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/common/label.hpp"

namespace aporo::bench {

struct Exemplar {
  std::string text;
  Label label = Label::None;
};

struct Decoding {
  double temperature = 0.7;
  int max_tokens = 10;
  int n = 1;
};

/// Chat prompt. `user_template` holds exactly one "{tweet}" slot and at most
/// one "{examples}" slot, which expands to the exemplar block (or nothing).
struct PromptSpec {
  std::string name;
  std::string system_text;
  std::string user_template;
  std::vector<Exemplar> exemplars;
  Decoding decoding;

  nlohmann::json to_json() const;
  static PromptSpec from_json(const nlohmann::json& j);
};

PromptSpec load_prompt_spec(const std::string& path);

/// Throws ContractViolation for a missing or repeated slot, or exemplars
/// that are neither empty nor 3 per class.
void validate_prompt_spec(const PromptSpec& spec);

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// System then user message. The tweet is inserted verbatim in one pass, so
/// braces or quotes inside it are never re-expanded.
std::vector<ChatMessage> build_prompt(const PromptSpec& spec, std::string_view tweet);

struct ParsedLabel {
  std::optional<Label> label;
  /// Scored label: the parsed one, or None on failure.
  Label scored() const { return label.value_or(Label::None); }
  bool failed() const { return !label.has_value(); }
};

/// Trim, case-fold and strip punctuation; accept an exact class name or a
/// single class-name token. Two or more distinct class tokens fail.
ParsedLabel parse_label(std::string_view raw);

/// "toxic"/"non-toxic" style outputs; nullopt when neither or both appear.
std::optional<BinaryLabel> parse_binary_label(std::string_view raw);

BinaryLabel collapse_binary(Label label);
std::vector<BinaryLabel> collapse_binary(std::span<const Label> labels);

}  // namespace aporo::bench
