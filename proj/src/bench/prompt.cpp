#include "aporo/bench/prompt.hpp"

#include <array>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "aporo/common/error.hpp"
#include "aporo/common/text.hpp"

namespace aporo::bench {

namespace {

constexpr std::string_view kTweetSlot = "{tweet}";
constexpr std::string_view kExamplesSlot = "{examples}";

std::size_t count_of(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string examples_block(const std::vector<Exemplar>& exemplars) {
  if (exemplars.empty()) return {};
  std::string out = "Examples:\n\nPost, Label\n";
  for (const auto& e : exemplars) out += fmt::format("\"{}\" , {}\n", e.text, to_string(e.label));
  out += "\n";
  return out;
}

}  // namespace

nlohmann::json PromptSpec::to_json() const {
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& e : exemplars) ex.push_back({{"text", e.text}, {"label", std::string(aporo::to_string(e.label))}});
  return {{"name", name},
          {"system", system_text},
          {"user_template", user_template},
          {"exemplars", ex},
          {"decoding", {{"temperature", decoding.temperature}, {"max_tokens", decoding.max_tokens}, {"n", decoding.n}}}};
}

PromptSpec PromptSpec::from_json(const nlohmann::json& j) {
  try {
    PromptSpec s;
    s.name = j.value("name", "");
    s.system_text = j.at("system").get<std::string>();
    s.user_template = j.at("user_template").get<std::string>();
    for (const auto& e : j.value("exemplars", nlohmann::json::array())) {
      const auto l = label_from_string(e.at("label").get<std::string>());
      if (!l) throw ParseError("unknown exemplar label " + e.at("label").dump());
      s.exemplars.push_back({e.at("text").get<std::string>(), *l});
    }
    if (j.contains("decoding")) {
      const auto& d = j["decoding"];
      s.decoding.temperature = d.value("temperature", s.decoding.temperature);
      s.decoding.max_tokens = d.value("max_tokens", s.decoding.max_tokens);
      s.decoding.n = d.value("n", s.decoding.n);
    }
    validate_prompt_spec(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prompt spec: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("prompt spec: ") + e.what());
  }
}

PromptSpec load_prompt_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open prompt spec " + path);
  try {
    return PromptSpec::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void validate_prompt_spec(const PromptSpec& spec) {
  const auto tweets = count_of(spec.user_template, kTweetSlot);
  if (tweets != 1) throw ContractViolation(fmt::format("user template needs exactly one {{tweet}} slot, found {}", tweets));
  if (count_of(spec.user_template, kExamplesSlot) > 1) throw ContractViolation("more than one {examples} slot");
  if (!spec.exemplars.empty()) {
    std::array<std::size_t, kNumLabels> per{};
    for (const auto& e : spec.exemplars) ++per[index_of(e.label)];
    if (spec.exemplars.size() != 9 || per[0] != 3 || per[1] != 3 || per[2] != 3) {
      throw ContractViolation(fmt::format("few-shot exemplars must be 3 per class, got {}/{}/{}", per[0], per[1], per[2]));
    }
    if (count_of(spec.user_template, kExamplesSlot) != 1) throw ContractViolation("exemplars given but no {examples} slot");
  }
}

std::vector<ChatMessage> build_prompt(const PromptSpec& spec, std::string_view tweet) {
  validate_prompt_spec(spec);
  const std::string_view t = spec.user_template;
  std::string user;
  std::size_t i = 0;
  while (i < t.size()) {
    if (t.substr(i).starts_with(kTweetSlot)) {
      user += tweet;
      i += kTweetSlot.size();
    } else if (t.substr(i).starts_with(kExamplesSlot)) {
      user += examples_block(spec.exemplars);
      i += kExamplesSlot.size();
    } else {
      user += t[i++];
    }
  }
  std::vector<ChatMessage> out;
  if (!spec.system_text.empty()) out.push_back({"system", spec.system_text});
  out.push_back({"user", std::move(user)});
  return out;
}

ParsedLabel parse_label(std::string_view raw) {
  std::string cleaned;
  for (char c : text::to_lower(text::trim(raw))) cleaned += text::is_alnum(c) ? c : ' ';
  const auto tokens = text::split_whitespace(cleaned);
  if (tokens.empty()) return {};
  std::set<Label> found;
  for (auto tok : tokens) {
    if (auto l = label_from_string(tok)) found.insert(*l);
  }
  if (found.size() == 1) return {*found.begin()};
  return {};
}

std::optional<BinaryLabel> parse_binary_label(std::string_view raw) {
  std::string cleaned;
  for (char c : text::to_lower(text::trim(raw))) cleaned += text::is_alnum(c) ? c : ' ';
  bool toxic = false, non_toxic = false;
  const auto tokens = text::split_whitespace(cleaned);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == "nontoxic" || tokens[i] == "non" || tokens[i] == "not") {
      if (tokens[i] == "nontoxic" || (i + 1 < tokens.size() && tokens[i + 1] == "toxic")) {
        non_toxic = true;
        if (tokens[i] != "nontoxic") ++i;
      }
    } else if (tokens[i] == "toxic" || tokens[i] == "hate" || tokens[i] == "offensive") {
      toxic = true;
    } else if (tokens[i] == "neutral" || tokens[i] == "normal") {
      non_toxic = true;
    }
  }
  if (toxic == non_toxic) return std::nullopt;
  return toxic ? BinaryLabel::Toxic : BinaryLabel::NonToxic;
}

BinaryLabel collapse_binary(Label label) { return label == Label::Direct ? BinaryLabel::Toxic : BinaryLabel::NonToxic; }

std::vector<BinaryLabel> collapse_binary(std::span<const Label> labels) {
  std::vector<BinaryLabel> out;
  out.reserve(labels.size());
  for (Label l : labels) out.push_back(collapse_binary(l));
  return out;
}

}  // namespace aporo::bench
