#include "aporo/pipeline/config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "aporo/common/hash.hpp"
#include "aporo/common/text.hpp"

#ifndef APORO_DEFAULT_DATA_DIR
#define APORO_DEFAULT_DATA_DIR "data"
#endif

namespace aporo::pipeline {

namespace fs = std::filesystem;
using text::to_lower;
using text::trim;

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error([&] {
        std::string msg = "config schema violation";
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

const std::vector<KeySpec>& config_schema() {
  using T = ValueType;
  static const std::vector<KeySpec> schema = {
      {"ingest", "input", T::Path, "", {}, false, "raw post file"},
      {"ingest", "format", T::Enum, "jsonl", {"jsonl", "csv"}, false, "raw post format"},
      {"ingest", "fail_fast", T::Bool, "false", {}, false, "abort on the first malformed row"},
      {"ingest", "placeholder", T::String, "[GROUP]", {}, false, "replacement for matched query terms"},
      {"ingest", "max_hashtags", T::Int, "5", {}, false, "posts with more hashtags are dropped"},
      {"ingest", "bot_rule", T::Enum, "substring", {"substring", "token"}, false, "bot account test"},
      {"ingest", "output", T::Path, "${workdir}/ingest/records.jsonl", {}, false, "filtered records"},

      {"geo", "input", T::Path, "${workdir}/ingest/records.jsonl", {}, false, "records to geolocate"},
      {"geo", "gazetteer", T::Path, "${data}/gazetteer.tsv", {}, false, "place name table"},
      {"geo", "output", T::Path, "${workdir}/geolocate/records.regions.jsonl", {}, false, "records with regions"},

      {"topics", "input", T::Path, "${workdir}/geolocate/records.regions.jsonl", {}, false, "records to cluster"},
      {"topics", "encoder_dim", T::Int, "256", {}, false, "hashing encoder width"},
      {"topics", "embeddings", T::Path, "${workdir}/topics/embeddings.bin", {}, false,
       "embedding cache, reused when present and complete"},
      {"topics", "min_cluster_size", T::Int, "0", {}, false, "0 picks max(5, n/1200)"},
      {"topics", "min_samples", T::Int, "0", {}, false, "0 uses min_cluster_size"},
      {"topics", "reduction", T::Enum, "pca", {"pca", "none"}, false, "projection before clustering"},
      {"topics", "n_components", T::Int, "5", {}, false, "projected dimensions"},
      {"topics", "min_df", T::Double, "0.05", {}, false, "minimum document frequency (fraction)"},
      {"topics", "k", T::Int, "10", {}, false, "topic words per topic"},
      {"topics", "n_representatives", T::Int, "3", {}, false, "representative posts per topic"},
      {"topics", "selection", T::Path, "", {}, false, "topic selection file; empty selects all"},
      {"topics", "output", T::Path, "${workdir}/topics/tagged.jsonl", {}, false, "pool of posts in selected topics"},

      {"sample", "input", T::Path, "${workdir}/topics/tagged.jsonl", {}, false, "tagged pool"},
      {"sample", "quotas", T::Path, "", {}, false, "per-topic quota file"},
      {"sample", "default_quota", T::Int, "100", {}, false, "quota when no quota file is given"},
      {"sample", "seed", T::Int, "17", {}, true, "draw seed"},
      {"sample", "n_months", T::Int, "3", {}, false, "month bins"},
      {"sample", "output", T::Path, "${workdir}/sample/manifest.json", {}, false, "sample manifest"},

      {"annotate", "mode", T::Enum, "replay", {"replay", "serve"}, false,
       "replay a decision file or serve the HTTP API"},
      {"annotate", "input", T::Path, "${workdir}/sample/sample.jsonl", {}, false, "items to annotate"},
      {"annotate", "annotations", T::Path, "", {}, false, "decision file for replay"},
      {"annotate", "annotators", T::List, "a1,a2", {}, false, "annotator ids"},
      {"annotate", "per_item", T::Int, "2", {}, false, "annotators per item"},
      {"annotate", "seed", T::Int, "0", {}, true, "assignment seed"},
      {"annotate", "guidelines", T::Path, "${data}/guidelines.md", {}, false, "guidelines served to annotators"},
      {"annotate", "catalog", T::Path, "${data}/taxonomy_catalog.tsv", {}, false, "fine category catalog"},
      {"annotate", "static_dir", T::Path, "", {}, false, "UI files mounted at /ui"},
      {"annotate", "host", T::String, "127.0.0.1", {}, false, "bind address"},
      {"annotate", "port", T::Int, "8080", {}, false, "bind port"},
      {"annotate", "output", T::Path, "${workdir}/annotate/dataset.csv", {}, false, "exported dataset"},

      {"bench", "dataset", T::Path, "${workdir}/annotate/dataset.csv", {}, false, "labelled dataset"},
      {"bench", "cut", T::String, "auto", {}, false, "auto, reference or a UTC timestamp"},
      {"bench", "adapter", T::Path, "", {}, false, "fine-tuning adapter config; empty uses bow-linear"},
      {"bench", "seeds", T::List, "42,62,82", {}, true, "training seeds"},
      {"bench", "prompt_specs", T::List, "", {}, false, "prompt spec files"},
      {"bench", "generative", T::Path, "", {}, false, "generative adapter config"},
      {"bench", "binary_adapters", T::List, "", {}, false, "binary toxicity adapter configs"},
      {"bench", "prompt_seed", T::Int, "42", {}, true, "decoding seed for generative runs"},
      {"bench", "prompt_sample", T::Int, "0", {}, false, "limit prompt runs to the first N test items (0 = all)"},

      {"eval", "min_support", T::Int, "10", {}, false, "slices below this support are flagged"},
      {"eval", "formats", T::List, "markdown,csv", {}, false, "table formats"},
      {"eval", "ablation_regions", T::List, "NorthAmerica,Other", {}, false, "regions kept for the ablation"},
  };
  return schema;
}

const KeySpec* find_key(std::string_view section, std::string_view key) {
  for (const auto& k : config_schema()) {
    if (k.section == section && k.key == key) return &k;
  }
  return nullptr;
}

namespace {

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end && !s.empty();
}

bool parse_bool(std::string_view s, bool& out) {
  const auto v = to_lower(trim(s));
  if (v == "true" || v == "yes" || v == "1" || v == "on") {
    out = true;
    return true;
  }
  if (v == "false" || v == "no" || v == "0" || v == "off") {
    out = false;
    return true;
  }
  return false;
}

std::optional<std::string> check_value(const KeySpec& spec, const std::string& value) {
  switch (spec.type) {
    case ValueType::Int: {
      std::int64_t v = 0;
      if (!parse_number(value, v)) return "expected an integer, got '" + value + "'";
      if (v < 0) return "must not be negative";
      break;
    }
    case ValueType::Double: {
      double v = 0;
      if (!parse_number(value, v)) return "expected a number, got '" + value + "'";
      break;
    }
    case ValueType::Bool: {
      bool v = false;
      if (!parse_bool(value, v)) return "expected true or false, got '" + value + "'";
      break;
    }
    case ValueType::Enum: {
      const auto v = to_lower(trim(value));
      if (std::find(spec.choices.begin(), spec.choices.end(), v) == spec.choices.end()) {
        std::string allowed;
        for (const auto& c : spec.choices) allowed += (allowed.empty() ? "" : ", ") + c;
        return "expected one of " + allowed + ", got '" + value + "'";
      }
      break;
    }
    default:
      break;
  }
  return std::nullopt;
}

}  // namespace

Config::Config() : data_dir_(APORO_DEFAULT_DATA_DIR) {
  for (const auto& k : config_schema()) values_[k.section][k.key] = k.default_value;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("config file not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto dir = fs::path(path).parent_path();
  return parse(ss.str(), dir.empty() ? "." : dir.string());
}

Config Config::parse(std::string_view text, const std::string& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({fmt::format("line {}: {}", e.line(), e.message())});
  }
  Config c;
  c.base_dir_ = base_dir;
  std::vector<std::string> problems;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      problems.push_back(section + ": key outside any section");
      continue;
    }
    bool known_section = false;
    for (const auto& k : config_schema()) known_section |= k.section == section;
    if (!known_section) {
      problems.push_back("[" + section + "]: unknown section");
      continue;
    }
    for (const auto& [key, value] : body) {
      const KeySpec* spec = find_key(section, key);
      if (!spec) {
        problems.push_back(section + "." + key + ": unknown key");
        continue;
      }
      const auto v = std::string(trim(value.data()));
      if (auto err = check_value(*spec, v)) {
        problems.push_back(section + "." + key + ": " + *err);
        continue;
      }
      c.values_[section][key] = spec->type == ValueType::Enum ? to_lower(v) : v;
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  for (const auto& k : config_schema()) {
    if (!k.warn_if_missing) continue;
    const auto it = tree.find(k.section);
    if (it == tree.not_found() || !it->second.count(k.key)) {
      c.warnings_.push_back(
          fmt::format("{}.{}: not set, using default {}", k.section, k.key, k.default_value));
    }
  }
  return c;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(section, key);
  if (!spec) throw ConfigError({section + "." + key + ": unknown key"});
  if (auto err = check_value(*spec, value)) throw ConfigError({section + "." + key + ": " + *err});
  values_[section][key] = spec->type == ValueType::Enum ? to_lower(value) : value;
}

bool Config::is_set(const std::string& section, const std::string& key) const {
  const KeySpec* spec = find_key(section, key);
  return spec && raw(section, key) != spec->default_value;
}

std::string Config::raw(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  if (s == values_.end()) throw ContractViolation("unknown config section " + section);
  const auto k = s->second.find(key);
  if (k == s->second.end()) throw ContractViolation("unknown config key " + section + "." + key);
  return k->second;
}

std::string Config::expand(const std::string& value) const {
  std::string out = value;
  auto replace = [&](const std::string& token, const std::string& with) {
    for (std::size_t pos; (pos = out.find(token)) != std::string::npos;) out.replace(pos, token.size(), with);
  };
  replace("${workdir}", workdir_);
  replace("${data}", data_dir_);
  return out;
}

std::string Config::get_string(const std::string& section, const std::string& key) const { return raw(section, key); }

std::string Config::get_path(const std::string& section, const std::string& key) const {
  const auto v = expand(raw(section, key));
  if (v.empty()) return v;
  fs::path p(v);
  if (p.is_relative() && raw(section, key).rfind("${", 0) != 0) p = fs::path(base_dir_) / p;
  return p.lexically_normal().string();
}

std::int64_t Config::get_int(const std::string& section, const std::string& key) const {
  std::int64_t v = 0;
  if (!parse_number(raw(section, key), v)) throw ConfigError({section + "." + key + ": expected an integer"});
  return v;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  double v = 0;
  if (!parse_number(raw(section, key), v)) throw ConfigError({section + "." + key + ": expected a number"});
  return v;
}

bool Config::get_bool(const std::string& section, const std::string& key) const {
  bool v = false;
  if (!parse_bool(raw(section, key), v)) throw ConfigError({section + "." + key + ": expected true or false"});
  return v;
}

std::vector<std::string> Config::get_list(const std::string& section, const std::string& key) const {
  std::vector<std::string> out;
  const auto v = raw(section, key);
  std::size_t start = 0;
  while (start <= v.size()) {
    auto end = v.find(',', start);
    if (end == std::string::npos) end = v.size();
    const auto item = trim(std::string_view(v).substr(start, end - start));
    if (!item.empty()) out.emplace_back(item);
    start = end + 1;
  }
  return out;
}

std::vector<std::string> Config::get_path_list(const std::string& section, const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& item : get_list(section, key)) {
    fs::path p(expand(item));
    if (p.is_relative() && item.rfind("${", 0) != 0) p = fs::path(base_dir_) / p;
    out.push_back(p.lexically_normal().string());
  }
  return out;
}

nlohmann::json Config::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [section, keys] : values_) {
    for (const auto& [key, value] : keys) j[section][key] = value;
  }
  return j;
}

std::string Config::hash() const { return sha256_hex(to_json().dump()); }

std::string Config::to_ini() const {
  std::string out;
  std::string current;
  for (const auto& k : config_schema()) {
    if (k.section != current) {
      out += (current.empty() ? "" : "\n") + fmt::format("[{}]\n", k.section);
      current = k.section;
    }
    out += fmt::format("# {}\n{} = {}\n", k.doc, k.key, raw(k.section, k.key));
  }
  return out;
}

ValidationResult validate_config(const std::string& path) {
  ValidationResult r;
  try {
    const auto c = Config::load(path);
    r.warnings = c.warnings();
  } catch (const ConfigError& e) {
    r.ok = false;
    r.errors = e.problems();
  }
  return r;
}

std::vector<std::uint64_t> parse_seed_list(const std::vector<std::string>& items) {
  std::vector<std::uint64_t> out;
  for (const auto& s : items) {
    std::uint64_t v = 0;
    if (!parse_number(s, v)) throw ConfigError({"seed list: '" + s + "' is not an unsigned integer"});
    out.push_back(v);
  }
  return out;
}

}  // namespace aporo::pipeline
