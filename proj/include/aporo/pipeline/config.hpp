#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/common/error.hpp"

namespace aporo::pipeline {

/// A config file broke the schema. `problems` holds one "section.key: reason"
/// entry per violation.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class ValueType { String, Path, Int, Double, Bool, List, Enum };

struct KeySpec {
  std::string section;
  std::string key;
  ValueType type = ValueType::String;
  /// Default as written in a config file. "${workdir}" and "${data}" expand
  /// when the value is read as a path.
  std::string default_value;
  /// Allowed values for Enum keys.
  std::vector<std::string> choices;
  /// Missing value is reported as a warning and the default is used.
  bool warn_if_missing = false;
  std::string doc;
};

/// Every accepted section and key with its type and default.
const std::vector<KeySpec>& config_schema();

const KeySpec* find_key(std::string_view section, std::string_view key);

/// Effective pipeline configuration: explicit values over schema defaults.
class Config {
 public:
  Config();

  /// Parses an INI file. Unknown sections or keys and malformed values raise
  /// ConfigError listing all of them; MissingInput when the file is absent.
  static Config load(const std::string& path);
  static Config parse(std::string_view text, const std::string& base_dir = ".");

  /// Sets a value after checking it against the schema.
  void set(const std::string& section, const std::string& key, const std::string& value);
  bool is_set(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key) const;
  /// Expanded and resolved against the config file's directory; empty stays empty.
  std::string get_path(const std::string& section, const std::string& key) const;
  std::int64_t get_int(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  /// Comma-separated, trimmed, empties dropped.
  std::vector<std::string> get_list(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_path_list(const std::string& section, const std::string& key) const;

  const std::string& base_dir() const { return base_dir_; }
  const std::string& workdir() const { return workdir_; }
  void set_workdir(std::string workdir) { workdir_ = std::move(workdir); }
  void set_data_dir(std::string dir) { data_dir_ = std::move(dir); }

  /// Defaults filled for missing seed-like keys.
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// All effective values, section -> key -> raw string.
  nlohmann::json to_json() const;
  /// sha256 of the canonical effective values. Independent of the workdir.
  std::string hash() const;
  /// INI text with every effective value.
  std::string to_ini() const;

 private:
  std::string raw(const std::string& section, const std::string& key) const;
  std::string expand(const std::string& value) const;

  std::map<std::string, std::map<std::string, std::string>> values_;
  std::string base_dir_ = ".";
  std::string workdir_ = "work";
  std::string data_dir_;
  std::vector<std::string> warnings_;
};

struct ValidationResult {
  bool ok = true;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
};

ValidationResult validate_config(const std::string& path);

/// Parses a comma-separated list of unsigned 64-bit integers.
std::vector<std::uint64_t> parse_seed_list(const std::vector<std::string>& items);

}  // namespace aporo::pipeline
