#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/bench/harness.hpp"
#include "aporo/common/label.hpp"

namespace aporo::eval {

/// Class names in table order.
const std::vector<std::string>& ternary_classes();
const std::vector<std::string>& binary_classes();

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  std::size_t predicted = 0;
  /// Set when the value was 0/0 and reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

/// Accuracy and support-weighted precision, recall and F1.
struct Metrics {
  std::size_t n = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<ClassMetrics> per_class;

  nlohmann::json to_json() const;
  static Metrics from_json(const nlohmann::json& j);
};

/// Class indices into `classes`. Throws on empty or unequal input.
Metrics weighted_metrics(std::span<const int> gold, std::span<const int> pred, const std::vector<std::string>& classes);
Metrics weighted_metrics(std::span<const Label> gold, std::span<const Label> pred);
/// Class names are looked up in `classes`; unknown names are an error.
Metrics weighted_metrics(const std::vector<bench::Prediction>& predictions, const std::vector<std::string>& classes);

struct SliceRow {
  std::string slice;
  std::size_t support = 0;
  bool low_support = false;
  Metrics metrics;
};

/// Weighted metrics within each distinct tag, ordered by tag. Every item
/// needs a non-empty tag.
std::vector<SliceRow> slice_report(const std::vector<bench::Prediction>& predictions,
                                   const std::vector<std::string>& tags, const std::vector<std::string>& classes,
                                   std::size_t min_support);

struct Spread {
  double min = 0.0;
  double max = 0.0;
};

struct EvalReport {
  std::string model_id;
  std::string label_space = "ternary";
  std::vector<std::uint64_t> seeds;
  Metrics overall;
  std::vector<SliceRow> by_region;
  std::vector<SliceRow> by_topic;
  std::size_t parse_failures = 0;
  /// Digest of the (id, gold) pairs the report was scored on.
  std::string gold_digest;
  /// Headline metric ranges across seeds.
  std::map<std::string, Spread> spread;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

struct EvaluateOptions {
  std::size_t min_support = 10;
  bool binary = false;
};

/// Scores one seed's predictions; region and topic slices come from `rows`.
EvalReport evaluate(const std::string& model_id, const std::vector<bench::Prediction>& predictions,
                    const std::vector<data::DatasetRow>& rows, const EvaluateOptions& options = {});

/// Element-wise mean over per-seed reports. Throws on an empty list or
/// reports scored on different gold sets.
EvalReport seed_average(const std::vector<EvalReport>& reports);

}  // namespace aporo::eval
