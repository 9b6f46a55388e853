#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/bench/harness.hpp"
#include "aporo/eval/metrics.hpp"

namespace aporo::eval {

/// Region order used by the per-region tables.
inline constexpr std::array<Region, kNumRegions> kTableRegionOrder{Region::Africa,  Region::Europe,
                                                                   Region::NorthAmerica, Region::Oceania,
                                                                   Region::SouthAsia, Region::Other};

inline const std::vector<Region> kDominantRegions = {Region::NorthAmerica, Region::Other};

struct AblationResult {
  std::vector<Region> kept;
  std::size_t baseline_train_size = 0;
  std::size_t ablated_train_size = 0;
  std::vector<std::vector<bench::Prediction>> baseline_predictions;
  std::vector<std::vector<bench::Prediction>> ablated_predictions;
  EvalReport baseline;
  EvalReport ablated;

  nlohmann::json to_json() const;
  static AblationResult from_json(const nlohmann::json& j);
};

/// Trains on the full and the region-filtered training split with the same
/// seeds and scores both on the full test split. `baseline` reuses existing
/// full-training predictions when given.
AblationResult region_ablation(const bench::FinetuneAdapter& adapter, const std::vector<data::DatasetRow>& rows,
                               const bench::DatasetSplit& split, const std::vector<std::uint64_t>& seeds,
                               const std::vector<Region>& kept = kDominantRegions,
                               const std::vector<std::vector<bench::Prediction>>* baseline = nullptr,
                               std::size_t min_support = 10);

struct SplitCounts {
  std::array<std::size_t, kNumLabels> train{};
  std::array<std::size_t, kNumLabels> test{};
};

SplitCounts split_counts(const std::vector<data::DatasetRow>& rows, const bench::DatasetSplit& split);

/// Everything the report tables are built from.
struct ReportBundle {
  std::optional<SplitCounts> split;
  std::optional<data::ClassCounts> dataset;
  std::vector<EvalReport> models;
  std::vector<EvalReport> binary_models;
  std::optional<AblationResult> ablation;

  nlohmann::json to_json() const;
  static ReportBundle from_json(const nlohmann::json& j);
};

enum class TableFormat { Markdown, Csv };

/// Half-up rounding to two decimals.
double round2(double x);
std::string format2(double x);

/// Writes table1, table2, tableA1, tableA2 and tableA3 (.md or .csv) into
/// `dir`; sections without data get a header-only table. Returns the paths.
std::vector<std::string> emit_tables(const ReportBundle& bundle, TableFormat format, const std::string& dir);

/// id, region, gold, pred, text for every wrong prediction.
void write_misclassified(const std::string& path, const std::vector<bench::Prediction>& predictions,
                         const std::vector<data::DatasetRow>& rows);

}  // namespace aporo::eval
