#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/data/dataset.hpp"

namespace aporo::bench {

struct DatasetSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  Timestamp cut{};

  nlohmann::json to_json() const;
  static DatasetSplit from_json(const nlohmann::json& j);
};

/// Start of the last collection month: rows before it train, the rest test.
inline constexpr Timestamp kReferenceCut{std::chrono::sys_days{std::chrono::year{2022} / 10 / 24}};

/// Rows with created_at < cut train, the rest test. Without `cut` the cut
/// sits two thirds of the way from the earliest to the latest timestamp.
/// Throws if a row lacks a timestamp or either side is empty.
DatasetSplit chronological_split(const std::vector<data::DatasetRow>& rows, std::optional<Timestamp> cut = {});

/// Label-stratified folds; sizes differ by at most one.
std::vector<std::vector<std::string>> kfold_split(const std::vector<data::DatasetRow>& rows, std::size_t k,
                                                  std::uint64_t seed);

}  // namespace aporo::bench
