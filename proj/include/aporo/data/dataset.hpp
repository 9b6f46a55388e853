#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "aporo/common/label.hpp"
#include "aporo/common/region.hpp"
#include "aporo/common/time.hpp"

namespace aporo::data {

/// One labelled post of the final dataset.
struct DatasetRow {
  std::string id;
  std::string text;
  Label label = Label::None;
  std::optional<Region> region;
  std::optional<int> topic_id;
  std::optional<int> month;
  std::optional<Timestamp> created_at;
  /// Raw location strings, when the file carries them.
  std::optional<std::string> place_country;
  std::optional<std::string> user_location;
};

/// Reads a labelled CSV/TSV. Required columns: id, text, label. Optional:
/// region, topic_id, month, created_at, place_country/place,
/// user_location. Column names are case-insensitive.
std::vector<DatasetRow> load_dataset(const std::string& path);

/// Writes id, text, region, topic_id, month, created_at, label.
void write_dataset(const std::string& path, const std::vector<DatasetRow>& rows);

struct ClassCounts {
  std::array<std::size_t, kNumLabels> by_label{};
  std::array<std::array<std::size_t, kNumLabels>, kNumRegions> by_region{};
  std::size_t total = 0;
  std::size_t without_region = 0;
};

ClassCounts count_classes(const std::vector<DatasetRow>& rows);

}  // namespace aporo::data
