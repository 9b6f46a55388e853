#include "aporo/bench/split.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "aporo/common/error.hpp"
#include "aporo/common/hash.hpp"

namespace aporo::bench {

nlohmann::json DatasetSplit::to_json() const {
  return {{"cut", format_timestamp(cut)}, {"train_ids", train_ids}, {"test_ids", test_ids}};
}

DatasetSplit DatasetSplit::from_json(const nlohmann::json& j) {
  try {
    DatasetSplit s;
    const auto cut = parse_timestamp(j.at("cut").get<std::string>());
    if (!cut) throw ParseError("split: bad cut timestamp");
    s.cut = *cut;
    s.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    s.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("split: ") + e.what());
  }
}

DatasetSplit chronological_split(const std::vector<data::DatasetRow>& rows, std::optional<Timestamp> cut) {
  if (rows.empty()) throw ContractViolation("cannot split an empty dataset");
  Timestamp lo = Timestamp::max(), hi = Timestamp::min();
  for (const auto& r : rows) {
    if (!r.created_at) throw ContractViolation("row '" + r.id + "' has no timestamp");
    lo = std::min(lo, *r.created_at);
    hi = std::max(hi, *r.created_at);
  }
  DatasetSplit s;
  s.cut = cut ? *cut : lo + (hi - lo) * 2 / 3;
  for (const auto& r : rows) (*r.created_at < s.cut ? s.train_ids : s.test_ids).push_back(r.id);
  if (s.train_ids.empty()) throw ContractViolation("split leaves the training side empty (cut " + format_timestamp(s.cut) + ")");
  if (s.test_ids.empty()) throw ContractViolation("split leaves the test side empty (cut " + format_timestamp(s.cut) + ")");
  return s;
}

std::vector<std::vector<std::string>> kfold_split(const std::vector<data::DatasetRow>& rows, std::size_t k,
                                                  std::uint64_t seed) {
  if (k < 2) throw ContractViolation(fmt::format("k must be at least 2, got {}", k));
  if (k > rows.size()) throw ContractViolation(fmt::format("k {} exceeds {} rows", k, rows.size()));
  std::vector<std::vector<std::string>> folds(k);
  std::size_t slot = 0;
  for (Label l : kAllLabels) {
    std::vector<std::pair<std::uint64_t, const std::string*>> members;
    for (const auto& r : rows) {
      if (r.label == l) members.emplace_back(keyed_hash(seed, r.id), &r.id);
    }
    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) { return a.first != b.first ? a.first < b.first : *a.second < *b.second; });
    for (const auto& m : members) folds[slot++ % k].push_back(*m.second);
  }
  return folds;
}

}  // namespace aporo::bench
