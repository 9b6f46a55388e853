#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/common/region.hpp"
#include "aporo/common/time.hpp"

namespace aporo::sample {

/// First day of the collection window and the month-bin width.
inline constexpr std::chrono::sys_days kWindowStart{std::chrono::year{2022} / 8 / 25};
inline constexpr std::chrono::days kMonthLength{30};
inline constexpr int kNumMonths = 3;

/// 0-based month bin of `t` within the window; nullopt outside it. The last
/// bin is closed so the final window day still counts.
std::optional<int> collection_month(Timestamp t, std::chrono::sys_days start = kWindowStart, int n_months = kNumMonths);

struct PoolItem {
  std::string id;
  int topic_id = 0;
  Region region = Region::Other;
  int month = 0;
};

struct StratumKey {
  int topic_id = 0;
  Region region = Region::Other;
  int month = 0;

  auto operator<=>(const StratumKey&) const = default;
};

struct StratumCount {
  std::size_t available = 0;
  /// Largest-remainder share of the quota.
  std::size_t target = 0;
  /// target plus redistributed deficit.
  std::size_t requested = 0;
  std::size_t achieved = 0;
};

struct Shortfall {
  StratumKey stratum;
  std::size_t deficit = 0;
};

struct SampleManifest {
  std::uint64_t seed = 0;
  int n_months = kNumMonths;
  std::map<int, std::size_t> quotas;
  std::map<StratumKey, StratumCount> strata;
  /// Strata that could not meet their target.
  std::vector<Shortfall> shortfalls;
  /// Per-topic deficit left after redistribution.
  std::map<int, std::size_t> unfilled;
  std::vector<std::string> sampled_ids;

  nlohmann::json to_json() const;
  static SampleManifest from_json(const nlohmann::json& j);
};

struct SampleOptions {
  int n_months = kNumMonths;
};

/// Region x month stratified draw per topic. Topics absent from `quotas`
/// are ignored. Pool ids must be unique.
SampleManifest stratified_sample(std::span<const PoolItem> pool, const std::map<int, std::size_t>& quotas,
                                 std::uint64_t seed, const SampleOptions& options = {});

/// Position of an item in its stratum's draw order (smaller is drawn first).
std::uint64_t draw_key(std::uint64_t seed, const StratumKey& stratum, const std::string& id);

struct VerifyReport {
  bool ok = true;
  std::vector<std::string> violations;
  /// max - min achieved over a topic's strata.
  std::map<int, std::size_t> uniformity_gap;

  nlohmann::json to_json() const;
};

VerifyReport verify_manifest(const SampleManifest& manifest, std::span<const PoolItem> pool);

/// "<topic id> <quota>" lines plus an optional "default <quota>" line applied
/// to every id in `topics` without an explicit entry. '#' starts a comment.
std::map<int, std::size_t> load_quotas(const std::string& path, const std::vector<int>& topics);

}  // namespace aporo::sample
