#include "aporo/sample/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "aporo/common/error.hpp"
#include "aporo/common/hash.hpp"
#include "aporo/common/text.hpp"

namespace aporo::sample {

std::optional<int> collection_month(Timestamp t, std::chrono::sys_days start, int n_months) {
  using namespace std::chrono;
  if (t < start) return std::nullopt;
  const auto days_in = duration_cast<days>(t - sys_seconds(start)).count();
  const auto month = days_in / kMonthLength.count();
  if (month < n_months) return static_cast<int>(month);
  if (t <= sys_seconds(start + kMonthLength * n_months)) return n_months - 1;
  return std::nullopt;
}

std::uint64_t draw_key(std::uint64_t seed, const StratumKey& s, const std::string& id) {
  std::uint64_t stratum_seed = hash_combine(seed, static_cast<std::uint64_t>(s.topic_id));
  stratum_seed = hash_combine(stratum_seed, index_of(s.region));
  stratum_seed = hash_combine(stratum_seed, static_cast<std::uint64_t>(s.month));
  return keyed_hash(stratum_seed, id);
}

SampleManifest stratified_sample(std::span<const PoolItem> pool, const std::map<int, std::size_t>& quotas,
                                 std::uint64_t seed, const SampleOptions& options) {
  if (options.n_months < 1) throw ContractViolation("n_months must be positive");
  SampleManifest m;
  m.seed = seed;
  m.n_months = options.n_months;

  std::map<StratumKey, std::vector<const PoolItem*>> members;
  std::unordered_set<std::string_view> ids;
  for (const auto& item : pool) {
    if (!ids.insert(item.id).second) throw ContractViolation("duplicate pool id '" + item.id + "'");
    if (item.month < 0 || item.month >= options.n_months) {
      throw ContractViolation(fmt::format("pool item '{}' has month {} outside the window", item.id, item.month));
    }
    if (!quotas.contains(item.topic_id)) continue;
    members[{item.topic_id, item.region, item.month}].push_back(&item);
  }
  if (pool.empty()) return m;
  m.quotas = quotas;

  for (const auto& [topic, quota] : quotas) {
    std::vector<StratumKey> keys;
    for (Region r : kAllRegions) {
      for (int mo = 0; mo < options.n_months; ++mo) keys.push_back({topic, r, mo});
    }
    const std::size_t n_strata = keys.size();

    // Largest remainder: all remainders are equal, so the extra units go to
    // strata in seeded-hash order.
    std::vector<std::size_t> order(n_strata);
    for (std::size_t i = 0; i < n_strata; ++i) order[i] = i;
    auto rank = [&](std::size_t i) {
      return keyed_hash(hash_combine(seed, static_cast<std::uint64_t>(topic)),
                        fmt::format("{}/{}", to_string(keys[i].region), keys[i].month));
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto ra = rank(a), rb = rank(b);
      return ra != rb ? ra < rb : a < b;
    });
    for (std::size_t i = 0; i < n_strata; ++i) {
      StratumCount& c = m.strata[keys[i]];
      c.target = quota / n_strata;
      auto it = members.find(keys[i]);
      c.available = it == members.end() ? 0 : it->second.size();
    }
    for (std::size_t i = 0; i < quota % n_strata; ++i) ++m.strata[keys[order[i]]].target;

    std::size_t deficit = 0;
    for (const auto& k : keys) {
      StratumCount& c = m.strata[k];
      c.requested = c.target;
      if (c.available < c.target) {
        m.shortfalls.push_back({k, c.target - c.available});
        deficit += c.target - c.available;
      }
    }
    // Hand the deficit out one unit at a time to the stratum with the most
    // spare capacity; ties go to the earlier stratum.
    while (deficit > 0) {
      const StratumKey* best = nullptr;
      std::size_t best_cap = 0;
      for (const auto& k : keys) {
        const StratumCount& c = m.strata[k];
        const std::size_t cap = c.available > c.requested ? c.available - c.requested : 0;
        if (cap > best_cap) {
          best_cap = cap;
          best = &k;
        }
      }
      if (!best) break;
      ++m.strata[*best].requested;
      --deficit;
    }
    if (deficit > 0) m.unfilled[topic] = deficit;

    for (const auto& k : keys) {
      StratumCount& c = m.strata[k];
      c.achieved = std::min(c.requested, c.available);
      if (c.achieved == 0) continue;
      auto& list = members[k];
      std::vector<std::pair<std::uint64_t, const std::string*>> keyed;
      keyed.reserve(list.size());
      for (const PoolItem* p : list) keyed.emplace_back(draw_key(seed, k, p->id), &p->id);
      std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(c.achieved), keyed.end(),
                        [](const auto& a, const auto& b) { return a.first != b.first ? a.first < b.first : *a.second < *b.second; });
      for (std::size_t i = 0; i < c.achieved; ++i) m.sampled_ids.push_back(*keyed[i].second);
    }
  }
  return m;
}

namespace {

nlohmann::json stratum_json(const StratumKey& k) {
  return {{"topic_id", k.topic_id}, {"region", std::string(to_string(k.region))}, {"month", k.month}};
}

StratumKey stratum_from_json(const nlohmann::json& j) {
  auto region = region_from_string(j.at("region").get<std::string>());
  if (!region) throw ParseError("unknown region " + j.at("region").dump());
  return {j.at("topic_id").get<int>(), *region, j.at("month").get<int>()};
}

}  // namespace

nlohmann::json SampleManifest::to_json() const {
  nlohmann::json q = nlohmann::json::object();
  for (const auto& [t, n] : quotas) q[std::to_string(t)] = n;
  nlohmann::json s = nlohmann::json::array();
  for (const auto& [k, c] : strata) {
    auto row = stratum_json(k);
    row["available"] = c.available;
    row["target"] = c.target;
    row["requested"] = c.requested;
    row["achieved"] = c.achieved;
    s.push_back(std::move(row));
  }
  nlohmann::json sf = nlohmann::json::array();
  for (const auto& f : shortfalls) {
    auto row = stratum_json(f.stratum);
    row["deficit"] = f.deficit;
    sf.push_back(std::move(row));
  }
  nlohmann::json u = nlohmann::json::object();
  for (const auto& [t, n] : unfilled) u[std::to_string(t)] = n;
  return {{"seed", seed},       {"n_months", n_months}, {"quotas", q},          {"strata", s},
          {"shortfalls", sf},   {"unfilled", u},        {"sampled_ids", sampled_ids}};
}

SampleManifest SampleManifest::from_json(const nlohmann::json& j) {
  try {
    SampleManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n_months = j.at("n_months").get<int>();
    for (const auto& [t, n] : j.at("quotas").items()) m.quotas[std::stoi(t)] = n.get<std::size_t>();
    for (const auto& row : j.at("strata")) {
      StratumCount c;
      c.available = row.at("available").get<std::size_t>();
      c.target = row.at("target").get<std::size_t>();
      c.requested = row.at("requested").get<std::size_t>();
      c.achieved = row.at("achieved").get<std::size_t>();
      m.strata[stratum_from_json(row)] = c;
    }
    for (const auto& row : j.at("shortfalls")) m.shortfalls.push_back({stratum_from_json(row), row.at("deficit").get<std::size_t>()});
    for (const auto& [t, n] : j.at("unfilled").items()) m.unfilled[std::stoi(t)] = n.get<std::size_t>();
    m.sampled_ids = j.at("sampled_ids").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sample manifest: ") + e.what());
  }
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json gaps = nlohmann::json::object();
  for (const auto& [t, g] : uniformity_gap) gaps[std::to_string(t)] = g;
  return {{"ok", ok}, {"violations", violations}, {"uniformity_gap", gaps}};
}

VerifyReport verify_manifest(const SampleManifest& m, std::span<const PoolItem> pool) {
  VerifyReport r;
  auto fail = [&](std::string msg) {
    r.ok = false;
    r.violations.push_back(std::move(msg));
  };

  std::unordered_map<std::string_view, const PoolItem*> by_id;
  for (const auto& p : pool) by_id.emplace(p.id, &p);

  std::map<StratumKey, std::size_t> drawn;
  std::unordered_set<std::string_view> seen;
  for (const auto& id : m.sampled_ids) {
    if (!seen.insert(id).second) fail("duplicate sampled id '" + id + "'");
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      fail("sampled id '" + id + "' is not in the pool");
      continue;
    }
    ++drawn[{it->second->topic_id, it->second->region, it->second->month}];
  }

  std::size_t total = 0;
  std::map<int, std::size_t> per_topic;
  std::map<int, std::pair<std::size_t, std::size_t>> range;
  std::set<int> short_topics;
  for (const auto& f : m.shortfalls) short_topics.insert(f.stratum.topic_id);
  for (const auto& [k, c] : m.strata) {
    const auto label = fmt::format("stratum ({}, {}, {})", k.topic_id, to_string(k.region), k.month);
    if (c.achieved > c.requested) fail(label + ": achieved exceeds requested");
    if (c.achieved > c.available) fail(label + ": achieved exceeds available");
    const std::size_t got = drawn.contains(k) ? drawn.at(k) : 0;
    if (got != c.achieved) fail(fmt::format("{}: {} sampled ids but achieved {}", label, got, c.achieved));
    total += c.achieved;
    per_topic[k.topic_id] += c.achieved;
    auto [it, fresh] = range.try_emplace(k.topic_id, c.achieved, c.achieved);
    if (!fresh) {
      it->second.first = std::min(it->second.first, c.achieved);
      it->second.second = std::max(it->second.second, c.achieved);
    }
  }
  for (const auto& [k, n] : drawn) {
    if (!m.strata.contains(k)) fail(fmt::format("sampled ids in unlisted stratum ({}, {}, {})", k.topic_id, to_string(k.region), k.month));
  }
  if (total != m.sampled_ids.size()) {
    fail(fmt::format("sum of achieved {} differs from {} sampled ids", total, m.sampled_ids.size()));
  }
  for (const auto& [topic, quota] : m.quotas) {
    const std::size_t got = per_topic[topic];
    const std::size_t unfilled = m.unfilled.contains(topic) ? m.unfilled.at(topic) : 0;
    if (got + unfilled != quota) {
      fail(fmt::format("topic {}: achieved {} + unfilled {} != quota {}", topic, got, unfilled, quota));
    }
    const auto [lo, hi] = range.contains(topic) ? range.at(topic) : std::pair<std::size_t, std::size_t>{0, 0};
    r.uniformity_gap[topic] = hi - lo;
    if (!short_topics.contains(topic) && hi - lo > 1) {
      fail(fmt::format("topic {}: uniformity gap {} without shortfalls", topic, hi - lo));
    }
  }
  return r;
}

std::map<int, std::size_t> load_quotas(const std::string& path, const std::vector<int>& topics) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open quota file " + path);
  std::map<int, std::size_t> explicit_quotas;
  std::optional<std::size_t> fallback;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (text::trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string key;
    long long value = -1;
    std::string extra;
    if (!(fields >> key >> value) || (fields >> extra) || value <= 0) {
      throw ParseError("expected '<topic> <positive quota>'", line_no);
    }
    if (key == "default") {
      fallback = static_cast<std::size_t>(value);
      continue;
    }
    try {
      std::size_t used = 0;
      const int topic = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
      if (!explicit_quotas.emplace(topic, static_cast<std::size_t>(value)).second) {
        throw ParseError(fmt::format("topic {} listed twice", topic), line_no);
      }
    } catch (const std::logic_error&) {
      throw ParseError("bad topic id '" + key + "'", line_no);
    }
  }
  std::map<int, std::size_t> out;
  for (int t : topics) {
    if (auto it = explicit_quotas.find(t); it != explicit_quotas.end()) {
      out[t] = it->second;
    } else if (fallback) {
      out[t] = *fallback;
    } else {
      throw ParseError(fmt::format("no quota for topic {} and no default", t));
    }
  }
  return out;
}

}  // namespace aporo::sample
