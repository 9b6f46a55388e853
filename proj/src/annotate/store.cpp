#include "aporo/annotate/store.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>

#include <fmt/format.h>

#include "aporo/common/hash.hpp"

namespace aporo::annotate {

namespace {

template <typename T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  if (v) {
    j[key] = *v;
  } else {
    j[key] = nullptr;
  }
}

std::optional<Label> label_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto l = label_from_string(j.at(key).get<std::string>());
  if (!l) throw ParseError(std::string("unknown label ") + j.at(key).dump());
  return l;
}

Item item_from_json(const nlohmann::json& j) {
  Item it;
  it.id = j.at("id").get<std::string>();
  it.text = j.at("text").get<std::string>();
  if (j.contains("region") && !j["region"].is_null()) it.region = region_from_string(j["region"].get<std::string>());
  if (j.contains("topic_id") && !j["topic_id"].is_null()) it.topic_id = j["topic_id"].get<int>();
  if (j.contains("month") && !j["month"].is_null()) it.month = j["month"].get<int>();
  if (j.contains("created_at") && !j["created_at"].is_null()) {
    it.created_at = parse_timestamp(j["created_at"].get<std::string>());
  }
  return it;
}

AnnotationRecord record_from_json(const nlohmann::json& j) {
  AnnotationRecord r;
  r.item_id = j.at("item_id").get<std::string>();
  r.annotator_id = j.at("annotator_id").get<std::string>();
  r.label = label_field(j, "label");
  r.insufficient_context = j.value("insufficient_context", false);
  r.round = j.value("round", 0);
  if (auto ts = parse_timestamp(j.value("timestamp", ""))) r.timestamp = *ts;
  r.submission_id = j.value("submission_id", "");
  return r;
}

AdjudicatedItem adjudicated_from_json(const nlohmann::json& j) {
  AdjudicatedItem a;
  a.item_id = j.at("item_id").get<std::string>();
  a.final_label = label_field(j, "final_label");
  a.removed = j.value("removed", false);
  a.resolution_note = j.value("resolution_note", "");
  a.automatic = j.value("automatic", false);
  return a;
}

}  // namespace

nlohmann::json to_json(const Item& item, bool with_metadata) {
  nlohmann::json j = {{"id", item.id}, {"text", item.text}};
  if (!with_metadata) return j;
  j["region"] = item.region ? nlohmann::json(std::string(to_string(*item.region))) : nlohmann::json(nullptr);
  put_optional(j, "topic_id", item.topic_id);
  put_optional(j, "month", item.month);
  j["created_at"] = item.created_at ? nlohmann::json(format_timestamp(*item.created_at)) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const AnnotationRecord& r) {
  return {{"item_id", r.item_id},
          {"annotator_id", r.annotator_id},
          {"label", r.label ? nlohmann::json(std::string(to_string(*r.label))) : nlohmann::json(nullptr)},
          {"insufficient_context", r.insufficient_context},
          {"round", r.round},
          {"timestamp", format_timestamp(r.timestamp)},
          {"submission_id", r.submission_id}};
}

nlohmann::json to_json(const AdjudicatedItem& a) {
  return {{"item_id", a.item_id},
          {"final_label", a.final_label ? nlohmann::json(std::string(to_string(*a.final_label))) : nlohmann::json(nullptr)},
          {"removed", a.removed},
          {"resolution_note", a.resolution_note},
          {"automatic", a.automatic}};
}

nlohmann::json ExportSummary::to_json() const {
  nlohmann::json labels = nlohmann::json::object();
  for (Label l : kAllLabels) labels[std::string(to_string(l))] = counts.by_label[index_of(l)];
  nlohmann::json regions = nlohmann::json::object();
  for (Region r : kAllRegions) {
    nlohmann::json row = nlohmann::json::object();
    std::size_t total = 0;
    for (Label l : kAllLabels) {
      row[std::string(to_string(l))] = counts.by_region[index_of(r)][index_of(l)];
      total += counts.by_region[index_of(r)][index_of(l)];
    }
    row["total"] = total;
    regions[std::string(to_string(r))] = row;
  }
  return {{"rows", rows}, {"removed", removed}, {"labels", labels}, {"regions", regions}};
}

Assignment assign_items(const std::vector<std::string>& item_ids, const std::vector<std::string>& annotators,
                        std::size_t per_item, std::uint64_t seed) {
  if (per_item == 0) throw ContractViolation("per_item must be positive");
  if (per_item > annotators.size()) {
    throw ContractViolation(fmt::format("per_item {} exceeds {} annotators", per_item, annotators.size()));
  }
  std::vector<std::string> perm = annotators;
  std::sort(perm.begin(), perm.end());
  if (std::adjacent_find(perm.begin(), perm.end()) != perm.end()) throw ContractViolation("duplicate annotator id");
  std::stable_sort(perm.begin(), perm.end(), [&](const std::string& a, const std::string& b) {
    return keyed_hash(seed, a) < keyed_hash(seed, b);
  });
  Assignment out;
  std::size_t slot = 0;
  for (const auto& id : item_ids) {
    auto& list = out[id];
    if (!list.empty()) throw ContractViolation("duplicate item id '" + id + "'");
    for (std::size_t j = 0; j < per_item; ++j) list.push_back(perm[slot++ % perm.size()]);
  }
  return out;
}

std::vector<std::string> disagreement_queue(const std::vector<AnnotationRecord>& records) {
  std::map<std::string, std::vector<const AnnotationRecord*>> by_item;
  for (const auto& r : records) {
    if (r.round == 0) by_item[r.item_id].push_back(&r);
  }
  std::vector<std::string> out;
  for (const auto& [id, recs] : by_item) {
    if (recs.size() < 2) continue;
    const bool conflict = std::any_of(recs.begin(), recs.end(), [&](const AnnotationRecord* r) {
      return r->insufficient_context || !r->label || r->label != recs.front()->label;
    });
    if (conflict) out.push_back(id);
  }
  return out;
}

AnnotationStore::AnnotationStore(std::string log_path, Clock clock)
    : log_path_(std::move(log_path)), clock_(std::move(clock)) {
  if (!clock_) {
    clock_ = [] { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); };
  }
  if (log_path_.empty()) return;
  if (std::filesystem::exists(log_path_)) {
    std::ifstream in(log_path_);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        apply(nlohmann::json::parse(line), false);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("annotation log: ") + e.what(), line_no);
      } catch (const StoreError& e) {
        throw ParseError(std::string("annotation log: ") + e.what(), line_no);
      }
    }
  }
  log_.open(log_path_, std::ios::app | std::ios::binary);
  if (!log_) throw Error("cannot open annotation log " + log_path_);
}

void AnnotationStore::append(const nlohmann::json& event) {
  if (!log_.is_open()) return;
  log_ << event.dump() << '\n';
  log_.flush();
  if (!log_) throw Error("write to annotation log failed");
}

AnnotationStore::ItemState& AnnotationStore::state_of(const std::string& item_id) {
  auto it = items_.find(item_id);
  if (it == items_.end()) throw StoreError(StoreError::Kind::NotFound, "unknown item '" + item_id + "'");
  return it->second;
}

const AnnotationStore::ItemState& AnnotationStore::state_of(const std::string& item_id) const {
  auto it = items_.find(item_id);
  if (it == items_.end()) throw StoreError(StoreError::Kind::NotFound, "unknown item '" + item_id + "'");
  return it->second;
}

void AnnotationStore::apply(const nlohmann::json& event, bool persist) {
  const std::string kind = event.at("event").get<std::string>();
  if (kind == "item") {
    Item item = item_from_json(event.at("item"));
    if (item.id.empty()) throw StoreError(StoreError::Kind::Invalid, "item id is empty");
    if (items_.contains(item.id)) throw StoreError(StoreError::Kind::Conflict, "item '" + item.id + "' already exists");
    if (persist) append(event);
    order_.push_back(item.id);
    const std::string id = item.id;
    items_[id].item = std::move(item);
  } else if (kind == "assign") {
    ItemState& s = state_of(event.at("item_id").get<std::string>());
    const auto annotator = event.at("annotator_id").get<std::string>();
    const int round = event.value("round", 0);
    auto& list = s.assigned[round];
    if (std::find(list.begin(), list.end(), annotator) != list.end()) return;
    if (persist) append(event);
    list.push_back(annotator);
  } else if (kind == "label") {
    AnnotationRecord r = record_from_json(event.at("record"));
    ItemState& s = state_of(r.item_id);
    auto& list = s.labels[r.round];
    for (const auto& existing : list) {
      if (existing.annotator_id == r.annotator_id) {
        throw StoreError(StoreError::Kind::Conflict,
                         fmt::format("'{}' already labelled '{}' in round {}", r.annotator_id, r.item_id, r.round));
      }
    }
    if (persist) append(event);
    list.push_back(r);
    records_.push_back(std::move(r));
  } else if (kind == "adjudicate") {
    AdjudicatedItem a = adjudicated_from_json(event.at("decision"));
    ItemState& s = state_of(a.item_id);
    if (s.decision) throw StoreError(StoreError::Kind::Conflict, "item '" + a.item_id + "' is already adjudicated");
    if (persist) append(event);
    s.decision = std::move(a);
  } else {
    throw ParseError("unknown event '" + kind + "'");
  }
}

void AnnotationStore::add_item(const Item& item) {
  std::lock_guard lock(mu_);
  apply({{"event", "item"}, {"item", to_json(item)}}, true);
}

void AnnotationStore::assign(const std::string& item_id, const std::string& annotator_id, int round) {
  std::lock_guard lock(mu_);
  if (annotator_id.empty()) throw StoreError(StoreError::Kind::Invalid, "annotator id is empty");
  apply({{"event", "assign"}, {"item_id", item_id}, {"annotator_id", annotator_id}, {"round", round}}, true);
}

void AnnotationStore::apply_assignment(const Assignment& assignment, int round) {
  for (const auto& [item, annotators] : assignment) {
    for (const auto& a : annotators) assign(item, a, round);
  }
}

std::optional<Item> AnnotationStore::next_item(const std::string& annotator_id) const {
  std::lock_guard lock(mu_);
  for (const auto& id : order_) {
    const ItemState& s = items_.at(id);
    for (const auto& [round, list] : s.assigned) {
      if (std::find(list.begin(), list.end(), annotator_id) == list.end()) continue;
      const auto it = s.labels.find(round);
      const bool done = it != s.labels.end() &&
                        std::any_of(it->second.begin(), it->second.end(),
                                    [&](const AnnotationRecord& r) { return r.annotator_id == annotator_id; });
      if (!done) return s.item;
    }
  }
  return std::nullopt;
}

AnnotationRecord AnnotationStore::record_label(const std::string& item_id, const std::string& annotator_id,
                                               std::optional<Label> label, bool insufficient_context,
                                               const std::string& submission_id, int round) {
  std::lock_guard lock(mu_);
  ItemState& s = state_of(item_id);
  const auto assigned = s.assigned.find(round);
  if (assigned == s.assigned.end() ||
      std::find(assigned->second.begin(), assigned->second.end(), annotator_id) == assigned->second.end()) {
    throw StoreError(StoreError::Kind::Unauthorized,
                     fmt::format("'{}' is not assigned to '{}' in round {}", annotator_id, item_id, round));
  }
  if (!label && !insufficient_context) {
    throw StoreError(StoreError::Kind::Invalid, "a label is required unless insufficient_context is set");
  }
  if (auto it = s.labels.find(round); it != s.labels.end()) {
    for (const auto& r : it->second) {
      if (r.annotator_id == annotator_id && !submission_id.empty() && r.submission_id == submission_id) return r;
    }
  }
  AnnotationRecord r;
  r.item_id = item_id;
  r.annotator_id = annotator_id;
  r.label = label;
  r.insufficient_context = insufficient_context;
  r.round = round;
  r.timestamp = clock_();
  r.submission_id = submission_id;
  apply({{"event", "label"}, {"record", to_json(r)}}, true);
  return r;
}

bool AnnotationStore::complete(const ItemState& s) const {
  const auto a = s.assigned.find(0);
  if (a == s.assigned.end() || a->second.empty()) return false;
  const auto l = s.labels.find(0);
  return l != s.labels.end() && l->second.size() == a->second.size();
}

bool AnnotationStore::unanimous(const ItemState& s) const {
  if (!complete(s)) return false;
  const auto& recs = s.labels.at(0);
  for (const auto& r : recs) {
    if (r.insufficient_context || !r.label || *r.label != *recs.front().label) return false;
  }
  return true;
}

namespace {

std::vector<std::pair<Label, Label>> pairs_for(const std::vector<AnnotationRecord>& recs, const std::string* first,
                                               const std::string* second) {
  const AnnotationRecord* a = nullptr;
  const AnnotationRecord* b = nullptr;
  if (first) {
    for (const auto& r : recs) {
      if (r.annotator_id == *first) a = &r;
      if (r.annotator_id == *second) b = &r;
    }
  } else if (recs.size() == 2) {
    a = &recs[0];
    b = &recs[1];
    if (b->annotator_id < a->annotator_id) std::swap(a, b);
  }
  if (!a || !b || a->insufficient_context || b->insufficient_context || !a->label || !b->label) return {};
  return {{*a->label, *b->label}};
}

}  // namespace

AgreementStats AnnotationStore::agreement() const {
  std::lock_guard lock(mu_);
  Confusion c{};
  for (const auto& [id, s] : items_) {
    if (!complete(s)) continue;
    for (auto [x, y] : pairs_for(s.labels.at(0), nullptr, nullptr)) ++c[index_of(x)][index_of(y)];
  }
  return agreement_stats(c);
}

AgreementStats AnnotationStore::agreement(const std::string& first, const std::string& second) const {
  std::lock_guard lock(mu_);
  Confusion c{};
  for (const auto& [id, s] : items_) {
    const auto l = s.labels.find(0);
    if (l == s.labels.end()) continue;
    for (auto [x, y] : pairs_for(l->second, &first, &second)) ++c[index_of(x)][index_of(y)];
  }
  return agreement_stats(c);
}

std::vector<QueueEntry> AnnotationStore::queue_locked() const {
  std::vector<QueueEntry> out;
  for (const auto& [id, s] : items_) {
    if (s.decision || !complete(s) || unanimous(s)) continue;
    out.push_back({id, s.labels.at(0)});
  }
  return out;
}

std::vector<QueueEntry> AnnotationStore::queue() const {
  std::lock_guard lock(mu_);
  return queue_locked();
}

AdjudicatedItem AnnotationStore::adjudicate(const std::string& item_id, std::optional<Label> final_label,
                                            const std::string& note) {
  std::lock_guard lock(mu_);
  ItemState& s = state_of(item_id);
  if (s.decision) throw StoreError(StoreError::Kind::Conflict, "item '" + item_id + "' is already adjudicated");
  if (!complete(s)) throw StoreError(StoreError::Kind::Invalid, "item '" + item_id + "' is not fully annotated");
  AdjudicatedItem a;
  a.item_id = item_id;
  a.final_label = final_label;
  a.removed = !final_label;
  a.resolution_note = note;
  apply({{"event", "adjudicate"}, {"decision", to_json(a)}}, true);
  return a;
}

std::map<std::string, AdjudicatedItem> AnnotationStore::adjudicated_locked() const {
  std::map<std::string, AdjudicatedItem> out;
  for (const auto& [id, s] : items_) {
    if (s.decision) {
      out.emplace(id, *s.decision);
    } else if (unanimous(s)) {
      out.emplace(id, AdjudicatedItem{id, s.labels.at(0).front().label, false, "unanimous", true});
    }
  }
  return out;
}

std::map<std::string, AdjudicatedItem> AnnotationStore::adjudicated() const {
  std::lock_guard lock(mu_);
  return adjudicated_locked();
}

std::vector<std::string> AnnotationStore::unadjudicated() const {
  std::lock_guard lock(mu_);
  const auto done = adjudicated_locked();
  std::vector<std::string> out;
  for (const auto& [id, s] : items_) {
    if (!done.contains(id)) out.push_back(id);
  }
  return out;
}

std::vector<data::DatasetRow> AnnotationStore::export_rows() const {
  std::lock_guard lock(mu_);
  const auto done = adjudicated_locked();
  if (done.size() != items_.size()) {
    std::vector<std::string> missing;
    for (const auto& [id, s] : items_) {
      if (!done.contains(id)) missing.push_back(id);
    }
    const std::size_t shown = std::min<std::size_t>(missing.size(), 20);
    throw StoreError(StoreError::Kind::Conflict,
                     fmt::format("{} items are not adjudicated: {}{}", missing.size(),
                                 fmt::join(missing.begin(), missing.begin() + static_cast<std::ptrdiff_t>(shown), ", "),
                                 missing.size() > shown ? ", ..." : ""));
  }
  std::vector<data::DatasetRow> rows;
  for (const auto& id : order_) {
    const auto& a = done.at(id);
    if (a.removed) continue;
    const Item& it = items_.at(id).item;
    data::DatasetRow r;
    r.id = it.id;
    r.text = it.text;
    r.label = *a.final_label;
    r.region = it.region;
    r.topic_id = it.topic_id;
    r.month = it.month;
    r.created_at = it.created_at;
    rows.push_back(std::move(r));
  }
  return rows;
}

ExportSummary AnnotationStore::export_dataset(const std::string& path) const {
  const auto rows = export_rows();
  data::write_dataset(path, rows);
  ExportSummary s;
  s.rows = rows.size();
  s.removed = item_count() - rows.size();
  s.counts = data::count_classes(rows);
  return s;
}

std::vector<AnnotationRecord> AnnotationStore::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t AnnotationStore::item_count() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

}  // namespace aporo::annotate
