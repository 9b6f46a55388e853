#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aporo/annotate/agreement.hpp"
#include "aporo/common/error.hpp"
#include "aporo/data/dataset.hpp"

namespace aporo::annotate {

struct Item {
  std::string id;
  std::string text;
  std::optional<Region> region;
  std::optional<int> topic_id;
  std::optional<int> month;
  std::optional<Timestamp> created_at;
};

struct AnnotationRecord {
  std::string item_id;
  std::string annotator_id;
  /// Absent only when insufficient_context is set.
  std::optional<Label> label;
  bool insufficient_context = false;
  int round = 0;
  Timestamp timestamp{};
  std::string submission_id;
};

struct AdjudicatedItem {
  std::string item_id;
  std::optional<Label> final_label;
  bool removed = false;
  std::string resolution_note;
  /// Finalised from a unanimous pair rather than by an adjudicator.
  bool automatic = false;
};

nlohmann::json to_json(const Item& item, bool with_metadata = true);
nlohmann::json to_json(const AnnotationRecord& record);
nlohmann::json to_json(const AdjudicatedItem& item);

/// item id -> annotator ids, in assignment order.
using Assignment = std::map<std::string, std::vector<std::string>>;

/// Round-robin over a seeded permutation of the annotators, so each item
/// gets `per_item` distinct annotators and loads differ by at most one.
Assignment assign_items(const std::vector<std::string>& item_ids, const std::vector<std::string>& annotators,
                        std::size_t per_item, std::uint64_t seed);

class StoreError : public Error {
 public:
  enum class Kind { NotFound, Unauthorized, Conflict, Invalid };
  StoreError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct QueueEntry {
  std::string item_id;
  std::vector<AnnotationRecord> records;
};

/// Item ids whose round-0 records disagree or carry an insufficient-context
/// flag (items with fewer than two records are skipped), by item id.
std::vector<std::string> disagreement_queue(const std::vector<AnnotationRecord>& records);

struct ExportSummary {
  std::size_t rows = 0;
  std::size_t removed = 0;
  data::ClassCounts counts;

  nlohmann::json to_json() const;
};

/// Append-only annotation log with derived state. Every mutation is written
/// as one JSON line before it takes effect; opening a log replays it. All
/// public methods are safe to call concurrently.
class AnnotationStore {
 public:
  using Clock = std::function<Timestamp()>;

  /// In-memory store when `log_path` is empty.
  explicit AnnotationStore(std::string log_path = {}, Clock clock = {});

  void add_item(const Item& item);
  void assign(const std::string& item_id, const std::string& annotator_id, int round = 0);
  void apply_assignment(const Assignment& assignment, int round = 0);

  /// First assigned item the annotator has not labelled yet.
  std::optional<Item> next_item(const std::string& annotator_id) const;

  /// Resubmitting with the same non-empty submission_id returns the stored
  /// record.
  AnnotationRecord record_label(const std::string& item_id, const std::string& annotator_id, std::optional<Label> label,
                                bool insufficient_context, const std::string& submission_id = {}, int round = 0);

  /// Pools every fully double-annotated item; annotators ordered by id.
  AgreementStats agreement() const;
  AgreementStats agreement(const std::string& first, const std::string& second) const;

  /// Unresolved items whose labels differ or carry an insufficient-context
  /// flag, by item id.
  std::vector<QueueEntry> queue() const;

  /// `final_label` empty means remove.
  AdjudicatedItem adjudicate(const std::string& item_id, std::optional<Label> final_label, const std::string& note);

  /// Explicit decisions plus unanimous items.
  std::map<std::string, AdjudicatedItem> adjudicated() const;

  std::vector<std::string> unadjudicated() const;

  /// Throws StoreError(Conflict) listing unadjudicated items.
  std::vector<data::DatasetRow> export_rows() const;
  ExportSummary export_dataset(const std::string& path) const;

  std::vector<AnnotationRecord> records() const;
  std::size_t item_count() const;
  const std::string& log_path() const { return log_path_; }

 private:
  struct ItemState {
    Item item;
    std::map<int, std::vector<std::string>> assigned;
    std::map<int, std::vector<AnnotationRecord>> labels;
    std::optional<AdjudicatedItem> decision;
  };

  void apply(const nlohmann::json& event, bool persist);
  void append(const nlohmann::json& event);
  ItemState& state_of(const std::string& item_id);
  const ItemState& state_of(const std::string& item_id) const;
  bool complete(const ItemState& s) const;
  bool unanimous(const ItemState& s) const;
  std::vector<QueueEntry> queue_locked() const;
  std::map<std::string, AdjudicatedItem> adjudicated_locked() const;

  std::string log_path_;
  Clock clock_;
  std::ofstream log_;
  mutable std::mutex mu_;
  std::map<std::string, ItemState> items_;
  std::vector<std::string> order_;
  std::vector<AnnotationRecord> records_;
};

}  // namespace aporo::annotate
