#include "aporo/data/dataset.hpp"

#include <fstream>
#include <unordered_set>

#include "aporo/common/csv.hpp"
#include "aporo/common/error.hpp"
#include "aporo/common/text.hpp"

namespace aporo::data {

namespace {

std::optional<int> parse_int(const std::string& s, std::size_t line, const char* what) {
  const auto t = text::trim(s);
  if (t.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const int v = std::stoi(std::string(t), &used);
    if (used != t.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("bad ") + what + " '" + s + "'", line);
  }
}

}  // namespace

std::vector<DatasetRow> load_dataset(const std::string& path) {
  if (!std::ifstream(path)) throw MissingInput("cannot open dataset " + path);
  const csv::Table t = csv::read_table(path, csv::delimiter_for(path));
  constexpr auto npos = static_cast<std::size_t>(-1);
  const auto c_id = t.column({"id", "tweet_id"});
  const auto c_text = t.column({"text", "tweet"});
  const auto c_label = t.column({"label", "gold", "class"});
  if (c_id == npos || c_text == npos || c_label == npos) {
    throw ParseError("dataset " + path + " needs id, text and label columns", 1);
  }
  const auto c_region = t.column({"region"});
  const auto c_topic = t.column({"topic_id", "topic"});
  const auto c_month = t.column({"month"});
  const auto c_created = t.column({"created_at", "timestamp", "date"});
  const auto c_place = t.column({"place_country", "place"});
  const auto c_loc = t.column({"user_location", "user_location_raw", "location"});

  std::vector<DatasetRow> rows;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::size_t line = t.lines[i];
    auto field = [&](std::size_t c) -> const std::string* {
      return c != npos && c < r.size() ? &r[c] : nullptr;
    };
    DatasetRow row;
    row.id = *field(c_id);
    if (row.id.empty()) throw ParseError("empty id", line);
    if (!ids.insert(row.id).second) throw ParseError("duplicate id '" + row.id + "'", line);
    row.text = *field(c_text);
    const auto label = label_from_string(text::trim(*field(c_label)));
    if (!label) throw ParseError("unknown label '" + *field(c_label) + "'", line);
    row.label = *label;
    if (auto f = field(c_region); f && !text::trim(*f).empty()) {
      row.region = region_from_string(*f);
      if (!row.region) throw ParseError("unknown region '" + *f + "'", line);
    }
    if (auto f = field(c_topic)) row.topic_id = parse_int(*f, line, "topic_id");
    if (auto f = field(c_month)) row.month = parse_int(*f, line, "month");
    if (auto f = field(c_created); f && !text::trim(*f).empty()) {
      row.created_at = parse_timestamp(*f);
      if (!row.created_at) throw ParseError("bad timestamp '" + *f + "'", line);
    }
    if (auto f = field(c_place); f && !f->empty()) row.place_country = *f;
    if (auto f = field(c_loc); f && !f->empty()) row.user_location = *f;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_dataset(const std::string& path, const std::vector<DatasetRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const char d = csv::delimiter_for(path);
  csv::write_row(out, {"id", "text", "region", "topic_id", "month", "created_at", "label"}, d);
  for (const auto& r : rows) {
    csv::write_row(out,
                   {r.id, r.text, r.region ? std::string(to_string(*r.region)) : "",
                    r.topic_id ? std::to_string(*r.topic_id) : "", r.month ? std::to_string(*r.month) : "",
                    r.created_at ? format_timestamp(*r.created_at) : "", std::string(to_string(r.label))},
                   d);
  }
}

ClassCounts count_classes(const std::vector<DatasetRow>& rows) {
  ClassCounts c;
  for (const auto& r : rows) {
    ++c.total;
    ++c.by_label[index_of(r.label)];
    if (r.region) {
      ++c.by_region[index_of(*r.region)][index_of(r.label)];
    } else {
      ++c.without_region;
    }
  }
  return c;
}

}  // namespace aporo::data
