#include <fstream>

#include "aporo/common/csv.hpp"
#include "aporo/common/error.hpp"
#include "aporo/common/text.hpp"
#include "aporo/ingest/ingest.hpp"

namespace aporo::ingest {

RecordFormat format_from_string(std::string_view name) {
  const auto lower = text::to_lower(name);
  if (lower == "jsonl") return RecordFormat::Jsonl;
  if (lower == "csv" || lower == "tsv") return RecordFormat::Csv;
  throw ContractViolation("unknown record format '" + std::string(name) + "'");
}

namespace {

class Collector {
 public:
  Collector(const LoadOptions& options, LoadResult& out) : options_(options), out_(out) {}

  void add(std::size_t line, const std::function<PostRecord()>& parse) {
    try {
      PostRecord r = parse();
      if (!seen_.insert(r.id).second) throw ParseError("duplicate id '" + r.id + "'");
      out_.records.push_back(std::move(r));
    } catch (const ParseError& e) {
      if (options_.fail_fast) throw ParseError(e.what(), line);
      out_.warnings.push_back({line, e.what()});
    } catch (const nlohmann::json::exception& e) {
      if (options_.fail_fast) throw ParseError(e.what(), line);
      out_.warnings.push_back({line, e.what()});
    }
  }

 private:
  const LoadOptions& options_;
  LoadResult& out_;
  std::unordered_set<std::string> seen_;
};

void load_jsonl(const std::string& path, Collector& collector) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    collector.add(lineno, [&] {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
      }
      return from_json(j);
    });
  }
}

void load_csv(const std::string& path, Collector& collector) {
  const auto table = csv::read_table(path, csv::delimiter_for(path));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    collector.add(table.lines[i], [&] {
      if (row.size() != table.header.size()) {
        throw ParseError("expected " + std::to_string(table.header.size()) + " fields, got " +
                         std::to_string(row.size()));
      }
      nlohmann::json j = nlohmann::json::object();
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (!row[c].empty()) j[table.header[c]] = row[c];
      }
      return from_json(j);
    });
  }
}

}  // namespace

LoadResult load_records(const std::string& path, RecordFormat format, const LoadOptions& options) {
  LoadResult result;
  Collector collector(options, result);
  if (format == RecordFormat::Jsonl) {
    load_jsonl(path, collector);
  } else {
    load_csv(path, collector);
  }
  return result;
}

void write_records_jsonl(const std::string& path, const std::vector<PostRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

}  // namespace aporo::ingest
