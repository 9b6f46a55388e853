#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aporo::csv {

using Row = std::vector<std::string>;

/// RFC-4180 style reader: quoted fields may contain the delimiter, doubled
/// quotes and newlines.
class Reader {
 public:
  explicit Reader(std::istream& in, char delimiter = ',');

  /// Reads the next record; returns false at end of input.
  bool next(Row& row);

  /// Line number where the last returned record started (1-based).
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  char delim_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

/// Reads a whole file with a header row. Column names are lower-cased.
struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
  std::vector<std::size_t> lines;

  /// Index of the first of `names` present in the header, or npos.
  std::size_t column(std::initializer_list<std::string_view> names) const;
};

Table read_table(const std::string& path, char delimiter = ',');

std::string escape(std::string_view field, char delimiter = ',');
void write_row(std::ostream& out, const Row& row, char delimiter = ',');

/// Picks ',' or '\t' from a file extension (".tsv" -> tab).
char delimiter_for(const std::string& path);

}  // namespace aporo::csv
