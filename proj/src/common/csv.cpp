#include "aporo/common/csv.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "aporo/common/error.hpp"
#include "aporo/common/text.hpp"

namespace aporo::csv {

Reader::Reader(std::istream& in, char delimiter) : in_(in), delim_(delimiter) {}

bool Reader::next(Row& row) {
  row.clear();
  int c = in_.get();
  if (c == EOF) return false;
  record_line_ = line_;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (;; c = in_.get()) {
    if (c == EOF) {
      if (quoted) throw ParseError("unterminated quoted field", record_line_);
      row.push_back(std::move(field));
      return true;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          field.push_back('"');
          in_.get();
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line_;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (ch == delim_) {
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && in_.peek() == '\n') in_.get();
      ++line_;
      row.push_back(std::move(field));
      return true;
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
}

std::size_t Table::column(std::initializer_list<std::string_view> names) const {
  for (auto name : names) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
  }
  return std::string::npos;
}

Table read_table(const std::string& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot open " + path);
  Reader reader(in, delimiter);
  Table table;
  Row row;
  if (!reader.next(row)) return table;
  for (auto& h : row) table.header.push_back(text::to_lower(text::trim(h)));
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    table.rows.push_back(row);
    table.lines.push_back(reader.line());
  }
  return table;
}

std::string escape(std::string_view field, char delimiter) {
  const bool needs_quotes = field.find_first_of(std::string{'"', '\n', '\r', delimiter}) != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row, char delimiter) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << delimiter;
    out << escape(row[i], delimiter);
  }
  out << '\n';
}

char delimiter_for(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".tsv") == 0 ? '\t' : ',';
}

}  // namespace aporo::csv
