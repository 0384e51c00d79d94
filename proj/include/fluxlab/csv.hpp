#pragma once

#include <fmt/format.h>

#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fluxlab/error.hpp"

namespace fluxlab::csv {

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Shortest round-trip representation.
inline std::string num(double v) { return fmt::format("{}", v); }

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << quote(cells[i]);
    os_ << "\r\n";
  }

 private:
  std::ostream& os_;
};

/// Parses RFC-4180 text into rows of fields.
inline std::vector<std::vector<std::string>> parse(std::istream& is) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false, any = false;
  char c;
  while (is.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (is.peek() == '"') {
          field += '"';
          is.get(c);
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      row.push_back(field);
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && is.peek() == '\n') is.get(c);
      row.push_back(field);
      field.clear();
      if (!(row.size() == 1 && row[0].empty())) rows.push_back(row);
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (in_quotes) fail(ErrorCode::InvalidInput, "unterminated quoted CSV field");
  if (any) {
    row.push_back(field);
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(row);
  }
  return rows;
}

/// Header-keyed table.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline Table read_table(std::istream& is) {
  auto rows = parse(is);
  Table t;
  if (rows.empty()) return t;
  t.header = rows.front();
  for (auto& h : t.header) {
    while (!h.empty() && std::isspace(static_cast<unsigned char>(h.back()))) h.pop_back();
    while (!h.empty() && std::isspace(static_cast<unsigned char>(h.front()))) h.erase(h.begin());
  }
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != t.header.size())
      fail(ErrorCode::InvalidInput, "CSV row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                                        " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(rows[i]));
  }
  return t;
}

inline Table read_table_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::InvalidInput, "cannot open " + path);
  return read_table(f);
}

inline double to_double(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidInput, "cannot parse " + what + " value '" + s + "'");
  }
}

}  // namespace fluxlab::csv
