#pragma once

#include "sd4x/error.hpp"

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace sd4x::csv {

using Record = std::vector<std::string>;

// RFC 4180 reader: quoted fields, doubled quotes, CRLF. Blank lines are skipped.
inline std::vector<Record> read(std::istream& in) {
  std::vector<Record> records;
  Record record;
  std::string field;
  bool quoted = false;
  bool started = false;
  char c = 0;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (started || !field.empty()) {
          record.push_back(std::move(field));
          records.push_back(std::move(record));
        }
        field.clear();
        record.clear();
        started = false;
        break;
      default:
        field += c;
        started = true;
    }
  }
  if (quoted) throw InputError("csv: unterminated quoted field");
  if (started || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

inline std::string quote(const std::string& field) {
  const bool needs = field.find_first_of(",\"\r\n") != std::string::npos ||
                     (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_record(std::ostream& out, const Record& record) {
  for (std::size_t i = 0; i < record.size(); ++i) {
    if (i) out << ',';
    out << quote(record[i]);
  }
  out << '\n';
}

}  // namespace sd4x::csv
