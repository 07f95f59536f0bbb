#pragma once

// Minimal RFC-4180 reader/writer: comma separator, double-quote quoting with
// "" escapes, quoted fields may span lines, CRLF or LF record endings.

#include <string>
#include <string_view>
#include <vector>

#include "emomis/error.hpp"

namespace emomis::csv {

using Row = std::vector<std::string>;

struct Record {
  Row fields;
  std::size_t number = 0;  // 1-based record index, header included
  bool terminated = true;  // false when the input ended without a newline
};

/// Parses the whole document. Throws MalformedRow (with the record number)
/// on an unterminated quote or stray characters after a closing quote.
inline std::vector<Record> parse(std::string_view text) {
  std::vector<Record> records;
  std::size_t i = 0;
  const std::size_t n = text.size();
  if (n >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  while (i < n) {
    Record rec;
    rec.number = records.size() + 1;
    std::string field;
    bool done = false;
    while (!done) {
      if (i < n && text[i] == '"') {
        ++i;
        for (;;) {
          if (i >= n) throw Error(Errc::MalformedRow, "unterminated quoted field", rec.number);
          if (text[i] == '"') {
            if (i + 1 < n && text[i + 1] == '"') {
              field += '"';
              i += 2;
            } else {
              ++i;
              break;
            }
          } else {
            field += text[i++];
          }
        }
        if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r')
          throw Error(Errc::MalformedRow, "unexpected character after closing quote", rec.number);
      } else {
        while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          if (text[i] == '"') throw Error(Errc::MalformedRow, "quote inside unquoted field", rec.number);
          field += text[i++];
        }
      }
      rec.fields.push_back(std::move(field));
      field.clear();
      if (i >= n) {
        rec.terminated = false;
        done = true;
      } else if (text[i] == ',') {
        ++i;
      } else {
        if (text[i] == '\r') ++i;
        if (i < n && text[i] == '\n') ++i;
        done = true;
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline void append_field(std::string& out, std::string_view field) {
  const bool quote = field.find_first_of(",\"\r\n") != std::string_view::npos ||
                     (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!quote) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

inline void append_row(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out += ',';
    append_field(out, fields[k]);
  }
  out += '\n';
}

}  // namespace emomis::csv
