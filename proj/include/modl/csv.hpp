#pragma once

// RFC-4180 CSV: streaming record reader and a field writer.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "modl/error.hpp"

namespace modl::csv {

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(&in) {}

  explicit Reader(const std::string& path)
      : owned_(std::make_unique<std::ifstream>(path, std::ios::binary)), in_(owned_.get()) {
    if (!*owned_) throw DataError("cannot open '" + path + "'");
  }

  // Line number (1-based) of the first line of the last record read.
  std::size_t record_line() const { return record_line_; }

  // Reads the next record into `fields`; false at end of input.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    int c = get();
    if (c == EOF) return false;
    record_line_ = line_;
    std::string field;
    bool quoted = false;
    bool after_quote = false;
    for (;;) {
      if (quoted) {
        if (c == EOF) throw DataError("line " + std::to_string(record_line_) + ": unterminated quoted field");
        if (c == '"') {
          if (peek() == '"') {
            get();
            field.push_back('"');
          } else {
            quoted = false;
            after_quote = true;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(static_cast<char>(c));
        }
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
        after_quote = false;
      } else if (c == '\n' || c == EOF) {
        if (c == '\n') ++line_;
        fields.push_back(std::move(field));
        return true;
      } else if (c == '\r') {
        if (peek() == '\n') get();
        ++line_;
        fields.push_back(std::move(field));
        return true;
      } else if (c == '"' && field.empty() && !after_quote) {
        quoted = true;
      } else {
        if (after_quote) {
          throw DataError("line " + std::to_string(record_line_) + ": text after closing quote");
        }
        field.push_back(static_cast<char>(c));
      }
      c = get();
    }
  }

 private:
  int get() { return in_->rdbuf()->sbumpc(); }
  int peek() { return in_->rdbuf()->sgetc(); }

  std::unique_ptr<std::ifstream> owned_;
  std::istream* in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

inline bool needs_quotes(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

inline void write_field(std::ostream& out, std::string_view s) {
  if (!needs_quotes(s)) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

inline void write_record(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    write_field(out, fields[i]);
  }
  out << '\n';
}

// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Strict finite-number parse; surrounding blanks tolerated.
inline std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace modl::csv
