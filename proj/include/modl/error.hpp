#pragma once

#include <stdexcept>
#include <string>

namespace modl {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorCategory { usage = 2, data = 3, internal = 4 };

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::data: return "data";
    case ErrorCategory::internal: return "internal";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

// Malformed schema, bad cell, orphan row, model/schema mismatch.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

// Bad option or argument value.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what) : Error(ErrorCategory::internal, what) {}
};

#define MODL_ASSERT(cond, msg)                                            \
  do {                                                                    \
    if (!(cond)) throw ::modl::InvariantError(std::string("invariant: ") + (msg)); \
  } while (0)

}  // namespace modl
