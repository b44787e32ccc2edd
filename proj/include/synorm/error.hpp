#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace synorm {

// Base for every error the library raises. Callers that only care about
// "something went wrong" catch this; the subclasses exist for the cases the
// CLI and the loaders need to tell apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyMentionError : public Error {
 public:
  explicit EmptyMentionError(const std::string& raw)
      : Error("mention is empty after normalization: '" + raw + "'") {}
};

class EmptyDictionaryError : public Error {
 public:
  explicit EmptyDictionaryError(const std::string& source)
      : Error("dictionary is empty: " + source) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace synorm
