#pragma once

#include <stdexcept>
#include <string>

namespace mrl {

/// Shapes or lengths that do not fit an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the accepted domain (empty set, bad ratio, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Object used in a state that no longer matches (e.g. stale forward cache).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input data. Carries the source (file name) and a byte offset
/// when one is known.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& source, long long offset, const std::string& what)
      : std::runtime_error(format(source, offset, what)), source_(source), offset_(offset) {}
  explicit DataError(const std::string& what) : std::runtime_error(what), offset_(-1) {}

  const std::string& source() const { return source_; }
  long long offset() const { return offset_; }

 private:
  static std::string format(const std::string& source, long long offset, const std::string& what) {
    std::string s = source;
    if (offset >= 0) s += " @" + std::to_string(offset);
    return s + ": " + what;
  }

  std::string source_;
  long long offset_;
};

/// Invalid experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mrl
