#pragma once

#include <stdexcept>
#include <string>

namespace zol {

// Every error thrown by the library derives from zol::Error so that callers
// (the CLI in particular) can map them to a stable one-word kind.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error("format", w) {}
};
struct LengthError : Error {
  explicit LengthError(const std::string& w) : Error("length", w) {}
};
struct ConsistencyError : Error {
  explicit ConsistencyError(const std::string& w) : Error("consistency", w) {}
};
struct EmptyDatasetError : Error {
  explicit EmptyDatasetError(const std::string& w) : Error("empty", w) {}
};
struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error("dimension", w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error("io", w) {}
};

}  // namespace zol
