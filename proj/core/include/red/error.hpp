#pragma once

#include <stdexcept>
#include <string>

namespace red {

/// Every failure raised by the library carries a short machine-readable kind
/// ("ShapeMismatch", "EmptyDataset", ...) next to the human message. The CLI
/// forwards the kind verbatim into its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)), message_(message) {}

  const std::string& kind() const noexcept { return kind_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string kind_;
  std::string message_;
};

[[noreturn]] inline void fail(std::string kind, const std::string& message) {
  throw Error(std::move(kind), message);
}

inline void require(bool condition, const char* kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace red
