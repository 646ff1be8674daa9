#pragma once

#include <stdexcept>
#include <string>

namespace sinceeg {

// Failure categories for the on-disk formats (datasets and checkpoints).
enum class FormatErrc {
  io_error = 1,
  bad_magic = 2,
  version_mismatch = 3,
  truncated = 4,
  bad_header = 5,
};

const char* to_string(FormatErrc code);

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  FormatErrc code() const noexcept { return code_; }

 private:
  FormatErrc code_;
};

inline const char* to_string(FormatErrc code) {
  switch (code) {
    case FormatErrc::io_error: return "io-error";
    case FormatErrc::bad_magic: return "bad-magic";
    case FormatErrc::version_mismatch: return "version-mismatch";
    case FormatErrc::truncated: return "truncated";
    case FormatErrc::bad_header: return "bad-header";
  }
  return "unknown";
}

}  // namespace sinceeg
