#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace treecp {

// Error taxonomy, mapped to CLI exit codes: input errors (parse_error,
// format_error) exit 2, failed checks exit 1.

struct parse_error : std::runtime_error {
  std::size_t offset;  // byte offset into the offending line
  parse_error(const std::string& msg, std::size_t off)
      : std::runtime_error(msg + " (byte " + std::to_string(off) + ")"), offset(off) {}
};

struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct dim_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct divergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace treecp
