#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace resinv {

/// Raised when a caller breaks an operation's precondition (bad shapes,
/// out-of-domain resolutions, non-finite values). CLI exit code 1.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised for malformed files and I/O failures. CLI exit code 2.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  explicit FormatError(const std::string& what) : std::runtime_error(what), offset_(0) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

[[noreturn]] inline void contract_fail(const std::string& msg) { throw ContractViolation(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) contract_fail(msg);
}

}  // namespace resinv
