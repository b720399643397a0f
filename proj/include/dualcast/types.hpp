#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dualcast {

using ServerId = int;
// Simulated time in microseconds.
using SimTime = std::int64_t;

struct InvalidSpec : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IllegalTransition : std::logic_error {
  using std::logic_error::logic_error;
};

// Raised when a server observes a constellation the concurrency propositions rule out.
struct ProtocolViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

}  // namespace dualcast
