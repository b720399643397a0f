#pragma once

#include <map>
#include <set>
#include <vector>

#include "dualcast/protocol.hpp"

namespace dualcast {

enum class FdMode { perfect, eventually_perfect };

struct FdConfig {
  SimTime heartbeat_period = 1000;
  SimTime timeout = 10000;
  FdMode mode = FdMode::perfect;

  void validate() const;  // throws ConfigError unless timeout > heartbeat_period > 0
};

struct FdState {
  ServerId self = 0;
  FdConfig config;
  std::uint64_t eon = 1;
  std::map<ServerId, SimTime> last_heard;  // monitored predecessors
  std::set<ServerId> suspected;
  std::vector<ServerId> heartbeat_targets;
  SimTime next_heartbeat = 0;
};

struct FdOutput {
  std::vector<ServerId> heartbeats;
  std::vector<FailureNotification> notifications;  // ascending target
};

FdState fd_init(ServerId self, const FdConfig& config, const Digraph& gr, SimTime now);

// Heartbeats when due, then one notification per newly timed-out predecessor.
FdOutput fd_tick(FdState& fd, SimTime now);
void fd_heard(FdState& fd, ServerId from, SimTime now);

bool should_suppress(const FdState& fd, ServerId from, const Packet& p);

// Follows membership changes: predecessors come from gr, heartbeats also go to
// next_gr successors while a transition is staged. A new eon restarts monitoring
// and clears suspicions.
void fd_retarget(FdState& fd, const Digraph& gr, const Digraph* next_gr, std::uint64_t eon, SimTime now);

}  // namespace dualcast
