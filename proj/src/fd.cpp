#include "dualcast/fd.hpp"

#include <algorithm>

namespace dualcast {

void FdConfig::validate() const {
  if (heartbeat_period <= 0 || timeout <= heartbeat_period)
    throw ConfigError("failure detector needs timeout > heartbeat period > 0");
}

FdState fd_init(ServerId self, const FdConfig& config, const Digraph& gr, SimTime now) {
  config.validate();
  FdState fd;
  fd.self = self;
  fd.config = config;
  fd.next_heartbeat = now;
  fd_retarget(fd, gr, nullptr, 1, now);
  return fd;
}

FdOutput fd_tick(FdState& fd, SimTime now) {
  FdOutput out;
  if (now >= fd.next_heartbeat) {
    out.heartbeats = fd.heartbeat_targets;
    fd.next_heartbeat = now + fd.config.heartbeat_period;
  }
  for (const auto& [pred, heard] : fd.last_heard) {
    if (fd.suspected.count(pred) || now - heard <= fd.config.timeout) continue;
    fd.suspected.insert(pred);
    out.notifications.push_back(FailureNotification{pred, fd.self, fd.eon});
  }
  return out;
}

void fd_heard(FdState& fd, ServerId from, SimTime now) {
  auto it = fd.last_heard.find(from);
  if (it != fd.last_heard.end()) it->second = std::max(it->second, now);
}

bool should_suppress(const FdState& fd, ServerId from, const Packet& p) {
  if (fd.config.mode != FdMode::eventually_perfect || p.kind == PacketKind::fail) return false;
  return fd.suspected.count(from) != 0;
}

void fd_retarget(FdState& fd, const Digraph& gr, const Digraph* next_gr, std::uint64_t eon, SimTime now) {
  if (eon != fd.eon) {
    fd.eon = eon;
    fd.suspected.clear();
    fd.last_heard.clear();
  }
  std::map<ServerId, SimTime> heard;
  if (gr.has_vertex(fd.self))
    for (ServerId p : gr.predecessors(fd.self)) {
      auto it = fd.last_heard.find(p);
      heard[p] = it == fd.last_heard.end() ? now : it->second;
    }
  fd.last_heard = std::move(heard);

  std::set<ServerId> targets;
  if (gr.has_vertex(fd.self))
    for (ServerId s : gr.successors(fd.self)) targets.insert(s);
  if (next_gr && next_gr->has_vertex(fd.self))
    for (ServerId s : next_gr->successors(fd.self)) targets.insert(s);
  fd.heartbeat_targets.assign(targets.begin(), targets.end());
}

}  // namespace dualcast
