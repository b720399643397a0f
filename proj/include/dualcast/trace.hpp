#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "dualcast/protocol.hpp"
#include "dualcast/scenario.hpp"

namespace dualcast {

enum class EventKind {
  broadcast,
  send,
  receive,
  deliver,
  transition,
  remove,
  crash,
  terminate,
  suspect,
  trap,
  eon_enter,
  eon_switch,
  eon_first_send,
  suppressed
};
std::string to_string(EventKind k);

struct TraceEvent {
  SimTime time = 0;
  ServerId server = 0;
  EventKind kind = EventKind::transition;
  ServerId peer = -1;
  StateLabel label;     // server label when the event happened (before, for transitions)
  StateLabel label_to;  // transitions only
  Transition transition = Transition::uu;
  MessageId msg;        // broadcast/send/receive/suppressed
  PacketKind packet = PacketKind::bcast;
  Channel channel = Channel::unreliable;
  std::uint64_t value = 0;  // eon number, removed count, delivered round
  std::string note;
};

struct DeliveryRecord {
  std::uint64_t epoch = 0;
  std::uint64_t round = 0;
  SimTime time = 0;
  bool reliable = false;
  std::uint64_t digest = 0;  // hash of the ordered (source, payload digest) list
  std::uint32_t count = 0;
  bool includes_self = false;
  std::vector<std::pair<ServerId, std::uint64_t>> sources;  // full traces only
  std::size_t event_index = 0;
};

struct Trace {
  int n = 0;
  TraceLevel level = TraceLevel::full;
  bool exceeds_f = false;
  bool hit_time_bound = false;
  bool reliable_only = false;
  bool perfect_fd = true;
  std::uint64_t target_rounds = 0;
  SimTime end_time = 0;

  std::vector<TraceEvent> events;
  std::vector<std::vector<DeliveryRecord>> logs;
  std::vector<std::optional<SimTime>> crashed_at;
  std::vector<std::optional<SimTime>> terminated_at;

  // (source, round) -> first broadcast time and payload digest per distinct digest
  std::map<std::pair<ServerId, std::uint64_t>, SimTime> first_broadcast;
  std::set<std::tuple<ServerId, std::uint64_t, std::uint64_t>> broadcast_digests;
  std::map<MessageId, std::uint64_t> transmissions;  // overlay channel sends per message
  std::vector<std::uint64_t> sends_by_server;
  std::map<Transition, std::uint64_t> transition_counts;

  bool faulty(ServerId s) const { return crashed_at[s].has_value() || terminated_at[s].has_value(); }
  bool correct(ServerId s) const { return !faulty(s); }

  void write_tsv(std::ostream& out) const;
  std::uint64_t hash() const;
};

std::uint64_t round_digest(const std::vector<Message>& ordered);

}  // namespace dualcast
