#pragma once

#include <cstdint>
#include <optional>
#include <set>

#include "dualcast/overlay.hpp"

namespace dualcast {

struct ServerState;

struct PartitionProbe {
  std::uint64_t epoch = 0;
  std::uint64_t round = 0;
  std::set<ServerId> forward_acks;
  std::set<ServerId> backward_acks;
};

// True iff both ack sets hold a strict majority of n servers.
bool partition_gate(const PartitionProbe& probe, std::size_t n);

// True iff the unreliable round `round` of the server's current epoch may be
// delivered: at least f other servers' messages from round+2 have arrived (or
// the server is already past round+2).
bool uniform_gate(const ServerState& s, std::uint64_t epoch, std::uint64_t round);

// Throws ConfigError when uniform delivery is requested with n <= 2f.
void check_uniform_config(int n, int f, bool uniform);

struct EonPlan {
  std::uint64_t min_round = 0;          // first round that may be transitional
  std::optional<Digraph> graph;         // explicit next reliable digraph
  std::optional<DigraphSpec> family;    // or a family built over the members at entry
};

struct EonState {
  std::uint64_t eon = 1;
  std::optional<Digraph> next_gr;  // present iff in_transitional_round
  bool in_transitional_round = false;
  std::optional<EonPlan> plan;
  std::set<ServerId> requests;  // owners of eon requests seen in this eon
};

// Marks the next reliable round transitional with new_gr as the next reliable
// digraph. Throws ConfigError if new_gr's vertices differ from the current ones
// or a transition is already pending.
void begin_eon_transition(ServerState& s, const Digraph& new_gr);
// Variant used by scenarios: every reliable round with round >= min_round is
// entered as transitional until one completes; the next digraph is built from
// `family` over the members at entry. Since completed reliable rounds are the
// same at all non-faulty servers, so is the transitional one.
void schedule_eon_transition(ServerState& s, const DigraphSpec& family, std::uint64_t min_round);

}  // namespace dualcast
