#include "dualcast/membership.hpp"

#include "dualcast/protocol.hpp"

namespace dualcast {

bool partition_gate(const PartitionProbe& probe, std::size_t n) {
  return probe.forward_acks.size() * 2 > n && probe.backward_acks.size() * 2 > n;
}

bool uniform_gate(const ServerState& s, std::uint64_t epoch, std::uint64_t round) {
  const int f = s.config.f;
  if (f == 0) return true;
  if (s.label.epoch != epoch || !s.label.unreliable()) return false;
  if (s.label.round >= round + 3) return true;
  const MessageSet* set = nullptr;
  if (s.label.round == round + 2)
    set = &s.M;
  else if (s.label.round == round + 1)
    set = &s.M_next;
  if (!set) return false;
  int witnesses = 0;
  for (const auto& [id, _] : *set)
    if (id.epoch == epoch && id.round == round + 2 && id.type == MsgType::unreliable && id.source != s.id)
      ++witnesses;
  return witnesses >= f;
}

void check_uniform_config(int n, int f, bool uniform) {
  if (uniform && n <= 2 * f)
    throw ConfigError("uniform delivery needs n > 2f (n=" + std::to_string(n) + ", f=" + std::to_string(f) + ")");
}

void begin_eon_transition(ServerState& s, const Digraph& new_gr) {
  if (s.eon.plan || s.eon.in_transitional_round) throw ConfigError("an eon transition is already pending");
  if (new_gr.vertices() != s.gr.vertices())
    throw ConfigError("next reliable digraph must span exactly the current members");
  EonPlan plan;
  plan.min_round = s.label.reliable() ? s.label.round + 1 : 0;
  plan.graph = new_gr;
  s.eon.plan = std::move(plan);
}

void schedule_eon_transition(ServerState& s, const DigraphSpec& family, std::uint64_t min_round) {
  if (s.eon.plan || s.eon.in_transitional_round) throw ConfigError("an eon transition is already pending");
  EonPlan plan;
  plan.min_round = min_round;
  plan.family = family;
  s.eon.plan = std::move(plan);
}

}  // namespace dualcast
