#include "dualcast/protocol.hpp"

#include <algorithm>
#include <cstring>

namespace dualcast {

std::string to_string(const StateLabel& l) {
  const char* k = l.kind == RoundKind::reliable ? "R" : l.kind == RoundKind::unreliable ? "U" : "F";
  return std::string(k) + "(" + std::to_string(l.epoch) + "," + std::to_string(l.round) + ")";
}

std::string to_string(Transition t) {
  switch (t) {
    case Transition::uu: return "uu";
    case Transition::rf: return "rf";
    case Transition::ur: return "ur";
    case Transition::fr: return "fr";
    case Transition::rr: return "rr";
    case Transition::sk: return "sk";
  }
  return "?";
}

std::string to_string(Channel c) {
  switch (c) {
    case Channel::unreliable: return "unreliable";
    case Channel::reliable: return "reliable";
    case Channel::fd: return "fd";
  }
  return "?";
}

StateLabel apply_transition(const StateLabel& l, Transition t) {
  auto illegal = [&] {
    throw IllegalTransition("transition " + to_string(t) + " is not legal from " + to_string(l));
  };
  switch (t) {
    case Transition::uu:
      if (!l.unreliable()) illegal();
      return {l.epoch, l.round + 1, RoundKind::unreliable};
    case Transition::ur:
      if (l.kind != RoundKind::unreliable || l.round == 0) illegal();
      return {l.epoch + 1, l.round - 1, RoundKind::reliable};
    case Transition::fr:
      if (l.kind != RoundKind::unreliable_first) illegal();
      return {l.epoch + 1, l.round, RoundKind::reliable};
    case Transition::rf:
      if (!l.reliable()) illegal();
      return {l.epoch, l.round + 1, RoundKind::unreliable_first};
    case Transition::rr:
      if (!l.reliable()) illegal();
      return {l.epoch + 1, l.round + 1, RoundKind::reliable};
    case Transition::sk:
      if (!l.reliable()) illegal();
      return {l.epoch, l.round + 1, RoundKind::reliable};
  }
  illegal();
  return l;
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

Message make_message(const MessageId& id, std::shared_ptr<const Bytes> payload) {
  Message m{id, std::move(payload), 0};
  m.digest = m.payload ? fnv1a(m.payload->data(), m.payload->size()) : fnv1a(nullptr, 0);
  return m;
}

std::size_t Packet::wire_size() const {
  constexpr std::size_t header = 32;
  return kind == PacketKind::bcast || kind == PacketKind::rbcast ? header + msg.size() : header;
}

std::vector<Message> deterministic_delivery_order(const MessageSet& m) {
  std::vector<Message> out;
  out.reserve(m.size());
  for (const auto& [_, msg] : m) out.push_back(msg);
  std::stable_sort(out.begin(), out.end(),
                   [](const Message& a, const Message& b) { return a.id.source < b.id.source; });
  return out;
}

namespace {

[[noreturn]] void trap(const ServerState& s, const std::string& what) {
  throw ProtocolViolation("server " + std::to_string(s.id) + " in " + to_string(s.label) + ": " + what);
}

std::string describe(const MessageId& id) {
  return std::string(id.type == MsgType::reliable ? "R" : "U") + "-msg from " + std::to_string(id.source) + " (" +
         std::to_string(id.epoch) + "," + std::to_string(id.round) + ")";
}

void send(const Packet& p, std::vector<ServerId> to, Channel ch, Effects& out) {
  if (to.empty()) return;
  out.push_back(SendEffect{p, std::move(to), ch});
}

Packet packet_for(const ServerState& s, PacketKind kind, const Message& m) {
  Packet p;
  p.kind = kind;
  p.msg = m;
  p.eon = s.eon.eon;
  return p;
}

void send_unreliable(const ServerState& s, const Message& m, Effects& out) {
  send(packet_for(s, PacketKind::bcast, m), s.gu->forward_targets(m.id.source, s.id), Channel::unreliable, out);
}

void send_reliable(const ServerState& s, const Message& m, Effects& out) {
  send(packet_for(s, PacketKind::rbcast, m), s.gr.successors(s.id), Channel::reliable, out);
}

void maybe_enter_transitional(ServerState& s, Effects& out) {
  auto& eon = s.eon;
  if (!s.label.reliable() || !eon.plan || s.label.round < eon.plan->min_round) return;
  if (eon.plan->graph) {
    std::set<ServerId> gone;
    for (ServerId v : eon.plan->graph->vertices())
      if (!s.gr.has_vertex(v)) gone.insert(v);
    eon.next_gr = remove_servers(*eon.plan->graph, gone);
  } else {
    DigraphSpec spec = *eon.plan->family;
    const auto members = s.gr.vertices();
    if (spec.family == Family::circulant) spec.d = std::min<int>(spec.d, static_cast<int>(members.size()) - 1);
    spec.n = std::max<int>(spec.n, 2);
    eon.next_gr = members.size() >= 2 ? build_overlay_over(spec, members) : Digraph(members);
  }
  eon.in_transitional_round = true;
  out.push_back(EonEffect{eon.eon, false});
}

void set_label(ServerState& s, Transition t, Effects& out) {
  const StateLabel from = s.label;
  s.label = apply_transition(from, t);
  out.push_back(TransitionEffect{from, s.label, t});
  maybe_enter_transitional(s, out);
}

void recount_tracking(ServerState& s) {
  s.tracking_busy = 0;
  for (const auto& [_, g] : s.tracking) s.tracking_busy += !g.finished();
}

void reset_tracking(ServerState& s) {
  s.tracking.clear();
  for (ServerId v : s.gr.vertices()) s.tracking.emplace(v, TrackingDigraph::fresh(v));
  s.tracking_busy = s.tracking.size();
}

void replay_notifications(ServerState& s) {
  if (s.F.empty()) return;
  const std::vector<Notification> all(s.F.begin(), s.F.end());
  for (auto& [_, g] : s.tracking) update_tracking_digraph_in_place(g, {}, all, s.gr);
  recount_tracking(s);
}

std::shared_ptr<const Bytes> make_payload(const ServerState& s, std::uint64_t round) {
  const std::size_t size = is_eager(s) ? s.config.payload_size : 0;
  auto bytes = std::make_shared<Bytes>(size, '\0');
  std::uint64_t salt = static_cast<std::uint64_t>(s.id) * 1000003ULL + round * 7919ULL;
  if (s.config.relax_rerun_identity) salt ^= s.label.epoch * 0x9e3779b97f4a7c15ULL;
  for (std::size_t i = 0; i < size; ++i) (*bytes)[i] = static_cast<char>((salt >> ((i % 8) * 8)) + i);
  if (size >= 16) {
    std::memcpy(bytes->data(), &s.id, sizeof(s.id));
    std::memcpy(bytes->data() + 8, &round, sizeof(round));
  }
  return bytes;
}

void push_delivery(ServerState& s, DeliverEffect d, bool uniform_gated, bool partition_gated) {
  PendingDelivery p;
  p.round = std::move(d);
  p.uniform_gated = uniform_gated;
  p.partition_gated = partition_gated;
  p.released = !uniform_gated && !partition_gated;
  p.membership = s.gr.size();
  s.pending.push_back(std::move(p));
}

// A-delivery of a completed unreliable round (M_prev).
void deliver_unreliable(ServerState& s, MessageSet& set, std::uint64_t round, Effects&) {
  if (set.empty()) trap(s, "unreliable round " + std::to_string(round) + " completed with no messages");
  const std::uint64_t epoch = set.begin()->first.epoch;
  push_delivery(s, DeliverEffect{epoch, round, false, deterministic_delivery_order(set)}, s.config.uniform, false);
}

bool own_in_M(const ServerState& s) {
  const MsgType t = s.label.reliable() ? MsgType::reliable : MsgType::unreliable;
  return s.M.count(MessageId{s.id, s.label.epoch, s.label.round, t}) != 0;
}

void broadcast(ServerState& s, const Message& m, Effects& out) {
  if (s.M.try_emplace(m.id, m).second) send_unreliable(s, m, out);
}

void rbroadcast(ServerState& s, const Message& m, Effects& out) {
  if (s.M.try_emplace(m.id, m).second) send_reliable(s, m, out);
  auto it = s.tracking.find(m.id.source);
  if (it != s.tracking.end() && !it->second.finished()) {
    it->second.g.clear();
    --s.tracking_busy;
  }
}

void to_broadcast(ServerState& s, const Message& m, Effects& out) {
  if (s.label.unreliable())
    broadcast(s, m, out);
  else
    rbroadcast(s, m, out);
}

void main_loop_step(ServerState& s, Effects& out) {
  if (!s.terminated && is_eager(s) && !own_in_M(s)) a_broadcast_own(s, out);
}

void complete_reliable(ServerState& s, Effects& out) {
  const StateLabel done = s.label;
  const std::size_t membership = s.gr.size();

  std::set<ServerId> removed;
  for (ServerId v : s.gr.vertices()) {
    bool have = false;
    for (const auto& [id, _] : s.M)
      if (id.source == v) {
        have = true;
        break;
      }
    if (!have) removed.insert(v);
  }

  for (auto& p : s.pending)
    if (p.uniform_gated) p.released = true;
  push_delivery(s, DeliverEffect{done.epoch, done.round, true, deterministic_delivery_order(s.M)}, false,
                s.config.partition);
  s.pending.back().membership = membership;

  if (s.config.partition) {
    auto& probe = s.probes[{done.epoch, done.round}];
    probe.epoch = done.epoch;
    probe.round = done.round;
    probe.forward_acks.insert(s.id);
    probe.backward_acks.insert(s.id);
  }

  if (!removed.empty()) {
    out.push_back(RemoveEffect{std::vector<ServerId>(removed.begin(), removed.end())});
    s.gu = std::make_shared<const Dissemination>(s.gu->without(removed));
    s.gr = remove_servers(s.gr, removed);
    for (auto it = s.F.begin(); it != s.F.end();)
      it = removed.count(it->first) || removed.count(it->second) ? s.F.erase(it) : std::next(it);
    for (ServerId v : removed) s.local_suspects.erase(v);
  }

  if (s.config.partition) {
    Probe fwd{s.id, done.epoch, done.round, ProbeDir::forward};
    Probe bwd{s.id, done.epoch, done.round, ProbeDir::backward};
    Packet pf;
    pf.kind = PacketKind::probe;
    pf.probe = fwd;
    pf.eon = s.eon.eon;
    Packet pb = pf;
    pb.probe = bwd;
    send(pf, s.gr.successors(s.id), Channel::reliable, out);
    std::vector<ServerId> preds;
    for (ServerId p : s.gr.predecessors(s.id))
      if (!s.local_suspects.count(p)) preds.push_back(p);
    send(pb, preds, Channel::reliable, out);
  }

  if (s.eon.in_transitional_round) {
    s.gr = remove_servers(*s.eon.next_gr, removed);
    s.eon.next_gr.reset();
    s.eon.in_transitional_round = false;
    s.eon.plan.reset();
    s.eon.requests.clear();
    s.eon.eon += 1;
    s.F.clear();
    s.local_suspects.clear();
    out.push_back(EonEffect{s.eon.eon, true});
  }

  reset_tracking(s);
  s.M_prev.clear();

  if (removed.count(s.id)) {
    s.M.clear();
    s.M_next.clear();
    s.terminated = true;
    out.push_back(SelfTerminateEffect{"removed by round agreement"});
    return;
  }

  if (s.F.empty() && !s.config.reliable_only) {
    set_label(s, Transition::rf, out);
    for (const auto& [_, m] : s.M_next) send_unreliable(s, m, out);
    s.M = std::move(s.M_next);
    s.M_next.clear();
  } else {
    set_label(s, Transition::rr, out);
    bool old_unreliable = false;
    for (const auto& [id, _] : s.M_next)
      if (id.epoch + 1 == s.label.epoch) old_unreliable = true;
    if (old_unreliable) {
      s.M_next.clear();
      s.M.clear();
    } else {
      s.M = std::move(s.M_next);
      s.M_next.clear();
      for (const auto& [id, _] : s.M) {
        auto it = s.tracking.find(id.source);
        if (it != s.tracking.end()) it->second.g.clear();
      }
    }
    recount_tracking(s);
    replay_notifications(s);
  }
  if (!s.M.empty()) a_broadcast_own(s, out);
}

}  // namespace

bool is_eager(const ServerState& s) { return s.label.round <= s.config.eager_until_round; }

Message own_message(ServerState& s) {
  auto it = s.own_payloads.find(s.label.round);
  if (it == s.own_payloads.end() || s.config.relax_rerun_identity)
    it = s.own_payloads.insert_or_assign(s.label.round, make_payload(s, s.label.round)).first;
  const MsgType t = s.label.reliable() ? MsgType::reliable : MsgType::unreliable;
  return make_message(MessageId{s.id, s.label.epoch, s.label.round, t}, it->second);
}

ServerState init_server(ServerId id, int n, const DigraphSpec& unreliable, const DigraphSpec& reliable,
                        const ServerConfig& config) {
  DigraphSpec u = unreliable, r = reliable;
  u.n = n;
  r.n = n;
  return init_server(id, std::make_shared<const Dissemination>(u), build_overlay(r), config);
}

ServerState init_server(ServerId id, std::shared_ptr<const Dissemination> gu, Digraph gr,
                        const ServerConfig& config, int kappa_gr) {
  if (kappa_gr < 0) kappa_gr = vertex_connectivity(gr);
  if (config.f < 0) throw ConfigError("f must be non-negative");
  if (config.f >= kappa_gr)
    throw ConfigError("f=" + std::to_string(config.f) + " must be below the reliable digraph connectivity " +
                      std::to_string(kappa_gr));
  check_uniform_config(static_cast<int>(gr.size()), config.f, config.uniform);
  if (!gr.has_vertex(id) || !gu->contains(id)) throw ConfigError("server " + std::to_string(id) + " not in overlay");
  ServerState s;
  s.id = id;
  s.config = config;
  s.gu = std::move(gu);
  s.gr = std::move(gr);
  s.label = StateLabel{1, 0, RoundKind::reliable};
  reset_tracking(s);
  s.label = apply_transition(s.label, config.reliable_only ? Transition::rr : Transition::rf);
  return s;
}

Effects start_server(ServerState& s) {
  Effects out;
  const StateLabel init{1, 0, RoundKind::reliable};
  const Transition t = s.config.reliable_only ? Transition::rr : Transition::rf;
  out.push_back(TransitionEffect{init, s.label, t});
  maybe_enter_transitional(s, out);
  main_loop_step(s, out);
  return out;
}

void a_broadcast_own(ServerState& s, Effects& out) {
  if (s.terminated || own_in_M(s)) return;
  Message m = own_message(s);
  out.push_back(BroadcastEffect{m});
  to_broadcast(s, m, out);
}

void handle_unreliable_msg(ServerState& s, const Message& m, Effects& out) {
  const auto e = m.id.epoch, r = m.id.round;
  if (e > s.label.epoch) trap(s, describe(m.id) + " from a later epoch");
  if (e < s.label.epoch || r < s.label.round) return;
  if (r > s.label.round) {
    if (r != s.label.round + 1) trap(s, describe(m.id) + " more than one round ahead");
    for (const auto& [id, _] : s.M_next)
      if (id.epoch != s.label.epoch) return;  // reliable next-epoch messages win
    s.M_next.emplace(m.id, m);
    return;
  }
  if (s.label.reliable()) trap(s, describe(m.id) + " while in a reliable round of the same epoch and round");
  broadcast(s, m, out);
  a_broadcast_own(s, out);
  try_to_complete(s, out);
}

void handle_reliable_msg(ServerState& s, const Message& m, Effects& out) {
  const auto e = m.id.epoch, r = m.id.round;
  if (e < s.label.epoch || r < s.label.round) return;
  if (e > s.label.epoch) {
    if (e != s.label.epoch + 1 || r != s.label.round + 1 || !s.label.reliable())
      trap(s, describe(m.id) + " from a later epoch");
    send_reliable(s, m, out);
    for (const auto& [id, _] : s.M_next)
      if (id.epoch == s.label.epoch) {
        s.M_next.clear();
        break;
      }
    s.M_next.emplace(m.id, m);
    return;
  }
  if (!s.label.reliable()) trap(s, describe(m.id) + " while in an unreliable round of the same epoch");
  if (r > s.label.round + 1) trap(s, describe(m.id) + " more than one round ahead");
  if (r == s.label.round + 1) {
    // Peers already completed the unreliable round this reliable round reruns.
    if (s.M_prev.empty()) trap(s, "skip transition without a completed unreliable round");
    deliver_unreliable(s, s.M_prev, s.label.round, out);
    s.M_prev.clear();
    s.M.clear();
    s.M_next.clear();
    reset_tracking(s);
    replay_notifications(s);
    set_label(s, Transition::sk, out);
  }
  rbroadcast(s, m, out);
  a_broadcast_own(s, out);
  try_to_complete(s, out);
}

namespace {

void forward_and_roll_back(ServerState& s, const FailureNotification& fn, Effects& out) {
  Packet p;
  p.kind = PacketKind::fail;
  p.fn = fn;
  p.eon = s.eon.eon;
  send(p, s.gr.successors(s.id), Channel::reliable, out);
  if (s.label.unreliable()) {
    s.M.clear();
    s.M_next.clear();
    if (s.label.kind == RoundKind::unreliable) {
      if (s.M_prev.empty()) trap(s, "rollback from a non-first unreliable round without a completed round");
      set_label(s, Transition::ur, out);
    } else {
      set_label(s, Transition::fr, out);
    }
  }
}

}  // namespace

void handle_failure_notification(ServerState& s, const FailureNotification& fn, Effects& out) {
  if (fn.target == kEonRequest) {
    if (!s.gr.has_vertex(fn.owner) || !s.eon.plan || !s.eon.requests.insert(fn.owner).second) return;
    forward_and_roll_back(s, fn, out);
    try_to_complete(s, out);
    return;
  }
  if (!s.gr.has_vertex(fn.target) || !s.gr.has_vertex(fn.owner)) return;
  const Notification key{fn.target, fn.owner};
  if (s.F.count(key)) return;
  forward_and_roll_back(s, fn, out);
  for (auto& [_, g] : s.tracking) update_tracking_digraph_in_place(g, s.F, {key}, s.gr);
  recount_tracking(s);
  s.F.insert(key);
  try_to_complete(s, out);
}

void try_to_complete(ServerState& s, Effects& out) {
  for (;;) {
    if (s.terminated) return;
    if (s.label.unreliable()) {
      if (s.M.size() != s.gu->members().size()) return;
      const StateLabel done = s.label;
      if (done.kind == RoundKind::unreliable) deliver_unreliable(s, s.M_prev, done.round - 1, out);
      set_label(s, Transition::uu, out);
      for (const auto& [_, m] : s.M_next) send_unreliable(s, m, out);
      s.M_prev = std::move(s.M);
      s.M = std::move(s.M_next);
      s.M_next.clear();
      if (!s.M.empty()) a_broadcast_own(s, out);
    } else {
      if (s.tracking_busy > 0) return;
      complete_reliable(s, out);
    }
  }
}

void handle_probe(ServerState& s, const Probe& p, ServerId, Effects& out) {
  if (!s.config.partition) return;
  auto& probe = s.probes[{p.epoch, p.round}];
  probe.epoch = p.epoch;
  probe.round = p.round;
  auto& acks = p.dir == ProbeDir::forward ? probe.forward_acks : probe.backward_acks;
  if (!acks.insert(p.source).second) return;
  Packet pk;
  pk.kind = PacketKind::probe;
  pk.probe = p;
  pk.eon = s.eon.eon;
  if (p.dir == ProbeDir::forward) {
    send(pk, s.gr.successors(s.id), Channel::reliable, out);
  } else {
    std::vector<ServerId> preds;
    for (ServerId q : s.gr.predecessors(s.id))
      if (!s.local_suspects.count(q)) preds.push_back(q);
    send(pk, preds, Channel::reliable, out);
  }
}

void drain_deliveries(ServerState& s, Effects& out) {
  while (!s.pending.empty()) {
    auto& front = s.pending.front();
    if (!front.released) {
      bool open = true;
      if (front.uniform_gated) open = uniform_gate(s, front.round.epoch, front.round.round);
      if (open && front.partition_gated) {
        auto it = s.probes.find({front.round.epoch, front.round.round});
        open = it != s.probes.end() && partition_gate(it->second, front.membership);
      }
      if (!open) return;
    }
    DeliverEffect d = std::move(front.round);
    s.pending.pop_front();
    if (d.round != s.last_delivered + 1)
      trap(s, "delivery of round " + std::to_string(d.round) + " after round " + std::to_string(s.last_delivered));
    s.last_delivered = d.round;
    s.own_payloads.erase(s.own_payloads.begin(), s.own_payloads.upper_bound(d.round));
    if (s.config.keep_log) s.delivered.push_back(d);
    out.push_back(std::move(d));
  }
}

Effects self_terminate(ServerState& s, const std::string& reason) {
  Effects out;
  if (s.terminated) return out;
  s.terminated = true;
  out.push_back(SelfTerminateEffect{reason});
  return out;
}

namespace {

void dispatch(ServerState& s, const Packet& p, ServerId from, Effects& out) {
  switch (p.kind) {
    case PacketKind::bcast:
      handle_unreliable_msg(s, p.msg, out);
      break;
    case PacketKind::rbcast:
      handle_reliable_msg(s, p.msg, out);
      break;
    case PacketKind::fail:
      handle_failure_notification(s, p.fn, out);
      break;
    case PacketKind::probe:
      handle_probe(s, p.probe, from, out);
      break;
  }
}

bool postpone_or_drop(ServerState& s, const Packet& p, ServerId from) {
  const std::uint64_t eon = p.kind == PacketKind::fail ? p.fn.eon : p.eon;
  if (p.kind != PacketKind::fail && p.kind != PacketKind::rbcast) return false;
  if (eon < s.eon.eon) return p.kind == PacketKind::fail;
  if (eon > s.eon.eon) {
    s.postponed.emplace_back(p, from);
    return true;
  }
  return false;
}

void finish(ServerState& s, Effects& out, std::uint64_t eon_before) {
  main_loop_step(s, out);
  drain_deliveries(s, out);
  while (!s.terminated && s.eon.eon != eon_before && !s.postponed.empty()) {
    eon_before = s.eon.eon;
    auto queued = std::move(s.postponed);
    s.postponed.clear();
    for (const auto& [p, from] : queued) {
      if (s.terminated) break;
      if (postpone_or_drop(s, p, from)) continue;
      dispatch(s, p, from, out);
      main_loop_step(s, out);
      drain_deliveries(s, out);
    }
  }
}

}  // namespace

Effects receive_packet(ServerState& s, const Packet& p, ServerId from) {
  Effects out;
  if (s.terminated) return out;
  if (postpone_or_drop(s, p, from)) return out;
  const std::uint64_t eon_before = s.eon.eon;
  dispatch(s, p, from, out);
  finish(s, out, eon_before);
  return out;
}

Effects request_eon_transition(ServerState& s) {
  Effects out;
  if (s.terminated) return out;
  const std::uint64_t eon_before = s.eon.eon;
  handle_failure_notification(s, FailureNotification{kEonRequest, s.id, s.eon.eon}, out);
  finish(s, out, eon_before);
  return out;
}

Effects local_suspicion(ServerState& s, ServerId target, std::uint64_t eon) {
  Effects out;
  if (s.terminated || eon < s.eon.eon) return out;
  s.local_suspects.insert(target);
  Packet p;
  p.kind = PacketKind::fail;
  p.fn = FailureNotification{target, s.id, eon};
  p.eon = eon;
  if (postpone_or_drop(s, p, s.id)) return out;
  const std::uint64_t eon_before = s.eon.eon;
  handle_failure_notification(s, p.fn, out);
  finish(s, out, eon_before);
  return out;
}

}  // namespace dualcast
