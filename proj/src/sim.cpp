#include "dualcast/sim.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

namespace dualcast {

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::completed: return "completed";
    case Outcome::time_bound: return "time_bound";
    case Outcome::violation: return "violation";
  }
  return "?";
}

namespace {

enum class EvType : std::uint8_t { packet, heartbeat, crash, tick, spike };

struct Event {
  SimTime time = 0;
  std::uint64_t seq = 0;
  EvType type = EvType::tick;
  ServerId from = -1;
  ServerId to = -1;
  Channel channel = Channel::unreliable;
  SimTime depart = 0;
  std::uint32_t index = 0;  // spike index or packet slot
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }
};

struct ChannelState {
  SimTime last_arrival = 0;
  SimTime hold_until = 0;
};

}  // namespace

struct Simulator::Impl {
  Scenario sc;
  std::mt19937_64 rng;
  std::priority_queue<Event, std::vector<Event>, Later> queue;
  std::uint64_t seq = 0;
  SimTime now = 0;

  std::vector<ServerState> servers;
  std::vector<FdState> fds;
  std::vector<SimTime> link_free;
  std::vector<ChannelState> channels;
  std::vector<std::vector<SimTime>> pair_latency;
  std::vector<std::optional<SimTime>> scheduled_crash;
  std::vector<bool> dead;
  std::vector<SimTime> last_progress;
  std::vector<std::uint64_t> eon_sent;
  std::vector<bool> stall_done;
  std::vector<bool> crash_after_done;

  std::vector<Packet> slots;
  std::vector<std::uint32_t> free_slots;
  std::vector<bool> done_flag;
  int remaining = 0;  // live servers that have not delivered the last round

  Trace trace;
  bool violation = false;
  bool eon_requested = false;
  std::string violation_text;

  explicit Impl(Scenario s) : sc(std::move(s)), rng(sc.seed) {}

  int n() const { return sc.n; }

  ChannelState& chan(ServerId a, ServerId b, Channel c) {
    return channels[(static_cast<std::size_t>(a) * n() + b) * 3 + static_cast<std::size_t>(c)];
  }

  void push(Event e) {
    e.seq = seq++;
    queue.push(std::move(e));
  }

  void setup() {
    const int N = n();
    DigraphSpec u = sc.unreliable, r = sc.reliable;
    u.n = N;
    r.n = N;
    auto gu = std::make_shared<const Dissemination>(u);
    Digraph gr = build_overlay(r);
    const int kappa = vertex_connectivity(gr);

    ServerConfig cfg;
    cfg.f = sc.f;
    cfg.uniform = sc.uniform;
    cfg.partition = sc.partition;
    cfg.reliable_only = sc.reliable_only;
    cfg.relax_rerun_identity = sc.relax_rerun_identity;
    cfg.eager_until_round = sc.rounds + 3;
    cfg.payload_size = sc.payload;
    cfg.keep_log = false;

    for (ServerId i = 0; i < N; ++i) {
      servers.push_back(init_server(i, gu, gr, cfg, kappa));
      if (sc.eon) schedule_eon_transition(servers.back(), sc.eon->family, sc.eon->round);
      fds.push_back(fd_init(i, sc.fd, gr, 0));
    }
    link_free.assign(N, 0);
    channels.assign(static_cast<std::size_t>(N) * N * 3, {});
    scheduled_crash.resize(N);
    dead.assign(N, false);
    done_flag.assign(N, false);
    remaining = N;
    last_progress.assign(N, 0);
    eon_sent.assign(N, 1);
    stall_done.assign(sc.stalls.size(), false);
    crash_after_done.assign(sc.crash_after.size(), false);

    pair_latency.assign(N, std::vector<SimTime>(N, sc.hop_us));
    if (sc.latency == LatencyProfile::mdc) {
      const int k = sc.datacenters;
      std::vector<std::vector<SimTime>> dc(k, std::vector<SimTime>(k, sc.hop_us));
      std::uniform_int_distribution<SimTime> inter(2500, 8900);
      for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) dc[a][b] = dc[b][a] = inter(rng);
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) pair_latency[a][b] = dc[a % k][b % k];
    }

    trace.n = N;
    trace.level = sc.trace;
    trace.exceeds_f = sc.exceeds_f;
    trace.reliable_only = sc.reliable_only;
    trace.perfect_fd = sc.fd.mode == FdMode::perfect;
    trace.target_rounds = sc.rounds;
    trace.logs.resize(N);
    trace.crashed_at.resize(N);
    trace.terminated_at.resize(N);
    trace.sends_by_server.assign(N, 0);

    if (sc.fail_count > 0) {
      std::vector<ServerId> ids(N);
      for (int i = 0; i < N; ++i) ids[i] = i;
      std::shuffle(ids.begin(), ids.end(), rng);
      std::uniform_int_distribution<SimTime> when(0, sc.fail_window_us);
      for (int i = 0; i < sc.fail_count && i < N; ++i)
        if (!scheduled_crash[ids[i]]) schedule_crash(ids[i], when(rng));
    }
    for (const auto& f : sc.failures) schedule_crash(f.server, f.time);
    for (std::size_t i = 0; i < sc.spikes.size(); ++i) {
      Event e;
      e.type = EvType::spike;
      e.time = sc.spikes[i].time;
      e.index = static_cast<std::uint32_t>(i);
      push(e);
    }
  }

  void schedule_crash(ServerId s, SimTime t) {
    if (s < 0 || s >= n()) throw ConfigError("server " + std::to_string(s) + " out of range");
    if (scheduled_crash[s] || dead[s]) throw ConfigError("server " + std::to_string(s) + " already crashed");
    scheduled_crash[s] = t;
    Event e;
    e.type = EvType::crash;
    e.time = t;
    e.from = s;
    push(e);
  }

  SimTime latency(ServerId a, ServerId b) {
    SimTime l = pair_latency[a][b];
    if (sc.jitter_us > 0) l += std::uniform_int_distribution<SimTime>(0, sc.jitter_us)(rng);
    return l;
  }

  void transmit(ServerId from, ServerId to, Channel ch, const Packet* p) {
    auto& c = chan(from, to, ch);
    SimTime depart;
    if (ch == Channel::fd) {
      depart = now;
    } else {
      const auto bytes = static_cast<double>(p->wire_size());
      const SimTime cost = sc.per_message_us + static_cast<SimTime>(std::ceil(bytes * sc.ns_per_byte / 1000.0));
      const SimTime start = std::max(now, link_free[from]);
      depart = start + cost;
      link_free[from] = depart;
    }
    depart = std::max(depart, c.hold_until);
    SimTime arrival = std::max(depart + latency(from, to), c.last_arrival);
    c.last_arrival = arrival;
    Event e;
    e.type = p ? EvType::packet : EvType::heartbeat;
    e.time = arrival;
    e.from = from;
    e.to = to;
    e.channel = ch;
    e.depart = depart;
    if (p) {
      if (free_slots.empty()) {
        e.index = static_cast<std::uint32_t>(slots.size());
        slots.push_back(*p);
      } else {
        e.index = free_slots.back();
        free_slots.pop_back();
        slots[e.index] = *p;
      }
    }
    push(e);
  }

  void record(TraceEvent ev) {
    ev.time = now;
    trace.events.push_back(std::move(ev));
  }

  bool full() const { return sc.trace == TraceLevel::full; }

  void hold(ServerId from, std::optional<ServerId> to, bool fd, bool proto, SimTime until) {
    for (ServerId t = 0; t < n(); ++t) {
      if (to && *to != t) continue;
      if (fd) chan(from, t, Channel::fd).hold_until = std::max(chan(from, t, Channel::fd).hold_until, until);
      if (proto)
        for (Channel c : {Channel::unreliable, Channel::reliable})
          chan(from, t, c).hold_until = std::max(chan(from, t, c).hold_until, until);
    }
  }

  void mark_done(ServerId s) {
    if (!done_flag[s]) {
      done_flag[s] = true;
      --remaining;
    }
  }

  void kill(ServerId s, bool crash, const std::string& why) {
    if (dead[s]) return;
    dead[s] = true;
    mark_done(s);
    TraceEvent ev;
    ev.server = s;
    ev.kind = crash ? EventKind::crash : EventKind::terminate;
    ev.label = servers[s].label;
    ev.note = why;
    record(ev);
    if (crash)
      trace.crashed_at[s] = now;
    else
      trace.terminated_at[s] = now;
  }

  void trap(ServerId s, const std::string& what) {
    TraceEvent ev;
    ev.server = s;
    ev.kind = EventKind::trap;
    ev.label = servers[s].label;
    ev.note = what;
    record(ev);
    if (sc.fd.mode == FdMode::eventually_perfect) {
      servers[s].terminated = true;
      kill(s, false, "protocol trap");
    } else if (!violation) {
      violation = true;
      violation_text = what;
    }
  }

  void apply(ServerId s, const Effects& effects, StateLabel label) {
    auto& st = servers[s];
    bool membership_changed = false;
    for (const auto& eff : effects) {
      if (std::holds_alternative<RemoveEffect>(eff) || std::holds_alternative<EonEffect>(eff))
        membership_changed = true;
      if (const auto* send = std::get_if<SendEffect>(&eff)) {
        if (send->packet.eon > eon_sent[s]) {
          eon_sent[s] = send->packet.eon;
          TraceEvent ev;
          ev.server = s;
          ev.kind = EventKind::eon_first_send;
          ev.label = label;
          ev.value = send->packet.eon;
          record(ev);
        }
        const auto& p = send->packet;
        const bool data = p.kind == PacketKind::bcast || p.kind == PacketKind::rbcast;
        if (data) trace.transmissions[p.msg.id] += send->to.size();
        trace.sends_by_server[s] += send->to.size();
        for (ServerId to : send->to) {
          transmit(s, to, send->channel, &p);
          if (full()) {
            TraceEvent ev;
            ev.server = s;
            ev.kind = EventKind::send;
            ev.peer = to;
            ev.label = label;
            ev.msg = p.msg.id;
            ev.packet = p.kind;
            ev.channel = send->channel;
            record(ev);
          }
        }
      } else if (const auto* b = std::get_if<BroadcastEffect>(&eff)) {
        const auto key = std::make_pair(s, b->msg.id.round);
        trace.first_broadcast.emplace(key, now);
        trace.broadcast_digests.emplace(s, b->msg.id.round, b->msg.digest);
        if (full()) {
          TraceEvent ev;
          ev.server = s;
          ev.kind = EventKind::broadcast;
          ev.label = label;
          ev.msg = b->msg.id;
          ev.packet = b->msg.id.type == MsgType::reliable ? PacketKind::rbcast : PacketKind::bcast;
          ev.channel = b->msg.id.type == MsgType::reliable ? Channel::reliable : Channel::unreliable;
          record(ev);
        }
      } else if (const auto* d = std::get_if<DeliverEffect>(&eff)) {
        DeliveryRecord rec;
        rec.epoch = d->epoch;
        rec.round = d->round;
        rec.time = now;
        rec.reliable = d->reliable;
        rec.digest = round_digest(d->messages);
        rec.count = static_cast<std::uint32_t>(d->messages.size());
        for (const auto& m : d->messages) {
          if (m.id.source == s) rec.includes_self = true;
          if (full()) rec.sources.emplace_back(m.id.source, m.digest);
        }
        rec.event_index = trace.events.size();
        trace.logs[s].push_back(std::move(rec));
        if (d->round >= sc.rounds) mark_done(s);
        last_progress[s] = now;
        TraceEvent ev;
        ev.server = s;
        ev.kind = EventKind::deliver;
        ev.label = label;
        ev.value = d->round;
        ev.note = d->reliable ? "R" : "U";
        record(ev);
      } else if (const auto* r = std::get_if<RemoveEffect>(&eff)) {
        TraceEvent ev;
        ev.server = s;
        ev.kind = EventKind::remove;
        ev.label = label;
        ev.value = r->servers.size();
        for (ServerId x : r->servers) ev.note += (ev.note.empty() ? "" : ",") + std::to_string(x);
        record(ev);
      } else if (const auto* t = std::get_if<TransitionEffect>(&eff)) {
        trace.transition_counts[t->kind]++;
        last_progress[s] = now;
        TraceEvent ev;
        ev.server = s;
        ev.kind = EventKind::transition;
        ev.label = t->from;
        label = t->to;
        ev.label_to = t->to;
        ev.transition = t->kind;
        record(ev);
        for (std::size_t i = 0; i < sc.stalls.size(); ++i) {
          const auto& stall = sc.stalls[i];
          if (!stall_done[i] && stall.server == s && t->to.round == stall.round) {
            stall_done[i] = true;
            hold(s, std::nullopt, false, true, now + stall.duration);
          }
        }
      } else if (const auto* e = std::get_if<EonEffect>(&eff)) {
        TraceEvent ev;
        ev.server = s;
        ev.kind = e->switched ? EventKind::eon_switch : EventKind::eon_enter;
        ev.label = label;
        ev.value = e->eon;
        record(ev);
      } else if (const auto* x = std::get_if<SelfTerminateEffect>(&eff)) {
        kill(s, false, x->reason);
      }
    }
    if (membership_changed && !dead[s]) {
      const Digraph* next = st.eon.next_gr ? &*st.eon.next_gr : nullptr;
      fd_retarget(fds[s], st.gr, next, st.eon.eon, now);
    }
  }

  void after_event(ServerId s) {
    if (dead[s]) return;
    if (sc.eon && !eon_requested && servers[s].eon.plan && servers[s].label.round >= sc.eon->round + 2) {
      eon_requested = true;
      guarded(s, [&] { return request_eon_transition(servers[s]); });
      if (dead[s]) return;
    }
    for (std::size_t i = 0; i < sc.crash_after.size(); ++i) {
      const auto& c = sc.crash_after[i];
      if (!crash_after_done[i] && c.server == s && servers[s].last_delivered >= c.round) {
        crash_after_done[i] = true;
        kill(s, true, "crash after delivery");
      }
    }
  }

  template <class F>
  void guarded(ServerId s, F&& body) {
    const StateLabel before = servers[s].label;
    try {
      Effects eff = body();
      apply(s, eff, before);
    } catch (const ProtocolViolation& e) {
      trap(s, e.what());
    } catch (const IllegalTransition& e) {
      trap(s, e.what());
    }
    after_event(s);
  }

  void on_packet(const Event& e) {
    const Packet packet = std::move(slots[e.index]);
    free_slots.push_back(e.index);
    const ServerId s = e.to;
    if (dead[e.from] && trace.crashed_at[e.from] && e.depart > *trace.crashed_at[e.from]) return;
    if (dead[s]) return;
    auto& st = servers[s];
    if (should_suppress(fds[s], e.from, packet)) {
      if (full()) {
        TraceEvent ev;
        ev.server = s;
        ev.kind = EventKind::suppressed;
        ev.peer = e.from;
        ev.label = st.label;
        ev.msg = packet.msg.id;
        ev.packet = packet.kind;
        ev.channel = e.channel;
        record(ev);
      }
      return;
    }
    if (full()) {
      TraceEvent ev;
      ev.server = s;
      ev.kind = EventKind::receive;
      ev.peer = e.from;
      ev.label = st.label;
      ev.msg = packet.msg.id;
      ev.packet = packet.kind;
      ev.channel = e.channel;
      record(ev);
    }
    guarded(s, [&] { return receive_packet(st, packet, e.from); });
  }

  void on_tick(ServerId s) {
    if (dead[s]) return;
    auto& st = servers[s];
    FdOutput out = fd_tick(fds[s], now);
    for (ServerId to : out.heartbeats) transmit(s, to, Channel::fd, nullptr);
    for (const auto& fn : out.notifications) {
      TraceEvent ev;
      ev.server = s;
      ev.kind = EventKind::suspect;
      ev.peer = fn.target;
      ev.label = st.label;
      record(ev);
      guarded(s, [&] { return local_suspicion(st, fn.target, fn.eon); });
      if (dead[s]) return;
    }
    if (sc.partition && now - last_progress[s] > sc.partition_timeout &&
        (st.label.reliable() || !st.pending.empty())) {
      guarded(s, [&] { return self_terminate(st, "no primary partition reached"); });
      if (dead[s]) return;
    }
    Event e;
    e.type = EvType::tick;
    e.time = now + sc.fd.heartbeat_period;
    e.from = s;
    push(e);
  }

  bool finished() const { return remaining == 0; }

  SimResult run() {
    for (ServerId s = 0; s < n(); ++s) {
      Event e;
      e.type = EvType::tick;
      e.time = 0;
      e.from = s;
      push(e);
    }
    for (ServerId s = 0; s < n(); ++s) guarded(s, [&] { return start_server(servers[s]); });

    SimResult res;
    bool done = finished();
    while (!done && !violation && !queue.empty()) {
      const Event e = queue.top();
      if (e.time > sc.time_bound_us) break;
      queue.pop();
      now = e.time;
      switch (e.type) {
        case EvType::packet:
          on_packet(e);
          done = finished();
          break;
        case EvType::heartbeat:
          if (!dead[e.to]) fd_heard(fds[e.to], e.from, now);
          break;
        case EvType::crash:
          if (!dead[e.from]) {
            servers[e.from].terminated = true;
            kill(e.from, true, "scheduled");
            done = finished();
          }
          break;
        case EvType::tick:
          on_tick(e.from);
          done = finished();
          break;
        case EvType::spike: {
          const auto& sp = sc.spikes[e.index];
          hold(sp.from, sp.to, sp.what != SpikeTarget::proto, sp.what != SpikeTarget::fd, now + sp.duration);
          break;
        }
      }
    }
    trace.end_time = now;
    if (violation) {
      res.outcome = Outcome::violation;
      res.violation = violation_text;
    } else if (!done) {
      res.outcome = Outcome::time_bound;
      trace.hit_time_bound = true;
    }
    res.trace = std::move(trace);
    return res;
  }
};

Simulator::Simulator(Scenario scenario) : impl_(std::make_unique<Impl>(std::move(scenario))) { impl_->setup(); }
Simulator::~Simulator() = default;

void Simulator::inject_failure(ServerId server, SimTime time) { impl_->schedule_crash(server, time); }

SimResult Simulator::run() { return impl_->run(); }

const ServerState& Simulator::server(ServerId id) const { return impl_->servers.at(id); }
const Scenario& Simulator::scenario() const { return impl_->sc; }

SimResult run(const Scenario& s) {
  validate(s);
  Simulator sim(s);
  return sim.run();
}

}  // namespace dualcast
