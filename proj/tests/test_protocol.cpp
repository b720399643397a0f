#include <gtest/gtest.h>

#include <random>

#include "dualcast/protocol.hpp"
#include "oracles.hpp"
#include "worked_example.hpp"

using namespace dualcast;

namespace {

constexpr RoundKind U = RoundKind::unreliable;
constexpr RoundKind F = RoundKind::unreliable_first;
constexpr RoundKind R = RoundKind::reliable;

DigraphSpec ring(int n) { return {Family::ring, n, 0, {}}; }
DigraphSpec circ(int n, int d) { return {Family::circulant, n, d, {}}; }

ServerState make(ServerId id, int n, DigraphSpec u, DigraphSpec r, int f, ServerConfig cfg = {}) {
  cfg.f = f;
  return init_server(id, n, u, r, cfg);
}

Message msg(ServerId src, std::uint64_t e, std::uint64_t r, MsgType t) {
  return make_message({src, e, r, t}, std::make_shared<const Bytes>("x"));
}
Message umsg(ServerId src, std::uint64_t e, std::uint64_t r) { return msg(src, e, r, MsgType::unreliable); }
Message rmsg(ServerId src, std::uint64_t e, std::uint64_t r) { return msg(src, e, r, MsgType::reliable); }

template <class T>
std::vector<T> all_of(const Effects& fx) {
  std::vector<T> v;
  for (const auto& e : fx)
    if (auto* p = std::get_if<T>(&e)) v.push_back(*p);
  return v;
}

// Sends of a given message id.
std::vector<std::vector<ServerId>> sends_of(const Effects& fx, const MessageId& id) {
  std::vector<std::vector<ServerId>> out;
  for (const auto& s : all_of<SendEffect>(fx))
    if ((s.packet.kind == PacketKind::bcast || s.packet.kind == PacketKind::rbcast) && s.packet.msg.id == id)
      out.push_back(s.to);
  return out;
}

void fill(MessageSet& m, std::initializer_list<Message> l) {
  for (const auto& x : l) m.emplace(x.id, x);
}

}  // namespace

TEST(Transitions, Examples) {
  EXPECT_EQ(apply_transition({2, 5, U}, Transition::ur), (StateLabel{3, 4, R}));
  EXPECT_EQ(apply_transition({3, 4, R}, Transition::sk), (StateLabel{3, 5, R}));
  EXPECT_THROW(apply_transition({2, 5, R}, Transition::fr), IllegalTransition);
}

// Every (kind, transition) pair against an independent table.
TEST(Transitions, FullTable) {
  struct Row {
    RoundKind from;
    Transition t;
    int de, dr;
    RoundKind to;
  };
  const std::vector<Row> legal = {
      {U, Transition::uu, 0, 1, U},  {F, Transition::uu, 0, 1, U},  {R, Transition::rf, 0, 1, F},
      {U, Transition::ur, 1, -1, R}, {F, Transition::fr, 1, 0, R},  {R, Transition::rr, 1, 1, R},
      {R, Transition::sk, 0, 1, R},
  };
  for (RoundKind k : {U, F, R})
    for (Transition t : kAllTransitions) {
      const StateLabel from{4, 7, k};
      const Row* row = nullptr;
      for (const auto& r : legal)
        if (r.from == k && r.t == t) row = &r;
      if (!row) {
        EXPECT_THROW(apply_transition(from, t), IllegalTransition) << to_string(from) << " " << to_string(t);
        continue;
      }
      const StateLabel to = apply_transition(from, t);
      EXPECT_EQ(to, (StateLabel{4u + row->de, static_cast<std::uint64_t>(7 + row->dr), row->to}));
    }
  EXPECT_THROW(apply_transition({1, 0, U}, Transition::ur), IllegalTransition);
}

TEST(Init, NineServersCirculant) {
  const ServerState s = make(0, 9, ring(9), circ(9, 3), 2);
  EXPECT_EQ(s.label, (StateLabel{1, 1, F}));
  ASSERT_EQ(s.tracking.size(), 9u);
  for (const auto& [p, t] : s.tracking) {
    EXPECT_EQ(t.root, p);
    EXPECT_EQ(t.g.vertices(), std::vector<ServerId>{p});
  }
  EXPECT_TRUE(s.M.empty() && s.M_prev.empty() && s.M_next.empty() && s.F.empty());
}

TEST(Init, MinimalAndTooManyFailures) {
  EXPECT_NO_THROW(make(0, 2, ring(2), ring(2), 0));
  EXPECT_THROW(make(0, 9, ring(9), circ(9, 3), 3), ConfigError);
}

TEST(Broadcast, UnreliableOnRing) {
  ServerState s = make(0, 3, ring(3), ring(3), 0);
  Effects fx;
  a_broadcast_own(s, fx);
  const MessageId id{0, 1, 1, MsgType::unreliable};
  EXPECT_EQ(sends_of(fx, id), (std::vector<std::vector<ServerId>>{{1}}));
  EXPECT_EQ(s.M.size(), 1u);
  EXPECT_TRUE(s.M.count(id));
  Effects again;
  a_broadcast_own(s, again);
  EXPECT_TRUE(all_of<SendEffect>(again).empty());
}

TEST(Broadcast, ReliableEmptiesOwnTracking) {
  ServerState s = make(0, 9, ring(9), circ(9, 3), 2, ServerConfig{.reliable_only = true});
  ASSERT_TRUE(s.label.reliable());
  ASSERT_FALSE(s.tracking.at(0).finished());
  Effects fx;
  a_broadcast_own(s, fx);
  EXPECT_EQ(sends_of(fx, {0, s.label.epoch, s.label.round, MsgType::reliable}),
            (std::vector<std::vector<ServerId>>{{1, 2, 3}}));
  EXPECT_TRUE(s.tracking.at(0).finished());
  EXPECT_EQ(s.tracking_busy, 8u);
}

class UnreliableMsg : public ::testing::Test {
 protected:
  void SetUp() override {
    s = make(4, 9, ring(9), circ(9, 3), 2);
    s.label = {2, 5, U};
    fill(s.M_prev, {umsg(0, 2, 4)});
  }
  ServerState s;
};

TEST_F(UnreliableMsg, CurrentRoundForwardsAndBroadcasts) {
  Effects fx;
  handle_unreliable_msg(s, umsg(3, 2, 5), fx);
  EXPECT_EQ(sends_of(fx, {3, 2, 5, MsgType::unreliable}), (std::vector<std::vector<ServerId>>{{5}}));
  EXPECT_EQ(sends_of(fx, {4, 2, 5, MsgType::unreliable}).size(), 1u);
  EXPECT_EQ(s.M.size(), 2u);
  EXPECT_EQ(s.label, (StateLabel{2, 5, U}));
}

TEST_F(UnreliableMsg, NextRoundPostponed) {
  Effects fx;
  handle_unreliable_msg(s, umsg(3, 2, 6), fx);
  EXPECT_TRUE(fx.empty());
  EXPECT_TRUE(s.M_next.count({3, 2, 6, MsgType::unreliable}));
  EXPECT_TRUE(s.M.empty());
}

TEST_F(UnreliableMsg, StaleEpochDropped) {
  Effects fx;
  handle_unreliable_msg(s, umsg(3, 1, 7), fx);
  EXPECT_TRUE(fx.empty());
  EXPECT_TRUE(s.M.empty() && s.M_next.empty());
}

TEST_F(UnreliableMsg, LaterEpochTraps) {
  Effects fx;
  EXPECT_THROW(handle_unreliable_msg(s, umsg(3, 3, 5), fx), ProtocolViolation);
}

TEST_F(UnreliableMsg, ReliableNextEpochWinsOverPostponed) {
  s.label = {2, 5, R};
  Effects fx;
  handle_reliable_msg(s, rmsg(3, 3, 6), fx);
  handle_unreliable_msg(s, umsg(2, 2, 6), fx);
  EXPECT_EQ(s.M_next.size(), 1u);
  EXPECT_TRUE(s.M_next.count({3, 3, 6, MsgType::reliable}));
}

class ReliableMsg : public ::testing::Test {
 protected:
  void SetUp() override {
    s = make(0, 9, ring(9), circ(9, 3), 2);
    s.label = {3, 4, R};
    s.last_delivered = 3;
    fill(s.M_prev, {umsg(0, 2, 4), umsg(1, 2, 4), umsg(2, 2, 4)});
  }
  ServerState s;
};

TEST_F(ReliableMsg, SkipTransition) {
  Effects fx;
  handle_reliable_msg(s, rmsg(3, 3, 5), fx);
  const auto tr = all_of<TransitionEffect>(fx);
  ASSERT_FALSE(tr.empty());
  EXPECT_EQ(tr.front().kind, Transition::sk);
  EXPECT_EQ(tr.front().to, (StateLabel{3, 5, R}));
  EXPECT_EQ(s.label, (StateLabel{3, 5, R}));
  ASSERT_EQ(s.pending.size(), 1u);
  EXPECT_EQ(s.pending.front().round.round, 4u);
  EXPECT_EQ(s.pending.front().round.messages.size(), 3u);
  EXPECT_TRUE(s.M.count({3, 3, 5, MsgType::reliable}));
  EXPECT_TRUE(s.M.count({0, 3, 5, MsgType::reliable}));
  Effects drained;
  drain_deliveries(s, drained);
  EXPECT_EQ(s.last_delivered, 4u);
}

TEST_F(ReliableMsg, NextEpochForwardedButPostponed) {
  Effects fx;
  handle_reliable_msg(s, rmsg(3, 4, 5), fx);
  EXPECT_EQ(sends_of(fx, {3, 4, 5, MsgType::reliable}), (std::vector<std::vector<ServerId>>{{1, 2, 3}}));
  EXPECT_TRUE(s.M_next.count({3, 4, 5, MsgType::reliable}));
  EXPECT_EQ(s.label, (StateLabel{3, 4, R}));
}

TEST_F(ReliableMsg, CurrentRoundForwardsAndTriesToComplete) {
  Effects fx;
  handle_reliable_msg(s, rmsg(3, 3, 4), fx);
  EXPECT_EQ(sends_of(fx, {3, 3, 4, MsgType::reliable}).size(), 1u);
  EXPECT_EQ(sends_of(fx, {0, 3, 4, MsgType::reliable}).size(), 1u);
  EXPECT_EQ(s.M.size(), 2u);
  EXPECT_TRUE(s.tracking.at(3).finished());
  EXPECT_EQ(s.label, (StateLabel{3, 4, R}));
}

TEST_F(ReliableMsg, SameEpochInUnreliableRoundTraps) {
  s.label = {3, 4, U};
  Effects fx;
  EXPECT_THROW(handle_reliable_msg(s, rmsg(3, 3, 4), fx), ProtocolViolation);
}

TEST(FailureNotification, RollbackFromUnreliable) {
  ServerState s = make(0, 9, ring(9), circ(9, 3), 2);
  s.label = {2, 6, U};
  fill(s.M_prev, {umsg(1, 2, 5)});
  fill(s.M, {umsg(1, 2, 6)});
  Effects fx;
  handle_failure_notification(s, {4, 7, 1}, fx);
  EXPECT_EQ(s.label, (StateLabel{3, 5, R}));
  EXPECT_TRUE(s.F.count({4, 7}));
  bool forwarded = false;
  for (const auto& e : all_of<SendEffect>(fx))
    if (e.packet.kind == PacketKind::fail && e.packet.fn.target == 4) forwarded = e.to == std::vector<ServerId>{1, 2, 3};
  EXPECT_TRUE(forwarded);
  EXPECT_FALSE(s.tracking.at(4).finished());
  EXPECT_EQ(s.tracking.at(4).g.vertices(), (std::vector<ServerId>{4, 5, 6}));
}

TEST(FailureNotification, RollbackFromFirstUnreliable) {
  ServerState s = make(0, 9, ring(9), circ(9, 3), 2);
  s.label = {2, 6, F};
  Effects fx;
  handle_failure_notification(s, {4, 7, 1}, fx);
  EXPECT_EQ(s.label, (StateLabel{3, 6, R}));
}

TEST(FailureNotification, RemovedTargetDropped) {
  ServerState s = make(0, 9, ring(9), circ(9, 3), 2);
  s.gr.remove_vertex(4);
  const StateLabel before = s.label;
  Effects fx;
  handle_failure_notification(s, {4, 7, 1}, fx);
  EXPECT_TRUE(fx.empty());
  EXPECT_EQ(s.label, before);
  EXPECT_TRUE(s.F.empty());
}

TEST(FailureNotification, DuplicateIgnored) {
  ServerState s = make(0, 9, ring(9), circ(9, 3), 2);
  Effects a, b;
  handle_failure_notification(s, {4, 7, 1}, a);
  handle_failure_notification(s, {4, 7, 1}, b);
  EXPECT_FALSE(a.empty());
  EXPECT_TRUE(b.empty());
}

TEST(Complete, UnreliableRound) {
  ServerState s = make(0, 3, ring(3), ring(3), 0);
  s.label = {1, 2, U};
  s.last_delivered = 0;
  fill(s.M_prev, {umsg(0, 1, 1), umsg(1, 1, 1), umsg(2, 1, 1)});
  fill(s.M, {umsg(0, 1, 2), umsg(1, 1, 2), umsg(2, 1, 2)});
  Effects fx;
  try_to_complete(s, fx);
  EXPECT_EQ(s.label, (StateLabel{1, 3, U}));
  ASSERT_EQ(s.pending.size(), 1u);
  EXPECT_EQ(s.pending.front().round.round, 1u);
  EXPECT_EQ(s.M_prev.size(), 3u);
  EXPECT_TRUE(s.M.empty());
}

TEST(Complete, ReliableRemovesSilentServer) {
  ServerState s = make(0, 9, {Family::binomial, 9, 0, {}}, circ(9, 3), 2);
  s.label = {2, 1, R};
  for (ServerId p = 0; p < 9; ++p)
    if (p != 5) fill(s.M, {rmsg(p, 2, 1)});
  for (auto& [_, t] : s.tracking) t.g.clear();
  s.tracking_busy = 0;
  Effects fx;
  try_to_complete(s, fx);
  const auto rm = all_of<RemoveEffect>(fx);
  ASSERT_EQ(rm.size(), 1u);
  EXPECT_EQ(rm.front().servers, std::vector<ServerId>{5});
  EXPECT_EQ(s.gu->members().size(), 8u);
  EXPECT_FALSE(s.gr.has_vertex(5));
  EXPECT_EQ(s.label, (StateLabel{2, 2, F}));
  ASSERT_FALSE(s.pending.empty());
  EXPECT_TRUE(s.pending.front().round.reliable);
  EXPECT_EQ(s.pending.front().round.messages.size(), 8u);
}

TEST(Complete, PendingTrackingBlocks) {
  ServerState s = make(0, 9, ring(9), circ(9, 3), 2);
  s.label = {2, 1, R};
  for (ServerId p = 0; p < 9; ++p) fill(s.M, {rmsg(p, 2, 1)});
  for (auto& [_, t] : s.tracking) t.g.clear();
  s.tracking.at(3) = TrackingDigraph::fresh(3);
  s.tracking_busy = 1;
  Effects fx;
  try_to_complete(s, fx);
  EXPECT_TRUE(fx.empty());
  EXPECT_EQ(s.label, (StateLabel{2, 1, R}));
}

TEST(DeliveryOrder, Examples) {
  MessageSet m;
  fill(m, {umsg(2, 1, 1), umsg(0, 1, 1), umsg(1, 1, 1)});
  const auto order = deterministic_delivery_order(m);
  ASSERT_EQ(order.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(order[i].id.source, i);
  EXPECT_TRUE(deterministic_delivery_order({}).empty());
  MessageSet one;
  fill(one, {umsg(7, 1, 1)});
  EXPECT_EQ(deterministic_delivery_order(one).at(0).id.source, 7);
}

TEST(Tracking, WorkedExampleSnapshots) {
  const Digraph gr = worked_example_digraph();
  ASSERT_EQ(gr.successors(0), (std::vector<ServerId>{3, 4, 5}));
  ASSERT_EQ(gr.successors(5), (std::vector<ServerId>{6, 7, 8}));
  ASSERT_EQ(oracle::kappa_by_enumeration(gr), 3);

  const auto& order = kWorkedExampleNotifications;
  std::vector<std::vector<ServerId>> seen;
  update_tracking_digraph(TrackingDigraph::fresh(0), {}, order, gr,
                          [&](const Notification&, const TrackingDigraph& t) { seen.push_back(t.g.vertices()); });
  const std::vector<std::vector<ServerId>> expect = {
      {0, 3, 5}, {0, 3, 5, 7, 8}, {0, 3, 5, 7}, {0, 5, 7}, {0, 5}, {}};
  EXPECT_EQ(seen, expect);
}

TEST(Tracking, UnrelatedNotificationLeavesDigraph) {
  const Digraph gr = worked_example_digraph();
  const auto t = update_tracking_digraph(TrackingDigraph::fresh(0), {}, {{6, 7}}, gr);
  EXPECT_EQ(t.g.vertices(), std::vector<ServerId>{0});
}

TEST(Tracking, OwnMessageEmptiesRoot) {
  ServerState s = make(0, 9, ring(9), circ(9, 3), 2, ServerConfig{.reliable_only = true});
  Effects fx;
  handle_reliable_msg(s, rmsg(6, s.label.epoch, s.label.round), fx);
  EXPECT_TRUE(s.tracking.at(6).finished());
}

// After every step every vertex is reachable from the root (oracle BFS on the
// edge list), for random valid notification sequences.
TEST(Tracking, ReachabilityProperty) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 8);
    const int d = 1 + static_cast<int>(rng() % (n - 1));
    const Digraph gr = build_overlay(circ(n, d));
    std::vector<Notification> fns;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 8); ++k) {
      const ServerId t = static_cast<ServerId>(rng() % n);
      const auto& succ = gr.successors(t);
      const Notification fn{t, succ[rng() % succ.size()]};
      if (std::find(fns.begin(), fns.end(), fn) == fns.end()) fns.push_back(fn);
    }
    const ServerId root = static_cast<ServerId>(rng() % n);
    update_tracking_digraph(TrackingDigraph::fresh(root), {}, fns, gr,
                            [&](const Notification&, const TrackingDigraph& t) {
                              if (t.g.empty()) return;
                              const auto a = oracle::adjacency(t.g);
                              ASSERT_TRUE(a.count(root));
                              EXPECT_EQ(oracle::reach(a, root, {}).size(), t.g.size()) << "trial " << trial;
                            });
  }
}

// Worked example at handler level: p6 completes the round without m0 and m5.
TEST(Tracking, WorkedExampleRoundCompletes) {
  ServerConfig cfg;
  cfg.f = 2;
  cfg.reliable_only = true;
  ServerState s = init_server(6, std::make_shared<const Dissemination>(ring(9)), worked_example_digraph(), cfg);
  const auto e = s.label.epoch, r = s.label.round;
  Effects fx;
  for (ServerId p : {1, 2, 3, 4, 7, 8}) {
    Packet pk{PacketKind::rbcast, rmsg(p, e, r), {}, {}, 1};
    auto out = receive_packet(s, pk, p);
    fx.insert(fx.end(), out.begin(), out.end());
  }
  for (auto [t, o] : kWorkedExampleNotifications) {
    Packet pk;
    pk.kind = PacketKind::fail;
    pk.fn = {t, o, 1};
    auto out = receive_packet(s, pk, o);
    fx.insert(fx.end(), out.begin(), out.end());
  }
  const auto dv = all_of<DeliverEffect>(fx);
  ASSERT_EQ(dv.size(), 1u);
  std::vector<ServerId> sources;
  for (const auto& m : dv[0].messages) sources.push_back(m.id.source);
  EXPECT_EQ(sources, (std::vector<ServerId>{1, 2, 3, 4, 6, 7, 8}));
  const auto rm = all_of<RemoveEffect>(fx);
  ASSERT_EQ(rm.size(), 1u);
  EXPECT_EQ(rm[0].servers, (std::vector<ServerId>{0, 5}));
}

TEST(RerunIdentity, SamePayloadAcrossEpochs) {
  ServerConfig cfg;
  cfg.payload_size = 64;
  ServerState s = make(2, 4, ring(4), circ(4, 2), 1, cfg);
  s.label = {1, 5, U};
  const Message a = own_message(s);
  s.label = {2, 5, R};
  const Message b = own_message(s);
  EXPECT_EQ(*a.payload, *b.payload);
  EXPECT_EQ(a.payload->size(), 64u);

  cfg.relax_rerun_identity = true;
  ServerState t = make(2, 4, ring(4), circ(4, 2), 1, cfg);
  t.label = {1, 5, U};
  const Message c = own_message(t);
  t.label = {2, 5, R};
  const Message d = own_message(t);
  EXPECT_NE(*c.payload, *d.payload);
}

TEST(Drain, GapTraps) {
  ServerState s = make(0, 3, ring(3), ring(3), 0);
  PendingDelivery p;
  p.round = DeliverEffect{1, 4, false, {umsg(0, 1, 4)}};
  p.released = true;
  s.pending.push_back(p);
  Effects fx;
  EXPECT_THROW(drain_deliveries(s, fx), ProtocolViolation);
}

TEST(Terminate, OnlyOnce) {
  ServerState s = make(0, 3, ring(3), ring(3), 0);
  EXPECT_EQ(self_terminate(s, "x").size(), 1u);
  EXPECT_TRUE(self_terminate(s, "x").empty());
  EXPECT_TRUE(receive_packet(s, Packet{PacketKind::bcast, umsg(1, 1, 1), {}, {}, 1}, 1).empty());
}
