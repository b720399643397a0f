#include <gtest/gtest.h>

#include "dualcast/analysis.hpp"
#include "dualcast/fd.hpp"
#include "dualcast/sim.hpp"

using namespace dualcast;

namespace {

Digraph circ(int n, int d) { return build_overlay({Family::circulant, n, d, {}}); }

FdConfig cfg(FdMode mode = FdMode::perfect) { return FdConfig{1000, 10000, mode}; }

Packet data_packet() {
  Packet p;
  p.kind = PacketKind::bcast;
  return p;
}

}  // namespace

TEST(FdConfig, Validate) {
  EXPECT_NO_THROW(cfg().validate());
  EXPECT_THROW((FdConfig{0, 10, FdMode::perfect}).validate(), ConfigError);
  EXPECT_THROW((FdConfig{10, 10, FdMode::perfect}).validate(), ConfigError);
}

TEST(FdTick, SilentPredecessorNotifiedExactlyOnce) {
  // Server 3 in circulant(9,3) monitors 0, 1, 2.
  FdState fd = fd_init(3, cfg(), circ(9, 3), 0);
  for (SimTime t = 0; t <= 10000; t += 1000) {
    fd_heard(fd, 1, t);
    fd_heard(fd, 2, t);
    EXPECT_TRUE(fd_tick(fd, t).notifications.empty());
  }
  fd_heard(fd, 1, 10001);
  fd_heard(fd, 2, 10001);
  const auto out = fd_tick(fd, 10001);
  ASSERT_EQ(out.notifications.size(), 1u);
  EXPECT_EQ(out.notifications[0].target, 0);
  EXPECT_EQ(out.notifications[0].owner, 3);
  EXPECT_TRUE(fd_tick(fd, 50000).notifications.size() == 2u);  // 1 and 2 now silent too
  EXPECT_TRUE(fd_tick(fd, 90000).notifications.empty());
}

TEST(FdTick, OnTimeHeartbeatsNoNotifications) {
  FdState fd = fd_init(3, cfg(), circ(9, 3), 0);
  for (SimTime t = 0; t <= 100000; t += 500) {
    for (ServerId p : {0, 1, 2}) fd_heard(fd, p, t);
    EXPECT_TRUE(fd_tick(fd, t).notifications.empty());
  }
}

TEST(FdTick, HeartbeatsEveryPeriodToSuccessors) {
  FdState fd = fd_init(3, cfg(), circ(9, 3), 0);
  int beats = 0;
  for (SimTime t = 0; t < 10000; t += 250) {
    const auto out = fd_tick(fd, t);
    if (!out.heartbeats.empty()) {
      ++beats;
      EXPECT_EQ(out.heartbeats, (std::vector<ServerId>{4, 5, 6}));
    }
  }
  EXPECT_EQ(beats, 10);
}

TEST(FdTick, TwoTimeoutsSameTickAscending) {
  FdState fd = fd_init(3, cfg(), circ(9, 3), 0);
  fd_heard(fd, 1, 20000);
  const auto out = fd_tick(fd, 20000);
  ASSERT_EQ(out.notifications.size(), 2u);
  EXPECT_EQ(out.notifications[0].target, 0);
  EXPECT_EQ(out.notifications[1].target, 2);
}

// Same property from a simulated schedule: two predecessors of server 3 crash
// together, and server 3 suspects both at one instant in ascending order.
TEST(FdTick, TwoTimeoutsSameTickInSimulation) {
  Scenario sc;
  sc.n = 9;
  sc.f = 2;
  sc.reliable = {Family::circulant, 9, 3, {}};
  sc.failures = {{3000, 1}, {3000, 2}};
  sc.rounds = 30;
  const SimResult r = run(sc);
  std::vector<std::pair<SimTime, ServerId>> seen;
  for (const auto& e : r.trace.events)
    if (e.kind == EventKind::suspect && e.server == 3) seen.emplace_back(e.time, e.peer);
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0].first, seen[1].first);
  EXPECT_EQ(seen[0].second, 1);
  EXPECT_EQ(seen[1].second, 2);
}

TEST(Suppress, Examples) {
  FdState ep = fd_init(3, cfg(FdMode::eventually_perfect), circ(9, 3), 0);
  fd_tick(ep, 20000);
  ASSERT_TRUE(ep.suspected.count(0));
  EXPECT_TRUE(should_suppress(ep, 0, data_packet()));
  Packet fail;
  fail.kind = PacketKind::fail;
  EXPECT_FALSE(should_suppress(ep, 0, fail));
  EXPECT_FALSE(should_suppress(ep, 7, data_packet()));

  FdState p = fd_init(3, cfg(), circ(9, 3), 0);
  fd_tick(p, 20000);
  EXPECT_FALSE(should_suppress(p, 0, data_packet()));
}

TEST(Retarget, SuspicionsKeptWithinEonClearedOnNewEon) {
  const Digraph g = circ(9, 3);
  FdState fd = fd_init(3, cfg(FdMode::eventually_perfect), g, 0);
  fd_tick(fd, 20000);
  ASSERT_EQ(fd.suspected.size(), 3u);
  Digraph smaller = g;
  smaller.remove_vertex(0);
  fd_retarget(fd, smaller, nullptr, 1, 21000);
  EXPECT_EQ(fd.suspected.size(), 3u);
  EXPECT_FALSE(fd.last_heard.count(0));

  const Digraph next = build_overlay_over({Family::circulant, 8, 2, {}}, smaller.vertices());
  fd_retarget(fd, smaller, &next, 1, 22000);
  std::set<ServerId> expect;
  for (ServerId s : smaller.successors(3)) expect.insert(s);
  for (ServerId s : next.successors(3)) expect.insert(s);
  EXPECT_EQ(std::set<ServerId>(fd.heartbeat_targets.begin(), fd.heartbeat_targets.end()), expect);

  fd_retarget(fd, next, nullptr, 2, 23000);
  EXPECT_TRUE(fd.suspected.empty());
  EXPECT_EQ(fd.eon, 2u);
  for (const auto& [p, t] : fd.last_heard) EXPECT_EQ(t, 23000);
}

// Completeness: every crash is followed by a suspicion within Δto + Δhb plus
// one hop of the FD channel.
TEST(Completeness, EveryCrashSuspectedInTime) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    Scenario sc;
    sc.n = 5 + static_cast<int>(seed % 6);
    sc.f = 2;
    sc.reliable = {Family::circulant, sc.n, 3, {}};
    sc.fail_count = 2;
    sc.fail_window_us = 20000;
    sc.seed = seed;
    sc.rounds = 40;
    const SimResult r = run(sc);
    ASSERT_EQ(r.outcome, Outcome::completed) << r.violation;
    for (ServerId x = 0; x < sc.n; ++x) {
      if (!r.trace.crashed_at[x]) continue;
      const SimTime t = *r.trace.crashed_at[x];
      std::optional<SimTime> first;
      for (const auto& e : r.trace.events)
        if (e.kind == EventKind::suspect && e.peer == x) {
          first = e.time;
          break;
        }
      ASSERT_TRUE(first) << "seed " << seed << " crash of " << x << " never suspected";
      EXPECT_LE(*first, t + sc.fd.timeout + sc.fd.heartbeat_period + sc.hop_us + 10) << "seed " << seed;
    }
    EXPECT_EQ(check_fd_accuracy(r.trace).verdict, Verdict::pass);
  }
}
