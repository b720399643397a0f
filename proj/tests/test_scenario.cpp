#include <gtest/gtest.h>

#include "dualcast/scenario.hpp"

using namespace dualcast;

TEST(Parse, AllDocumentedKeys) {
  const Scenario s = parse_scenario_text(
      "# comment\n"
      "n=9\nf=2\nreliable=circulant:3\nunreliable=binomial\n"
      "fd.hb_us=1000\nfd.to_us=10000\n"
      "fail=12000:4\nfail=15000:6\n"
      "mode=ep\nuniform=1\npartition=1\nrounds=100\npayload=1024\nseed=7\nlatency=mdc\n");
  EXPECT_EQ(s.n, 9);
  EXPECT_EQ(s.f, 2);
  EXPECT_EQ(s.reliable.family, Family::circulant);
  EXPECT_EQ(s.reliable.d, 3);
  EXPECT_EQ(s.unreliable.family, Family::binomial);
  EXPECT_EQ(s.fd.heartbeat_period, 1000);
  EXPECT_EQ(s.fd.timeout, 10000);
  ASSERT_EQ(s.failures.size(), 2u);
  EXPECT_EQ(s.failures[1].time, 15000);
  EXPECT_EQ(s.failures[1].server, 6);
  EXPECT_EQ(s.fd.mode, FdMode::eventually_perfect);
  EXPECT_TRUE(s.uniform);
  EXPECT_TRUE(s.partition);
  EXPECT_EQ(s.rounds, 100u);
  EXPECT_EQ(s.payload, 1024u);
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.latency, LatencyProfile::mdc);
  EXPECT_NO_THROW(validate(s));
}

TEST(Parse, ExtraDirectives) {
  const Scenario s = parse_scenario_text(
      "n=7\nf=2\nreliable=circulant:3\nmode=ep\n"
      "spike=3000:2:30000:fd\nspike=100:1:50:proto:4\nstall=2:10:500\ncrash_after_deliver=3:9\n"
      "eon=30:circulant:4\ntrace=summary\n");
  ASSERT_EQ(s.spikes.size(), 2u);
  EXPECT_EQ(s.spikes[0].what, SpikeTarget::fd);
  EXPECT_EQ(s.spikes[1].to, 4);
  ASSERT_EQ(s.stalls.size(), 1u);
  EXPECT_EQ(s.stalls[0].round, 10u);
  ASSERT_EQ(s.crash_after.size(), 1u);
  ASSERT_TRUE(s.eon);
  EXPECT_EQ(s.eon->round, 30u);
  EXPECT_EQ(s.eon->family.d, 4);
  EXPECT_EQ(s.trace, TraceLevel::summary);
}

TEST(Parse, ErrorsNameTheLine) {
  try {
    parse_scenario_text("n=4\nf=1\nbogus=3\n");
    FAIL();
  } catch (const InvalidSpec& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_scenario_text("n=four\n"), InvalidSpec);
  EXPECT_THROW(parse_scenario_text("n 4\n"), InvalidSpec);
  EXPECT_THROW(parse_scenario_text("uniform=2\n"), InvalidSpec);
  EXPECT_THROW(parse_scenario_text("reliable=torus\n"), InvalidSpec);
  EXPECT_THROW(parse_scenario_text("fail=12\n"), InvalidSpec);
}

TEST(Validate, Refusals) {
  auto bad = [](const std::string& text) {
    EXPECT_THROW(validate(parse_scenario_text(text)), ConfigError) << text;
  };
  bad("n=1\n");
  bad("n=9\nf=3\nreliable=circulant:3\n");
  bad("n=4\nf=2\nreliable=circulant:3\nuniform=1\n");
  bad("n=5\nf=1\nreliable=circulant:2\nfail=10:1\nfail=20:2\n");
  bad("n=5\nf=1\nfail=10:7\n");
  bad("n=5\nf=1\nreliable=circulant:2\nspike=10:1:100:fd\n");
  bad("n=5\nf=1\nreliable=circulant:2\nfail_count=1\n");
  bad("n=5\nf=1\nreliable=circulant:2\nreliable_only=1\neon=5:circulant:2\n");
  bad("n=5\nf=1\nreliable=circulant:2\nrounds=0\n");
  bad("n=5\nf=1\nreliable=circulant:2\nfd.hb_us=100\nfd.to_us=50\n");
  EXPECT_NO_THROW(validate(parse_scenario_text("n=5\nf=1\nreliable=circulant:2\nfail=10:1\nfail=20:2\nexceeds_f=1\n")));
}

TEST(Text, RoundTrip) {
  const Scenario s = parse_scenario_text(
      "n=7\nf=2\nreliable=circulant:3\nunreliable=ring\nmode=ep\npartition=1\nfail=100:3\n"
      "spike=3000:2:30000:fd\nstall=2:10:500\neon=30:circulant:4\nrounds=40\nseed=9\njitter_us=5\n");
  const Scenario t = parse_scenario_text(to_text(s));
  EXPECT_EQ(to_text(t), to_text(s));
  EXPECT_EQ(t.n, 7);
  EXPECT_EQ(t.spikes.size(), 1u);
  EXPECT_EQ(t.jitter_us, 5);
}

TEST(Family, TextRoundTrip) {
  for (const std::string f : {"ring", "binomial", "circulant:3"}) EXPECT_EQ(family_text(parse_family(f)), f);
}
