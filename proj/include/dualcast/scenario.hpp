#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dualcast/fd.hpp"
#include "dualcast/overlay.hpp"

namespace dualcast {

enum class LatencyProfile { sdc, mdc };
enum class TraceLevel { full, summary };

struct FailureEvent {
  SimTime time = 0;
  ServerId server = 0;
};

enum class SpikeTarget { fd, proto, all };

// Holds the outgoing channels of `from` (optionally only towards `to`) for `duration`.
struct SpikeEvent {
  SimTime time = 0;
  ServerId from = 0;
  SimTime duration = 0;
  SpikeTarget what = SpikeTarget::all;
  std::optional<ServerId> to;
};

// Holds the outgoing protocol channels of `server` once it enters `round`.
struct StallEvent {
  ServerId server = 0;
  std::uint64_t round = 0;
  SimTime duration = 0;
};

struct CrashAfterDeliver {
  ServerId server = 0;
  std::uint64_t round = 0;
};

struct EonDirective {
  std::uint64_t round = 0;
  DigraphSpec family;
};

struct Scenario {
  int n = 4;
  int f = 1;
  DigraphSpec unreliable{Family::binomial, 0, 0, {}};
  DigraphSpec reliable{Family::circulant, 0, 2, {}};
  FdConfig fd;
  bool uniform = false;
  bool partition = false;
  bool reliable_only = false;
  bool relax_rerun_identity = false;
  bool exceeds_f = false;
  SimTime partition_timeout = 200000;

  LatencyProfile latency = LatencyProfile::sdc;
  SimTime hop_us = 50;
  SimTime jitter_us = 0;
  SimTime per_message_us = 1;  // sender-side cost of putting one message on the wire
  double ns_per_byte = 0.8;
  int datacenters = 3;  // mdc only

  std::vector<FailureEvent> failures;
  int fail_count = 0;  // extra crashes at seeded random times/servers
  SimTime fail_window_us = 0;
  std::vector<SpikeEvent> spikes;
  std::vector<StallEvent> stalls;
  std::vector<CrashAfterDeliver> crash_after;
  std::optional<EonDirective> eon;

  std::uint64_t rounds = 20;
  std::size_t payload = 64;
  std::uint64_t seed = 42;
  SimTime time_bound_us = 60'000'000;
  TraceLevel trace = TraceLevel::full;

  int planned_failures() const {
    return static_cast<int>(failures.size() + crash_after.size()) + fail_count;
  }
};

// key=value lines, '#' comments. Errors are InvalidSpec naming the line.
Scenario parse_scenario(std::istream& in, const std::string& origin = "scenario");
Scenario parse_scenario_text(const std::string& text);
Scenario load_scenario(const std::string& path);

// Applies one key=value pair; throws InvalidSpec on unknown keys or bad values.
void apply_setting(Scenario& s, const std::string& key, const std::string& value);

// Throws ConfigError for scenarios that cannot run (f >= κ(G_R), too many
// crashes without exceeds_f=1, uniform with n <= 2f, ...).
void validate(const Scenario& s);

std::string to_text(const Scenario& s);

DigraphSpec parse_family(const std::string& text);
std::string family_text(const DigraphSpec& spec);

}  // namespace dualcast
