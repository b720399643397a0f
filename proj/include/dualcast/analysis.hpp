#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualcast/trace.hpp"

namespace dualcast {

enum class Verdict { pass, fail, inconclusive, skipped };
std::string to_string(Verdict v);

struct CheckReport {
  std::string property;
  Verdict verdict = Verdict::pass;
  std::string detail;
  std::optional<std::pair<std::size_t, std::size_t>> locator;  // trace event span
};

std::vector<CheckReport> check_safety(const Trace& t);
std::vector<CheckReport> check_liveness(const Trace& t);
std::vector<CheckReport> check_state_propositions(const Trace& t);
// Per-channel FIFO, no duplication, no creation (full traces).
CheckReport check_channels(const Trace& t);
// Agreement and total order extended to servers that crashed or terminated.
CheckReport check_uniformity(const Trace& t);
// Terminated servers never delivered ahead of the survivors, and their gated
// (reliable) rounds match. Differing unreliable rounds are counted in the detail.
CheckReport check_partition(const Trace& t);
// First traffic of eon k comes after every surviving server entered the transitional round.
CheckReport check_eon_barrier(const Trace& t);
// Perfect mode: suspected servers had crashed or terminated.
CheckReport check_fd_accuracy(const Trace& t);

std::vector<CheckReport> check_all(const Trace& t);
bool any_failed(const std::vector<CheckReport>& reports);

// Label pairs that may be observed concurrently at two non-faulty servers.
bool concurrent_ok(const StateLabel& other, const StateLabel& self);

struct PerfModel {
  double delta_u = 0;
  double delta_r = 0;
  double lambda = 0;
};

struct ExpectedPerformance {
  double latency = 0;
  double throughput = 0;
};

ExpectedPerformance expected_performance(const PerfModel& m);

enum class WorstCase { baseline, rerun_reliably, merged };
double worst_case_latency(const PerfModel& m, WorstCase variant, std::optional<double> delta_r_bar = std::nullopt);
double worst_case_throughput(const PerfModel& m);

struct ServerMetrics {
  ServerId server = 0;
  double median_latency_us = 0;
  double ci_lo = 0;
  double ci_hi = 0;
  double throughput = 0;  // messages per simulated second
  std::uint64_t rounds = 0;
  std::uint64_t transmissions = 0;
  std::size_t samples = 0;
};

struct Summary {
  std::vector<ServerMetrics> servers;  // non-faulty servers only
  std::map<Transition, std::uint64_t> transitions;
  std::map<std::uint64_t, std::uint64_t> transmissions_per_round;
  double mean_throughput = 0;
  bool window_clipped = false;
};

// 1-based ranks (j, k) bounding the median with ~95% confidence.
std::pair<std::size_t, std::size_t> median_ci_ranks(std::size_t m);

// strict: throw DomainError when a server did not deliver 110n messages;
// otherwise the window is clipped to what is available.
Summary summarize(const Trace& t, bool strict = true);
void write_metrics_csv(std::ostream& out, const Summary& s);
void write_reports(std::ostream& out, const std::vector<CheckReport>& reports);

}  // namespace dualcast
