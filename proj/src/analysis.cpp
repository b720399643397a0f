#include "dualcast/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace dualcast {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::skipped: return "skipped";
  }
  return "?";
}

namespace {

CheckReport pass(std::string name, std::string detail = "") { return {std::move(name), Verdict::pass, std::move(detail), {}}; }

CheckReport fail(std::string name, std::string detail, std::size_t from, std::size_t to) {
  return {std::move(name), Verdict::fail, std::move(detail), std::make_pair(from, to)};
}

std::vector<ServerId> correct_servers(const Trace& t) {
  std::vector<ServerId> out;
  for (ServerId s = 0; s < t.n; ++s)
    if (t.correct(s)) out.push_back(s);
  return out;
}

// Longest log among the given servers; others must be prefixes of it.
ServerId reference(const Trace& t, const std::vector<ServerId>& servers) {
  ServerId best = servers.empty() ? -1 : servers.front();
  for (ServerId s : servers)
    if (t.logs[s].size() > t.logs[best].size()) best = s;
  return best;
}

std::string where(ServerId s, const DeliveryRecord& d) {
  return "server " + std::to_string(s) + " round " + std::to_string(d.round);
}

CheckReport check_integrity(const Trace& t) {
  const std::string name = "integrity";
  for (ServerId s = 0; s < t.n; ++s) {
    const auto& log = t.logs[s];
    for (std::size_t i = 0; i < log.size(); ++i) {
      const auto& d = log[i];
      if (d.round != i + 1)
        return fail(name, where(s, d) + ": rounds not gap-free (expected " + std::to_string(i + 1) + ")",
                    d.event_index, d.event_index);
      std::set<ServerId> seen;
      for (const auto& [src, digest] : d.sources) {
        if (!seen.insert(src).second)
          return fail(name, where(s, d) + ": source " + std::to_string(src) + " delivered twice", d.event_index,
                      d.event_index);
        if (!t.broadcast_digests.count({src, d.round, digest}))
          return fail(name, where(s, d) + ": message of " + std::to_string(src) + " was never broadcast",
                      d.event_index, d.event_index);
      }
    }
  }
  return pass(name, t.level == TraceLevel::full ? "" : "summary trace: per-message origin not checked");
}

}  // namespace

std::vector<CheckReport> check_safety(const Trace& t) {
  std::vector<CheckReport> out;
  out.push_back(check_integrity(t));

  const auto correct = correct_servers(t);
  const ServerId ref = reference(t, correct);
  CheckReport order = pass("total_order");
  CheckReport agree = pass("set_agreement");
  CheckReport epoch = pass("same_epoch_delivery");
  if (ref >= 0) {
    const auto& rlog = t.logs[ref];
    for (ServerId s : correct) {
      const auto& log = t.logs[s];
      for (std::size_t i = 0; i < log.size() && i < rlog.size(); ++i) {
        const auto& a = log[i];
        const auto& b = rlog[i];
        if (a.round != b.round && order.verdict == Verdict::pass)
          order = fail("total_order", where(s, a) + " vs " + where(ref, b), std::min(a.event_index, b.event_index),
                       std::max(a.event_index, b.event_index));
        if ((a.digest != b.digest || a.count != b.count) && agree.verdict == Verdict::pass) {
          agree = fail("set_agreement",
                       where(s, a) + " delivered " + std::to_string(a.count) + " messages, server " +
                           std::to_string(ref) + " delivered " + std::to_string(b.count),
                       std::min(a.event_index, b.event_index), std::max(a.event_index, b.event_index));
          if (order.verdict == Verdict::pass)
            order = fail("total_order", "delivery sequences diverge at " + where(s, a),
                         std::min(a.event_index, b.event_index), std::max(a.event_index, b.event_index));
        }
        if ((a.epoch != b.epoch || a.reliable != b.reliable) && epoch.verdict == Verdict::pass)
          epoch = fail("same_epoch_delivery",
                       where(s, a) + " in epoch " + std::to_string(a.epoch) + ", server " + std::to_string(ref) +
                           " in epoch " + std::to_string(b.epoch),
                       std::min(a.event_index, b.event_index), std::max(a.event_index, b.event_index));
      }
    }
  }
  out.push_back(order);
  out.push_back(agree);
  out.push_back(epoch);
  return out;
}

std::vector<CheckReport> check_liveness(const Trace& t) {
  std::vector<CheckReport> out;
  if (t.exceeds_f) {
    out.push_back({"validity", Verdict::skipped, "assumption violated: more than f crashes", {}});
    out.push_back({"agreement", Verdict::skipped, "assumption violated: more than f crashes", {}});
    return out;
  }
  if (t.hit_time_bound) {
    out.push_back({"validity", Verdict::inconclusive, "run hit the time bound", {}});
    out.push_back({"agreement", Verdict::inconclusive, "run hit the time bound", {}});
    return out;
  }
  const auto correct = correct_servers(t);
  CheckReport validity = pass("validity");
  for (ServerId s : correct) {
    for (const auto& d : t.logs[s])
      if (!d.includes_self && t.first_broadcast.count({s, d.round})) {
        validity = fail("validity", where(s, d) + ": own message missing", d.event_index, d.event_index);
        break;
      }
    if (validity.verdict != Verdict::pass) break;
    if (t.logs[s].size() < t.target_rounds) {
      validity = {"validity", Verdict::fail,
                  "server " + std::to_string(s) + " delivered only " + std::to_string(t.logs[s].size()) + " rounds",
                  {}};
      break;
    }
  }
  out.push_back(validity);

  CheckReport agreement = pass("agreement");
  std::size_t common = SIZE_MAX;
  for (ServerId s : correct) common = std::min(common, t.logs[s].size());
  if (!correct.empty()) {
    const ServerId first = correct.front();
    for (ServerId s : correct) {
      for (std::size_t i = 0; i < common; ++i) {
        const auto& a = t.logs[s][i];
        const auto& b = t.logs[first][i];
        if (a.digest != b.digest) {
          agreement = fail("agreement", where(s, a) + " differs from server " + std::to_string(first),
                           std::min(a.event_index, b.event_index), std::max(a.event_index, b.event_index));
          break;
        }
      }
      if (agreement.verdict != Verdict::pass) break;
    }
    if (agreement.verdict == Verdict::pass && common < t.target_rounds)
      agreement = {"agreement", Verdict::fail, "non-faulty servers share only " + std::to_string(common) + " rounds",
                   {}};
  }
  out.push_back(agreement);
  return out;
}

bool concurrent_ok(const StateLabel& other, const StateLabel& self) {
  const auto e = static_cast<std::int64_t>(other.epoch);
  const auto r = static_cast<std::int64_t>(other.round);
  const auto se = static_cast<std::int64_t>(self.epoch);
  const auto sr = static_cast<std::int64_t>(self.round);
  auto is = [&](bool reliable, std::int64_t ee, std::int64_t rr) {
    return self.reliable() == reliable && se == ee && sr == rr;
  };
  if (other.unreliable())
    return is(false, e, r - 1) || is(false, e, r) || is(false, e, r + 1) || is(true, e, r - 1) ||
           is(true, e + 1, r - 2) || is(true, e + 1, r - 1) || is(true, e + 1, r);
  return is(false, e - 1, r) || is(false, e - 1, r + 1) || is(false, e - 1, r + 2) || is(false, e, r + 1) ||
         is(true, e - 1, r - 1) || is(true, e, r - 1) || is(true, e, r) || is(true, e, r + 1) ||
         is(true, e + 1, r + 1);
}

std::vector<CheckReport> check_state_propositions(const Trace& t) {
  std::vector<CheckReport> out;
  CheckReport conc = pass("concurrent_states");
  CheckReport recv = pass("receive_constraints");
  std::vector<StateLabel> label(t.n);
  std::vector<std::size_t> since(t.n, 0);
  std::vector<bool> started(t.n, false);
  std::size_t receives = 0;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const auto& ev = t.events[i];
    if (ev.server < 0 || ev.server >= t.n || !t.correct(ev.server)) continue;
    if (ev.kind == EventKind::transition) {
      label[ev.server] = ev.label_to;
      since[ev.server] = i;
      started[ev.server] = true;
      if (conc.verdict != Verdict::pass) continue;
      for (ServerId j = 0; j < t.n; ++j) {
        if (j == ev.server || !t.correct(j) || !started[j]) continue;
        if (!concurrent_ok(label[j], ev.label_to)) {
          conc = fail("concurrent_states",
                      "server " + std::to_string(ev.server) + " in " + to_string(ev.label_to) + " while server " +
                          std::to_string(j) + " in " + to_string(label[j]),
                      since[j], i);
          break;
        }
      }
    } else if (ev.kind == EventKind::receive && recv.verdict == Verdict::pass &&
               (ev.packet == PacketKind::bcast || ev.packet == PacketKind::rbcast) && ev.peer >= 0 &&
               ev.peer < t.n && t.correct(ev.msg.source)) {
      ++receives;
      const auto& m = ev.msg;
      const auto& l = ev.label;
      std::string bad;
      if (ev.packet == PacketKind::bcast) {
        if (m.epoch > l.epoch)
          bad = "unreliable message from a later epoch";
        else if (m.epoch == l.epoch && m.round > l.round + 1)
          bad = "unreliable message more than one round ahead";
        else if (m.epoch == l.epoch && m.round == l.round && l.reliable())
          bad = "unreliable message of the receiver's own reliable round";
      } else {
        if (m.epoch > l.epoch && !(m.epoch == l.epoch + 1 && m.round == l.round + 1 && l.reliable()))
          bad = "reliable message from a later epoch outside R(e+1,r+1)";
        else if (m.epoch == l.epoch && m.round >= l.round && (!l.reliable() || m.round > l.round + 1))
          bad = "reliable message of the current epoch in an impossible state";
      }
      if (!bad.empty())
        recv = fail("receive_constraints",
                    "server " + std::to_string(ev.server) + " in " + to_string(l) + " got (" +
                        std::to_string(m.source) + "," + std::to_string(m.epoch) + "," + std::to_string(m.round) +
                        "): " + bad,
                    i, i);
    }
  }
  if (t.level != TraceLevel::full && recv.verdict == Verdict::pass)
    recv = {"receive_constraints", Verdict::skipped, "summary trace has no receive records", {}};
  else if (recv.verdict == Verdict::pass)
    recv.detail = std::to_string(receives) + " receives checked";
  out.push_back(conc);
  out.push_back(recv);
  return out;
}

CheckReport check_channels(const Trace& t) {
  if (t.level != TraceLevel::full) return {"channels", Verdict::skipped, "summary trace", {}};
  using Key = std::tuple<ServerId, ServerId, Channel>;
  using Item = std::pair<MessageId, std::size_t>;
  std::map<Key, std::vector<Item>> sent, got;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const auto& ev = t.events[i];
    if (ev.packet != PacketKind::bcast && ev.packet != PacketKind::rbcast) continue;
    if (ev.kind == EventKind::send)
      sent[{ev.server, ev.peer, ev.channel}].emplace_back(ev.msg, i);
    else if (ev.kind == EventKind::receive || ev.kind == EventKind::suppressed)
      got[{ev.peer, ev.server, ev.channel}].emplace_back(ev.msg, i);
  }
  for (const auto& [key, recv] : got) {
    auto it = sent.find(key);
    const std::size_t ns = it == sent.end() ? 0 : it->second.size();
    for (std::size_t k = 0; k < recv.size(); ++k) {
      if (k >= ns || it->second[k].first != recv[k].first) {
        const auto& [from, to, ch] = key;
        return fail("channels",
                    "channel " + std::to_string(from) + "->" + std::to_string(to) + " (" + to_string(ch) +
                        "): receive " + std::to_string(k) + " does not match send order",
                    k < ns ? it->second[k].second : recv[k].second, recv[k].second);
      }
    }
  }
  return pass("channels");
}

CheckReport check_uniformity(const Trace& t) {
  const auto correct = correct_servers(t);
  const ServerId ref = reference(t, correct);
  if (ref < 0) return {"uniformity", Verdict::skipped, "no non-faulty server", {}};
  const auto& rlog = t.logs[ref];
  for (ServerId s = 0; s < t.n; ++s) {
    for (const auto& d : t.logs[s]) {
      if (d.round > rlog.size()) {
        if (t.hit_time_bound) continue;
        return fail("uniformity", where(s, d) + " was never delivered by non-faulty servers", d.event_index,
                    d.event_index);
      }
      const auto& r = rlog[d.round - 1];
      if (r.digest != d.digest || r.epoch != d.epoch)
        return fail("uniformity",
                    where(s, d) + " (" + std::to_string(d.count) + " messages) differs from server " +
                        std::to_string(ref) + " (" + std::to_string(r.count) + " messages)",
                    std::min(d.event_index, r.event_index), std::max(d.event_index, r.event_index));
    }
  }
  return pass("uniformity");
}

CheckReport check_partition(const Trace& t) {
  const auto correct = correct_servers(t);
  const ServerId ref = reference(t, correct);
  std::size_t unreliable_divergence = 0;
  for (ServerId s = 0; s < t.n; ++s) {
    if (!t.terminated_at[s]) continue;
    for (const auto& d : t.logs[s]) {
      if (ref < 0 || d.round > t.logs[ref].size())
        return fail("partition", where(s, d) + " delivered ahead of the surviving partition", d.event_index,
                    d.event_index);
      const auto& r = t.logs[ref][d.round - 1];
      if (r.digest == d.digest) continue;
      // Unreliable rounds are not gated; a removed server may have completed
      // one the survivors reran reliably. Only uniform mode rules that out.
      if (!d.reliable) {
        ++unreliable_divergence;
        continue;
      }
      return fail("partition", where(s, d) + " differs from the surviving partition", d.event_index,
                  r.event_index);
    }
  }
  if (unreliable_divergence)
    return pass("partition", std::to_string(unreliable_divergence) +
                                 " unreliable round(s) of removed servers differ from the surviving partition");
  return pass("partition");
}

CheckReport check_eon_barrier(const Trace& t) {
  std::map<std::uint64_t, std::map<ServerId, std::size_t>> entered;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const auto& ev = t.events[i];
    if (ev.kind == EventKind::eon_enter) entered[ev.value].emplace(ev.server, i);
    if (ev.kind != EventKind::eon_first_send) continue;
    ++checked;
    const auto& prior = entered[ev.value - 1];
    for (ServerId s = 0; s < t.n; ++s) {
      if (!t.correct(s)) continue;
      auto it = prior.find(s);
      if (it == prior.end())
        return fail("eon_barrier",
                    "server " + std::to_string(ev.server) + " sent eon-" + std::to_string(ev.value) +
                        " traffic before server " + std::to_string(s) + " entered the transitional round",
                    i, i);
      if (t.events[it->second].time > ev.time)
        return fail("eon_barrier", "transitional entry of server " + std::to_string(s) + " after first send",
                    i, it->second);
    }
  }
  return pass("eon_barrier", std::to_string(checked) + " first sends checked");
}

CheckReport check_fd_accuracy(const Trace& t) {
  if (!t.perfect_fd) return {"fd_accuracy", Verdict::skipped, "eventually perfect mode", {}};
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const auto& ev = t.events[i];
    if (ev.kind != EventKind::suspect) continue;
    const auto& c = t.crashed_at[ev.peer];
    const auto& x = t.terminated_at[ev.peer];
    const bool down = (c && *c <= ev.time) || (x && *x <= ev.time);
    if (!down)
      return fail("fd_accuracy",
                  "server " + std::to_string(ev.server) + " suspected live server " + std::to_string(ev.peer), i, i);
  }
  return pass("fd_accuracy");
}

std::vector<CheckReport> check_all(const Trace& t) {
  auto out = check_safety(t);
  for (auto& r : check_liveness(t)) out.push_back(r);
  for (auto& r : check_state_propositions(t)) out.push_back(r);
  out.push_back(check_channels(t));
  out.push_back(check_partition(t));
  out.push_back(check_eon_barrier(t));
  out.push_back(check_fd_accuracy(t));
  return out;
}

bool any_failed(const std::vector<CheckReport>& reports) {
  return std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.verdict == Verdict::fail; });
}

namespace {

void check_model(const PerfModel& m) {
  if (!(m.delta_u > 0) || !(m.delta_r > m.delta_u))
    throw DomainError("model needs 0 < delta_u < delta_r");
}

}  // namespace

ExpectedPerformance expected_performance(const PerfModel& m) {
  check_model(m);
  if (!(m.lambda >= 3)) throw DomainError("lambda must be at least 3");
  ExpectedPerformance p;
  p.latency = 2 * m.delta_u + (m.delta_u + 2 * m.delta_r) / m.lambda;
  p.throughput = (1 - 1 / m.lambda) / (m.delta_u + m.delta_r / m.lambda);
  return p;
}

double worst_case_latency(const PerfModel& m, WorstCase variant, std::optional<double> delta_r_bar) {
  check_model(m);
  switch (variant) {
    case WorstCase::baseline: return 3 * m.delta_u + 2 * m.delta_r;
    case WorstCase::rerun_reliably: return m.delta_u + 2 * m.delta_r;
    case WorstCase::merged:
      if (!delta_r_bar) throw DomainError("merged variant needs delta_r_bar");
      return 2 * m.delta_u + *delta_r_bar;
  }
  throw DomainError("unknown variant");
}

double worst_case_throughput(const PerfModel& m) {
  check_model(m);
  return 1 / (2 * m.delta_u + m.delta_r);
}

std::pair<std::size_t, std::size_t> median_ci_ranks(std::size_t m) {
  if (m == 0) return {0, 0};
  const double half = m / 2.0, spread = 0.98 * std::sqrt(static_cast<double>(m));
  auto j = static_cast<std::int64_t>(std::floor(half - spread));
  auto k = static_cast<std::int64_t>(std::ceil(1 + half + spread));
  j = std::clamp<std::int64_t>(j, 1, static_cast<std::int64_t>(m));
  k = std::clamp<std::int64_t>(k, 1, static_cast<std::int64_t>(m));
  return {static_cast<std::size_t>(j), static_cast<std::size_t>(k)};
}

Summary summarize(const Trace& t, bool strict) {
  Summary out;
  out.transitions = t.transition_counts;
  for (const auto& [id, count] : t.transmissions) out.transmissions_per_round[id.round] += count;
  const std::uint64_t lo = 10ULL * t.n, hi = 110ULL * t.n;
  double total = 0;
  for (ServerId s = 0; s < t.n; ++s) {
    if (!t.correct(s)) continue;
    const auto& log = t.logs[s];
    std::uint64_t cum = 0;
    std::size_t first = log.size(), last = 0;
    for (std::size_t i = 0; i < log.size(); ++i) {
      const std::uint64_t before = cum;
      cum += log[i].count;
      if (before >= lo && cum <= hi) {
        first = std::min(first, i);
        last = i;
      }
    }
    if (cum < hi) {
      if (strict)
        throw DomainError("window-not-reached: server " + std::to_string(s) + " delivered " + std::to_string(cum) +
                          " of " + std::to_string(hi) + " messages");
      out.window_clipped = true;
      if (first >= log.size()) {
        first = log.size() > 1 ? 1 : 0;
        last = log.empty() ? 0 : log.size() - 1;
      }
    }
    ServerMetrics m;
    m.server = s;
    m.rounds = log.size();
    m.transmissions = t.sends_by_server[s];
    std::vector<double> lat;
    std::uint64_t msgs = 0;
    for (std::size_t i = first; i <= last && i < log.size(); ++i) {
      const auto& d = log[i];
      if (i > first) msgs += d.count;
      auto it = t.first_broadcast.find({s, d.round});
      if (d.includes_self && it != t.first_broadcast.end()) lat.push_back(static_cast<double>(d.time - it->second));
    }
    std::sort(lat.begin(), lat.end());
    m.samples = lat.size();
    if (!lat.empty()) {
      const std::size_t n = lat.size();
      m.median_latency_us = n % 2 ? lat[n / 2] : (lat[n / 2 - 1] + lat[n / 2]) / 2;
      const auto [j, k] = median_ci_ranks(n);
      m.ci_lo = lat[j - 1];
      m.ci_hi = lat[k - 1];
    }
    if (first < log.size() && last > first) {
      const double span = static_cast<double>(log[last].time - log[first].time) / 1e6;
      if (span > 0) m.throughput = msgs / span;
    }
    total += m.throughput;
    out.servers.push_back(m);
  }
  if (!out.servers.empty()) out.mean_throughput = total / out.servers.size();
  return out;
}

void write_metrics_csv(std::ostream& out, const Summary& s) {
  out << "server,median_latency_us,ci_lo,ci_hi,throughput_msgs_per_s,rounds,transmissions\n";
  for (const auto& m : s.servers)
    out << m.server << ',' << m.median_latency_us << ',' << m.ci_lo << ',' << m.ci_hi << ',' << m.throughput << ','
        << m.rounds << ',' << m.transmissions << '\n';
}

void write_reports(std::ostream& out, const std::vector<CheckReport>& reports) {
  for (const auto& r : reports) {
    out << r.property << '\t' << to_string(r.verdict);
    if (r.locator) out << "\tevents " << r.locator->first << '-' << r.locator->second;
    if (!r.detail.empty()) out << '\t' << r.detail;
    out << '\n';
  }
}

}  // namespace dualcast
