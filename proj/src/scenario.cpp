#include "dualcast/scenario.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dualcast {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

template <class T>
T number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw InvalidSpec("bad value '" + v + "' for " + key);
  return out;
}

double real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw InvalidSpec("bad value '" + v + "' for " + key);
}

bool flag(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw InvalidSpec("bad flag '" + v + "' for " + key + " (expected 0 or 1)");
}

std::vector<std::string> fields(const std::string& key, const std::string& v, std::size_t lo, std::size_t hi) {
  auto parts = split(v, ':');
  if (parts.size() < lo || parts.size() > hi) throw InvalidSpec("malformed value '" + v + "' for " + key);
  return parts;
}

}  // namespace

DigraphSpec parse_family(const std::string& text) {
  const auto parts = split(text, ':');
  DigraphSpec spec;
  if (parts.empty()) throw InvalidSpec("empty digraph family");
  if (parts[0] == "ring" && parts.size() == 1) {
    spec.family = Family::ring;
  } else if (parts[0] == "binomial" && parts.size() == 1) {
    spec.family = Family::binomial;
  } else if (parts[0] == "circulant" && parts.size() == 2) {
    spec.family = Family::circulant;
    spec.d = number<int>("circulant degree", parts[1]);
  } else if (parts[0] == "edges" && parts.size() == 2) {
    spec.family = Family::edge_list;
    std::ifstream in(parts[1]);
    if (!in) throw InvalidSpec("cannot open edge list " + parts[1]);
    const Digraph g = read_edge_list(in);
    spec.edges = g.edges();
    spec.n = static_cast<int>(g.size());
  } else {
    throw InvalidSpec("unknown digraph family '" + text + "'");
  }
  return spec;
}

std::string family_text(const DigraphSpec& spec) {
  switch (spec.family) {
    case Family::ring: return "ring";
    case Family::binomial: return "binomial";
    case Family::circulant: return "circulant:" + std::to_string(spec.d);
    case Family::edge_list: return "edges";
  }
  return "?";
}

void apply_setting(Scenario& s, const std::string& key, const std::string& v) {
  if (key == "n") {
    s.n = number<int>(key, v);
  } else if (key == "f") {
    s.f = number<int>(key, v);
  } else if (key == "reliable") {
    s.reliable = parse_family(v);
  } else if (key == "unreliable") {
    s.unreliable = parse_family(v);
  } else if (key == "fd.hb_us") {
    s.fd.heartbeat_period = number<SimTime>(key, v);
  } else if (key == "fd.to_us") {
    s.fd.timeout = number<SimTime>(key, v);
  } else if (key == "mode") {
    if (v == "perfect")
      s.fd.mode = FdMode::perfect;
    else if (v == "ep")
      s.fd.mode = FdMode::eventually_perfect;
    else
      throw InvalidSpec("mode must be perfect or ep");
  } else if (key == "uniform") {
    s.uniform = flag(key, v);
  } else if (key == "partition") {
    s.partition = flag(key, v);
  } else if (key == "partition.timeout_us") {
    s.partition_timeout = number<SimTime>(key, v);
  } else if (key == "reliable_only") {
    s.reliable_only = flag(key, v);
  } else if (key == "relax_rerun") {
    s.relax_rerun_identity = flag(key, v);
  } else if (key == "exceeds_f") {
    s.exceeds_f = flag(key, v);
  } else if (key == "latency") {
    if (v == "sdc")
      s.latency = LatencyProfile::sdc;
    else if (v == "mdc")
      s.latency = LatencyProfile::mdc;
    else
      throw InvalidSpec("latency must be sdc or mdc");
  } else if (key == "hop_us") {
    s.hop_us = number<SimTime>(key, v);
  } else if (key == "jitter_us" || key == "jitter") {
    s.jitter_us = number<SimTime>(key, v);
  } else if (key == "per_message_us") {
    s.per_message_us = number<SimTime>(key, v);
  } else if (key == "ns_per_byte") {
    s.ns_per_byte = real(key, v);
  } else if (key == "datacenters") {
    s.datacenters = number<int>(key, v);
  } else if (key == "fail") {
    const auto p = fields(key, v, 2, 2);
    s.failures.push_back({number<SimTime>(key, p[0]), number<ServerId>(key, p[1])});
  } else if (key == "fail_count") {
    s.fail_count = number<int>(key, v);
  } else if (key == "fail_window_us") {
    s.fail_window_us = number<SimTime>(key, v);
  } else if (key == "spike") {
    const auto p = fields(key, v, 4, 5);
    SpikeEvent e;
    e.time = number<SimTime>(key, p[0]);
    e.from = number<ServerId>(key, p[1]);
    e.duration = number<SimTime>(key, p[2]);
    if (p[3] == "fd")
      e.what = SpikeTarget::fd;
    else if (p[3] == "proto")
      e.what = SpikeTarget::proto;
    else if (p[3] == "all")
      e.what = SpikeTarget::all;
    else
      throw InvalidSpec("spike target must be fd, proto or all");
    if (p.size() == 5) e.to = number<ServerId>(key, p[4]);
    s.spikes.push_back(e);
  } else if (key == "stall") {
    const auto p = fields(key, v, 3, 3);
    s.stalls.push_back({number<ServerId>(key, p[0]), number<std::uint64_t>(key, p[1]), number<SimTime>(key, p[2])});
  } else if (key == "crash_after_deliver") {
    const auto p = fields(key, v, 2, 2);
    s.crash_after.push_back({number<ServerId>(key, p[0]), number<std::uint64_t>(key, p[1])});
  } else if (key == "eon") {
    const auto at = v.find(':');
    if (at == std::string::npos) throw InvalidSpec("eon needs ROUND:family");
    EonDirective e;
    e.round = number<std::uint64_t>(key, v.substr(0, at));
    e.family = parse_family(v.substr(at + 1));
    s.eon = e;
  } else if (key == "rounds") {
    s.rounds = number<std::uint64_t>(key, v);
  } else if (key == "payload") {
    s.payload = number<std::size_t>(key, v);
  } else if (key == "seed") {
    s.seed = number<std::uint64_t>(key, v);
  } else if (key == "time_bound_us" || key == "duration_us") {
    s.time_bound_us = number<SimTime>(key, v);
  } else if (key == "trace") {
    if (v == "full")
      s.trace = TraceLevel::full;
    else if (v == "summary")
      s.trace = TraceLevel::summary;
    else
      throw InvalidSpec("trace must be full or summary");
  } else {
    throw InvalidSpec("unknown key '" + key + "'");
  }
}

Scenario parse_scenario(std::istream& in, const std::string& origin) {
  Scenario s;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    try {
      if (eq == std::string::npos) throw InvalidSpec("expected key=value");
      apply_setting(s, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const InvalidSpec& e) {
      throw InvalidSpec(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return s;
}

Scenario parse_scenario_text(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSpec("cannot open scenario " + path);
  return parse_scenario(in, path);
}

void validate(const Scenario& s) {
  if (s.n < 2) throw ConfigError("n must be at least 2");
  s.fd.validate();
  if (s.f < 0) throw ConfigError("f must be non-negative");
  DigraphSpec r = s.reliable;
  r.n = s.n;
  Digraph gr;
  try {
    gr = build_overlay(r);
    DigraphSpec u = s.unreliable;
    u.n = s.n;
    Dissemination check(u);
    if (!strongly_connected(check.digraph())) throw ConfigError("unreliable digraph is not strongly connected");
  } catch (const InvalidSpec& e) {
    throw ConfigError(e.what());
  }
  const int kappa = vertex_connectivity(gr);
  if (s.f >= kappa)
    throw ConfigError("f=" + std::to_string(s.f) + " is not below the reliable connectivity " + std::to_string(kappa));
  check_uniform_config(s.n, s.f, s.uniform);
  if (s.planned_failures() > s.f && !s.exceeds_f)
    throw ConfigError("scenario schedules " + std::to_string(s.planned_failures()) + " crashes with f=" +
                      std::to_string(s.f) + "; mark it exceeds_f=1 to run it anyway");
  auto in_range = [&](ServerId id) {
    if (id < 0 || id >= s.n) throw ConfigError("server " + std::to_string(id) + " out of range");
  };
  for (const auto& e : s.failures) in_range(e.server);
  for (const auto& e : s.stalls) in_range(e.server);
  for (const auto& e : s.crash_after) in_range(e.server);
  for (const auto& e : s.spikes) {
    in_range(e.from);
    if (e.to) in_range(*e.to);
    if (e.what != SpikeTarget::proto && s.fd.mode == FdMode::perfect)
      throw ConfigError("failure detector spikes need mode=ep");
  }
  if (s.fail_count > 0 && s.fail_window_us <= 0) throw ConfigError("fail_count needs fail_window_us > 0");
  if (s.latency == LatencyProfile::mdc && s.datacenters < 1) throw ConfigError("datacenters must be positive");
  if (s.eon && s.reliable_only) throw ConfigError("eon transitions need the dual mode");
  if (s.rounds == 0) throw ConfigError("rounds must be positive");
}

std::string to_text(const Scenario& s) {
  static const char* spike_what[] = {"fd", "proto", "all"};
  std::ostringstream o;
  o << "n=" << s.n << "\nf=" << s.f << "\nreliable=" << family_text(s.reliable)
    << "\nunreliable=" << family_text(s.unreliable) << "\nfd.hb_us=" << s.fd.heartbeat_period
    << "\nfd.to_us=" << s.fd.timeout << "\nmode=" << (s.fd.mode == FdMode::perfect ? "perfect" : "ep")
    << "\nuniform=" << s.uniform << "\npartition=" << s.partition
    << "\npartition.timeout_us=" << s.partition_timeout << "\nreliable_only=" << s.reliable_only
    << "\nrelax_rerun=" << s.relax_rerun_identity << "\nexceeds_f=" << s.exceeds_f
    << "\nlatency=" << (s.latency == LatencyProfile::sdc ? "sdc" : "mdc") << "\nhop_us=" << s.hop_us
    << "\njitter_us=" << s.jitter_us << "\nper_message_us=" << s.per_message_us
    << "\nns_per_byte=" << s.ns_per_byte << "\ndatacenters=" << s.datacenters << "\nrounds=" << s.rounds
    << "\npayload=" << s.payload << "\nseed=" << s.seed << "\ntime_bound_us=" << s.time_bound_us
    << "\ntrace=" << (s.trace == TraceLevel::full ? "full" : "summary") << "\n";
  for (const auto& e : s.failures) o << "fail=" << e.time << ":" << e.server << "\n";
  if (s.fail_count > 0) o << "fail_count=" << s.fail_count << "\nfail_window_us=" << s.fail_window_us << "\n";
  for (const auto& e : s.spikes) {
    o << "spike=" << e.time << ":" << e.from << ":" << e.duration << ":" << spike_what[static_cast<int>(e.what)];
    if (e.to) o << ":" << *e.to;
    o << "\n";
  }
  for (const auto& e : s.stalls) o << "stall=" << e.server << ":" << e.round << ":" << e.duration << "\n";
  for (const auto& e : s.crash_after) o << "crash_after_deliver=" << e.server << ":" << e.round << "\n";
  if (s.eon) o << "eon=" << s.eon->round << ":" << family_text(s.eon->family) << "\n";
  return o.str();
}

}  // namespace dualcast
