#include "dualcast/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "dualcast/analysis.hpp"
#include "dualcast/sim.hpp"

namespace dualcast {

namespace fs = std::filesystem;

namespace {

struct RunOutcome {
  int code = kExitOk;
  std::string message;
  std::vector<CheckReport> reports;
  std::optional<Summary> summary;
  std::optional<SimResult> result;
};

RunOutcome execute(Scenario sc, const std::optional<std::uint64_t>& seed) {
  RunOutcome o;
  if (seed) sc.seed = *seed;
  try {
    validate(sc);
  } catch (const ConfigError& e) {
    o.code = kExitConfig;
    o.message = e.what();
    return o;
  }
  SimResult res = run(sc);
  o.reports = check_all(res.trace);
  if (sc.uniform) o.reports.push_back(check_uniformity(res.trace));
  o.summary = summarize(res.trace, false);
  if (res.outcome == Outcome::violation) {
    o.code = kExitCheckFailed;
    o.message = "protocol violation: " + res.violation;
  } else if (any_failed(o.reports)) {
    o.code = kExitCheckFailed;
    o.message = "check failed";
  } else if (res.outcome == Outcome::time_bound) {
    o.code = kExitTimeBound;
    o.message = "time bound reached";
  }
  o.result = std::move(res);
  return o;
}

std::string default_out(const RunOptions& opt) {
  if (!opt.out_dir.empty()) return opt.out_dir;
  if (const char* env = std::getenv("DUALCAST_OUT")) return env;
  return "out";
}

}  // namespace

int cmd_run(const std::string& scenario_path, const RunOptions& opt, std::ostream& log) {
  Scenario sc;
  try {
    sc = load_scenario(scenario_path);
  } catch (const InvalidSpec& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  RunOutcome o = execute(sc, opt.seed);
  if (o.code == kExitConfig) {
    log << "error: " << o.message << '\n';
    return o.code;
  }
  const fs::path dir = default_out(opt);
  fs::create_directories(dir);
  {
    std::ofstream t(dir / "trace.tsv");
    o.result->trace.write_tsv(t);
  }
  {
    std::ofstream m(dir / "metrics.csv");
    write_metrics_csv(m, *o.summary);
  }
  {
    std::ofstream c(dir / "checks.txt");
    c << "outcome\t" << to_string(o.result->outcome) << '\n';
    write_reports(c, o.reports);
  }
  if (!opt.quiet) {
    log << "outcome " << to_string(o.result->outcome) << ", " << o.result->trace.events.size() << " events, trace hash "
        << std::hex << o.result->trace.hash() << std::dec << '\n';
    write_reports(log, o.reports);
  }
  if (o.code != kExitOk) log << o.message << '\n';
  return o.code;
}

std::pair<std::string, std::vector<std::string>> parse_vary(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidSpec("--vary expects key=v1,v2");
  std::string key = arg.substr(0, eq);
  std::replace(key.begin(), key.end(), '-', '_');
  std::vector<std::string> values;
  const std::string rest = arg.substr(eq + 1);
  const auto dots = rest.find("..");
  if (dots != std::string::npos) {
    const long lo = std::stol(rest.substr(0, dots)), hi = std::stol(rest.substr(dots + 2));
    for (long v = lo; v <= hi; ++v) values.push_back(std::to_string(v));
  } else {
    std::stringstream in(rest);
    std::string v;
    while (std::getline(in, v, ','))
      if (!v.empty()) values.push_back(v);
  }
  return {key, values};
}

int cmd_sweep(const std::string& template_path, const SweepOptions& opt, std::ostream& log) {
  Scenario base;
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  try {
    base = load_scenario(template_path);
    for (const auto& v : opt.vary) {
      auto axis = parse_vary(v);
      if (axis.second.empty()) continue;
      Scenario probe = base;
      apply_setting(probe, axis.first, axis.second.front());
      axes.push_back(std::move(axis));
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  struct Job {
    std::vector<std::string> values;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::vector<std::vector<std::string>> combos{{}};
  for (const auto& [_, values] : axes) {
    std::vector<std::vector<std::string>> next;
    for (const auto& c : combos)
      for (const auto& v : values) {
        next.push_back(c);
        next.back().push_back(v);
      }
    combos = std::move(next);
  }
  const std::uint64_t seed0 = opt.run.seed.value_or(base.seed);
  const int seeds = std::max(1, opt.seeds);
  for (const auto& c : combos)
    for (int k = 0; k < seeds; ++k) jobs.push_back({c, seed0 + static_cast<std::uint64_t>(k)});

  std::vector<RunOutcome> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      Scenario sc = base;
      for (std::size_t a = 0; a < axes.size(); ++a) apply_setting(sc, axes[a].first, jobs[i].values[a]);
      results[i] = execute(sc, jobs[i].seed);
      results[i].result.reset();  // traces are not kept in sweeps
    }
  };
  int workers = opt.workers > 0 ? opt.workers : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(1, jobs.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  const fs::path dir = default_out(opt.run);
  fs::create_directories(dir);
  std::ofstream csv(dir / "sweep.csv");
  for (const auto& [key, _] : axes) csv << key << ',';
  csv << "seed,exit,mean_throughput_msgs_per_s,median_latency_us,failed_checks\n";
  int code = kExitOk;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& r = results[i];
    for (const auto& v : jobs[i].values) csv << v << ',';
    double lat = 0;
    if (r.summary && !r.summary->servers.empty()) {
      std::vector<double> meds;
      for (const auto& m : r.summary->servers) meds.push_back(m.median_latency_us);
      std::sort(meds.begin(), meds.end());
      lat = meds[meds.size() / 2];
    }
    std::string failed;
    for (const auto& rep : r.reports)
      if (rep.verdict == Verdict::fail) failed += (failed.empty() ? "" : ";") + rep.property;
    csv << jobs[i].seed << ',' << r.code << ',' << (r.summary ? r.summary->mean_throughput : 0) << ',' << lat << ','
        << failed << '\n';
    if (r.code != kExitOk && code == kExitOk) {
      code = r.code;
      log << "run " << i << " (seed " << jobs[i].seed << "): " << r.message << '\n';
    }
  }
  if (!opt.run.quiet) log << jobs.size() << " runs written to " << (dir / "sweep.csv").string() << '\n';
  return code;
}

int cmd_check(const std::vector<std::string>& paths, const RunOptions& opt, std::ostream& log) {
  int code = kExitOk;
  for (const auto& p : paths) {
    RunOutcome o;
    try {
      o = execute(load_scenario(p), opt.seed);
    } catch (const InvalidSpec& e) {
      o.code = kExitConfig;
      o.message = e.what();
    }
    if (!opt.quiet || o.code != kExitOk) {
      log << p << ": " << (o.code == kExitOk ? "ok" : o.message) << '\n';
      if (!opt.quiet) write_reports(log, o.reports);
    }
    if (code == kExitOk) code = o.code;
  }
  return code;
}

int cmd_model(const ModelOptions& opt, std::ostream& out) {
  try {
    PerfModel m{opt.delta_u, opt.delta_r, 0};
    out << std::fixed << std::setprecision(4);
    if (opt.worst) {
      WorstCase v;
      if (*opt.worst == "baseline")
        v = WorstCase::baseline;
      else if (*opt.worst == "rerun")
        v = WorstCase::rerun_reliably;
      else if (*opt.worst == "merged")
        v = WorstCase::merged;
      else
        throw DomainError("unknown worst-case variant " + *opt.worst);
      const double lat = worst_case_latency(m, v, opt.delta_r_bar);
      out << "variant\tlatency\tlatency/dr\tthroughput*dr\n"
          << *opt.worst << '\t' << lat << '\t' << lat / m.delta_r << '\t' << worst_case_throughput(m) * m.delta_r
          << '\n';
      return kExitOk;
    }
    std::vector<double> lambdas = opt.lambdas;
    if (lambdas.empty()) lambdas = {3, 5, 10, 20, 50, 100};
    out << "lambda\tlatency\tthroughput\tlatency/dr\tthroughput*dr\n";
    for (double l : lambdas) {
      m.lambda = l;
      const auto p = expected_performance(m);
      out << l << '\t' << p.latency << '\t' << p.throughput << '\t' << p.latency / m.delta_r << '\t'
          << p.throughput * m.delta_r << '\n';
    }
    return kExitOk;
  } catch (const DomainError& e) {
    out << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

int cli_main(int argc, char** argv) {
  CLI::App app{"dual-digraph atomic broadcast simulator"};
  app.require_subcommand(1);
  RunOptions ro;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", ro.out_dir, "output directory (default $DUALCAST_OUT or ./out)");
    sub->add_option("--seed", seed, "override the scenario seed");
    sub->add_flag("--quiet", ro.quiet, "only report failures");
  };

  std::string scenario;
  auto* run = app.add_subcommand("run", "simulate one scenario and check the trace");
  run->add_option("scenario", scenario, "scenario file")->required();
  add_common(run);

  SweepOptions so;
  auto* sweep = app.add_subcommand("sweep", "run a scenario template over parameter variations and seeds");
  sweep->add_option("scenario", scenario, "scenario template")->required();
  sweep->add_option("--vary", so.vary, "key=v1,v2 or key=a..b (repeatable)");
  sweep->add_option("--seeds", so.seeds, "seeds per variation");
  sweep->add_option("--workers", so.workers, "parallel runs");
  add_common(sweep);

  std::vector<std::string> scenarios;
  auto* check = app.add_subcommand("check", "run scenarios and print check reports");
  check->add_option("scenarios", scenarios, "scenario files")->required();
  add_common(check);

  ModelOptions mo;
  std::string worst;
  auto* model = app.add_subcommand("model", "evaluate the analytic performance model");
  model->add_option("--du", mo.delta_u, "expected unreliable round duration")->required();
  model->add_option("--dr", mo.delta_r, "expected reliable round duration")->required();
  model->add_option("--lambda", mo.lambdas, "unreliable rounds between failures");
  model->add_option("--worst", worst, "worst case variant: baseline, rerun, merged");
  model->add_option("--dr-bar", mo.delta_r_bar, "merged reliable round duration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  if (run->parsed() || sweep->parsed() || check->parsed())
    if (run->parsed() ? run->count("--seed") : sweep->parsed() ? sweep->count("--seed") : check->count("--seed"))
      ro.seed = seed;

  try {
    if (run->parsed()) return cmd_run(scenario, ro, std::cerr);
    if (sweep->parsed()) {
      so.run = ro;
      return cmd_sweep(scenario, so, std::cerr);
    }
    if (check->parsed()) return cmd_check(scenarios, ro, std::cout);
    if (!worst.empty()) mo.worst = worst;
    return cmd_model(mo, std::cout);
  } catch (const InvalidSpec& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace dualcast
