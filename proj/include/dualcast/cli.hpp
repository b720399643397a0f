#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dualcast {

// Stable exit codes.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitTimeBound = 3 };

struct RunOptions {
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int cmd_run(const std::string& scenario_path, const RunOptions& opt, std::ostream& log);

struct SweepOptions {
  RunOptions run;
  std::vector<std::string> vary;  // "key=v1,v2" or "key=a..b"
  int seeds = 1;
  int workers = 0;  // 0: hardware concurrency
};

int cmd_sweep(const std::string& template_path, const SweepOptions& opt, std::ostream& log);

// Runs each scenario and prints its check reports; nothing is written.
int cmd_check(const std::vector<std::string>& scenario_paths, const RunOptions& opt, std::ostream& log);

struct ModelOptions {
  double delta_u = 0;
  double delta_r = 0;
  std::vector<double> lambdas;
  std::optional<std::string> worst;  // baseline | rerun | merged
  std::optional<double> delta_r_bar;
};

int cmd_model(const ModelOptions& opt, std::ostream& out);

// Expands a --vary argument into (key, values).
std::pair<std::string, std::vector<std::string>> parse_vary(const std::string& arg);

int cli_main(int argc, char** argv);

}  // namespace dualcast
