#pragma once

#include <memory>
#include <string>

#include "dualcast/scenario.hpp"
#include "dualcast/trace.hpp"

namespace dualcast {

enum class Outcome { completed, time_bound, violation };
std::string to_string(Outcome o);

struct SimResult {
  Outcome outcome = Outcome::completed;
  std::string violation;  // trap message when outcome == violation
  Trace trace;
};

class Simulator {
 public:
  explicit Simulator(Scenario scenario);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  // Schedules a crash. Throws ConfigError if the server already has one.
  void inject_failure(ServerId server, SimTime time);

  SimResult run();

  const ServerState& server(ServerId id) const;
  const Scenario& scenario() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// validate() + Simulator(s).run().
SimResult run(const Scenario& s);

}  // namespace dualcast
