// Tabular multi-agent Q-learning over a machine: one table per non-terminal
// state, indicator-extended states, reward splitting and potential shaping.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "form/env.hpp"
#include "form/learner.hpp"
#include "form/machine.hpp"

namespace form::rl {

// Ground instances of the universal atoms on u's outgoing edges, in
// Herbrand-base order.
std::vector<GroundAtom> universal_atoms(const Form& form, StateId u);

struct ExtendedState {
  int cell = 0;
  std::vector<char> indicators;  // 1 iff the atom is in buffer.seen
  bool operator==(const ExtendedState&) const = default;
};

ExtendedState extended_state(const Form& form, StateId u, int cell, const Buffer& buffer);

// r/n' for each distinct non-terminal state in `visited`; the last one takes
// the remainder so the shares add up to r exactly.
std::vector<std::pair<StateId, double>> split_reward(double r, const std::vector<StateId>& visited,
                                                     const Form& form);

class AgentTeam {
 public:
  AgentTeam(Form machine, int num_cells);

  const Form& machine() const { return machine_; }
  int num_cells() const { return num_cells_; }
  // Row of u's table for the extended state; u must be non-terminal.
  std::size_t row(StateId u, int cell, const Buffer& buffer) const;
  std::size_t rows(StateId u) const { return agents_.at(u).rows; }
  const std::vector<GroundAtom>& indicator_atoms(StateId u) const { return agents_.at(u).g; }
  bool has_agent(StateId u) const { return agents_.at(u).rows > 0; }

  double& q(StateId u, std::size_t row, int action) { return agents_[u].q[row * env::kNumActions + action]; }
  double q(StateId u, std::size_t row, int action) const {
    return agents_.at(u).q[row * env::kNumActions + action];
  }
  const std::vector<double>& table(StateId u) const { return agents_.at(u).q; }
  void set_table(StateId u, std::vector<double> values);
  bool frozen(StateId u) const { return agents_.at(u).frozen; }
  void freeze(StateId u, bool on = true) { agents_.at(u).frozen = on; }

 private:
  struct Agent {
    std::vector<GroundAtom> g;
    std::size_t rows = 0;  // 0 for terminal states
    std::vector<double> q;
    bool frozen = false;
  };
  Form machine_;
  int num_cells_;
  std::vector<Agent> agents_;
};

enum class Mode { Fixed, LearnForm, LearnProp, NoMachine };
std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);  // fixed, learn-form, learn-prop, no-machine

struct EarlyStop {
  bool enabled = false;
  double crossing = 0.7;  // arm once the window success reaches this
  double drop = 0.1;      // then stop when it falls this far below its peak
};

struct RLConfig {
  double alpha = 0.1;
  double gamma = 0.999;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.5;  // of `episodes`
  long episodes = 50000;
  bool shaping = true;
  int window = 100;               // success-rate window, in episodes
  int iteration_episodes = 100;   // episodes per metrics row
  double target_success = 0.9;    // episodes_to_target threshold
  bool stop_at_target = false;
  EarlyStop early_stop;
  std::uint64_t seed = 0;
};

struct IterationMetrics {
  int iteration = 0;
  long episodes = 0;
  double mean_return = 0.0;
  double success_rate = 0.0;
  int machine_version = 0;
  double learner_time_ms = 0.0;  // wall time
  bool learner_timeout = false;
};

struct TrainResult {
  std::optional<AgentTeam> team;  // over the dummy machine in no-machine mode
  std::vector<IterationMetrics> metrics;
  long episodes_run = 0;
  std::optional<long> episodes_to_target;  // first episode count with window success >= target
  double final_success = 0.0;
  double best_success = 0.0;
  bool stopped_early = false;
  std::vector<Form> machines;  // every machine used, in order
  int learner_timeouts = 0;
  long machine_steps = 0;
  long conservation_failures = 0;  // episodes whose shares did not add up to r exactly
};

// Fixed mode needs `machine`; learned modes start from the dummy machine and
// relearn on counterexamples with `search` (its mode is overridden).
TrainResult train(const env::Task& task, Mode mode, const RLConfig& cfg,
                  const std::optional<Form>& machine = std::nullopt, const SearchConfig& search = {});

// Rebinds the team's machine to the new task's signature. States named in
// `retrain` learn (warm-started when their table shape is unchanged); the rest
// are frozen and must keep their shape (Error otherwise).
TrainResult transfer(const AgentTeam& team, const env::Task& task, const std::set<std::string>& retrain,
                     const RLConfig& cfg);

// run_id,seed,iteration,episodes,mean_return,success_rate,machine_version,learner_time_ms,learner_timeout
void write_metrics_header(std::ostream& out);
void write_metrics(std::ostream& out, const std::string& run_id, std::uint64_t seed,
                   const std::vector<IterationMetrics>& metrics);

}  // namespace form::rl
