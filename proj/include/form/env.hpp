// Deterministic grid world with coloured checkpoints, a goal cell and lava;
// task catalog, episode labelling and trace generators.
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "form/learner.hpp"
#include "form/logic.hpp"
#include "form/machine.hpp"

namespace form::env {

class UnknownTask : public Error {
 public:
  using Error::Error;
};

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

enum class Action { Up, Down, Left, Right };  // y-1, y+1, x-1, x+1
inline constexpr int kNumActions = 4;

struct Checkpoint {
  Cell cell;
  GroundAtom atom;  // colour(constant)
  bool operator==(const Checkpoint&) const = default;
};

struct GridLayout {
  int width = 8;
  int height = 8;
  Cell start{0, 0};
  Cell goal{7, 7};
  std::vector<Checkpoint> checkpoints;
  std::vector<Cell> lava;

  // Throws Error on out-of-bounds or overlapping cells and repeated constants.
  void check() const;
  // goal, lava (only with lava cells) and one unary predicate per colour.
  Signature signature() const;
  bool operator==(const GridLayout&) const = default;
};

// 8x8, start (0,0), goal (7,7), checkpoints o0..o12; `extra_yellows` adds
// o13.. at fixed free cells (at most 4).
GridLayout default_layout(int extra_yellows = 0, bool with_lava = false);
// Same checkpoints, goal and lava count as `base`, placed uniformly at random
// on distinct non-start cells with everything reachable around lava.
GridLayout randomize_layout(const GridLayout& base, std::uint64_t seed);

//   layout v1
//   grid <w> <h>
//   cell <x> <y> start|goal|lava|<colour>(<constant>)
std::string layout_to_text(const GridLayout& layout);
GridLayout layout_from_text(const std::string& text);

enum class TaskKind { AllYellow, GreenButOneNoLava, BlueAllYellow7 };
enum class Status { Running, Goal, Dead, Timeout };
std::string status_name(Status s);

// Incremental progress of a task predicate over an observation stream.
struct Monitor {
  int stage = 0;
  std::vector<char> seen;  // yellow members seen in the current stage
  Status status = Status::Running;
};

class Task {
 public:
  Task(std::string name, TaskKind kind, GridLayout layout, int max_steps = 300);

  const std::string& name() const { return name_; }
  TaskKind kind() const { return kind_; }
  const GridLayout& layout() const { return layout_; }
  const Signature& signature() const { return sig_; }
  int max_steps() const { return max_steps_; }
  const Observation& observation_at(Cell c) const { return cell_obs_[c.y * layout_.width + c.x]; }
  bool is_lava(Cell c) const { return lava_[c.y * layout_.width + c.x] != 0; }

  Monitor start_monitor() const;
  // Returns the monitor status after consuming o; terminal statuses stick.
  Status advance(Monitor& m, const Observation& o) const;

  // First terminal event of the stream decides: GOAL or DEAD; never both.
  bool goal_predicate(const std::vector<Observation>& trace) const;
  bool dead_predicate(const std::vector<Observation>& trace) const;

  // Hand-built machine for the task over signature().
  Form reference_machine() const;

 private:
  std::string name_;
  TaskKind kind_;
  GridLayout layout_;
  int max_steps_;
  Signature sig_;
  std::vector<Observation> cell_obs_;
  std::vector<char> lava_;
  std::vector<GroundAtom> yellows_, blues_, greens_;
};

struct TaskOptions {
  std::optional<std::uint64_t> layout_seed;  // randomized placement
  int max_steps = 300;
};

// all-yellow-2, all-yellow-4, all-yellow-6, green-but-one-no-lava, blue-allyellow-7
std::vector<std::string> task_names();
Task make_task(const std::string& name, const TaskOptions& opts = {});

struct EnvState {
  Cell agent;
  int steps = 0;
  Status status = Status::Running;
  Monitor monitor;
};

EnvState reset(const Task& task);
// Moves (walls clamp) and returns the atoms of the cell the agent is on.
// Throws Error when the episode is over.
Observation step(const Task& task, EnvState& st, Action a);

TraceExample label_trace(const Task& task, const std::vector<Observation>& trace);

// Shortest lava-free path of actions from a to b; nullopt when unreachable.
std::optional<std::vector<Action>> shortest_path(const Task& task, Cell a, Cell b);

// One episode of uniformly random actions.
TraceExample random_walk(const Task& task, std::mt19937_64& rng);
// Walks noisy shortest paths through a random sequence of checkpoints and
// possibly the goal; the trace may end before the episode would.
TraceExample guided_tour(const Task& task, std::mt19937_64& rng);
// Half random walks, half guided tours, labelled by the task.
std::vector<TraceExample> generate_traces(const Task& task, int count, std::uint64_t seed);
// Round-robin over the labels the task can produce until `count` traces.
std::vector<TraceExample> balanced_traces(const Task& task, int count, std::uint64_t seed);

}  // namespace form::env
