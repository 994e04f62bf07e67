#include "form/env.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

namespace form::env {

namespace {

GroundAtom atom(const std::string& colour, int k) { return {colour, "o" + std::to_string(k)}; }

bool in_bounds(const GridLayout& l, Cell c) { return c.x >= 0 && c.y >= 0 && c.x < l.width && c.y < l.height; }

Cell moved(const GridLayout& l, Cell c, Action a) {
  Cell n = c;
  switch (a) {
    case Action::Up: --n.y; break;
    case Action::Down: ++n.y; break;
    case Action::Left: --n.x; break;
    case Action::Right: ++n.x; break;
  }
  return in_bounds(l, n) ? n : c;
}

// Cells reachable from `from` without entering lava.
std::set<Cell> reachable(const GridLayout& l, Cell from) {
  const std::set<Cell> lava(l.lava.begin(), l.lava.end());
  std::set<Cell> seen{from};
  std::deque<Cell> q{from};
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop_front();
    for (int a = 0; a < kNumActions; ++a) {
      const Cell n = moved(l, c, static_cast<Action>(a));
      if (lava.count(n) || !seen.insert(n).second) continue;
      q.push_back(n);
    }
  }
  return seen;
}

bool all_reachable(const GridLayout& l) {
  const auto r = reachable(l, l.start);
  if (!r.count(l.goal)) return false;
  return std::all_of(l.checkpoints.begin(), l.checkpoints.end(),
                     [&](const Checkpoint& c) { return r.count(c.cell) > 0; });
}

}  // namespace

void GridLayout::check() const {
  if (width < 1 || height < 1) throw Error("layout: empty grid");
  std::set<Cell> used;
  auto place = [&](Cell c, const std::string& what) {
    if (!in_bounds(*this, c))
      throw Error("layout: " + what + " at (" + std::to_string(c.x) + "," + std::to_string(c.y) + ") is off the grid");
    if (!used.insert(c).second)
      throw Error("layout: cell (" + std::to_string(c.x) + "," + std::to_string(c.y) + ") used twice");
  };
  place(start, "start");
  place(goal, "goal");
  std::set<std::string> constants;
  for (const auto& cp : checkpoints) {
    if (cp.atom.argument.empty()) throw Error("layout: checkpoint '" + cp.atom.to_string() + "' has no constant");
    if (!constants.insert(cp.atom.argument).second)
      throw Error("layout: constant '" + cp.atom.argument + "' appears twice");
    place(cp.cell, cp.atom.to_string());
  }
  for (const auto& c : lava) place(c, "lava");
}

Signature GridLayout::signature() const {
  Signature sig;
  sig.add_predicate("goal", 0);
  if (!lava.empty()) sig.add_predicate("lava", 0);
  for (const auto& cp : checkpoints) sig.add_constant(cp.atom.argument);
  for (const auto& cp : checkpoints) {
    if (!sig.arity(cp.atom.predicate)) sig.add_predicate(cp.atom.predicate, 1);
    sig.add_member(cp.atom.predicate, cp.atom.argument);
  }
  return sig;
}

GridLayout default_layout(int extra_yellows, bool with_lava) {
  if (extra_yellows < 0 || extra_yellows > 4) throw Error("default layout supports 0..4 extra yellows");
  GridLayout l;
  const std::vector<std::pair<Cell, GroundAtom>> base = {
      {{1, 6}, atom("yellow", 0)}, {{6, 1}, atom("yellow", 1)}, {{3, 0}, atom("red", 2)},
      {{0, 4}, atom("red", 3)},    {{2, 3}, atom("blue", 4)},   {{5, 5}, atom("blue", 5)},
      {{4, 1}, atom("purple", 6)}, {{1, 2}, atom("purple", 7)}, {{6, 4}, atom("gray", 8)},
      {{3, 6}, atom("gray", 9)},   {{4, 3}, atom("green", 10)}, {{7, 2}, atom("green", 11)},
      {{2, 5}, atom("green", 12)}};
  for (const auto& [c, a] : base) l.checkpoints.push_back({c, a});
  const std::vector<Cell> extra = {{0, 7}, {7, 0}, {5, 7}, {3, 4}};
  for (int k = 0; k < extra_yellows; ++k) l.checkpoints.push_back({extra[k], atom("yellow", 13 + k)});
  if (with_lava) l.lava = {{3, 3}, {5, 2}, {1, 4}, {4, 5}, {6, 6}};
  l.check();
  return l;
}

GridLayout randomize_layout(const GridLayout& base, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Cell> free;
  for (int y = 0; y < base.height; ++y)
    for (int x = 0; x < base.width; ++x)
      if (Cell{x, y} != base.start) free.push_back({x, y});
  const std::size_t need = 1 + base.checkpoints.size() + base.lava.size();
  if (need > free.size()) throw Error("layout: grid too small to randomize");
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::shuffle(free.begin(), free.end(), rng);
    GridLayout l = base;
    std::size_t k = 0;
    l.goal = free[k++];
    for (auto& cp : l.checkpoints) cp.cell = free[k++];
    for (auto& c : l.lava) c = free[k++];
    if (all_reachable(l)) return l;
  }
  throw Error("layout: no reachable random placement found");
}

std::string layout_to_text(const GridLayout& l) {
  std::ostringstream out;
  out << "layout v1\n";
  out << "grid " << l.width << ' ' << l.height << '\n';
  out << "cell " << l.start.x << ' ' << l.start.y << " start\n";
  out << "cell " << l.goal.x << ' ' << l.goal.y << " goal\n";
  for (const auto& c : l.lava) out << "cell " << c.x << ' ' << c.y << " lava\n";
  for (const auto& cp : l.checkpoints) out << "cell " << cp.cell.x << ' ' << cp.cell.y << ' ' << cp.atom.to_string() << '\n';
  return out.str();
}

GridLayout layout_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false, grid = false, start = false, goal = false;
  GridLayout l;
  l.checkpoints.clear();
  l.lava.clear();
  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError("layout line " + std::to_string(lineno) + ": " + msg, 0);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (!header) {
      std::string ver;
      ls >> ver;
      if (kw != "layout" || ver != "v1") throw fail("expected 'layout v1'");
      header = true;
      continue;
    }
    if (kw == "grid") {
      if (!(ls >> l.width >> l.height)) throw fail("bad grid record");
      grid = true;
    } else if (kw == "cell") {
      Cell c;
      std::string what;
      if (!(ls >> c.x >> c.y >> what)) throw fail("bad cell record");
      if (what == "start") {
        l.start = c;
        start = true;
      } else if (what == "goal") {
        l.goal = c;
        goal = true;
      } else if (what == "lava") {
        l.lava.push_back(c);
      } else {
        const Observation o = parse_observation(what);
        if (o.atoms().size() != 1 || o.atoms()[0].argument.empty()) throw fail("bad checkpoint '" + what + "'");
        l.checkpoints.push_back({c, o.atoms()[0]});
      }
    } else {
      throw fail("unknown record '" + kw + "'");
    }
    std::string extra;
    if (ls >> extra) throw fail("trailing text '" + extra + "'");
  }
  if (!header || !grid || !start || !goal) throw ParseError("layout: missing header, grid, start or goal", 0);
  l.check();
  return l;
}

std::string status_name(Status s) {
  switch (s) {
    case Status::Running: return "RUNNING";
    case Status::Goal: return "GOAL";
    case Status::Dead: return "DEAD";
    case Status::Timeout: return "TIMEOUT";
  }
  return "?";
}

Task::Task(std::string name, TaskKind kind, GridLayout layout, int max_steps)
    : name_(std::move(name)), kind_(kind), layout_(std::move(layout)), max_steps_(max_steps) {
  layout_.check();
  if (max_steps_ < 1) throw Error("task: max_steps must be positive");
  sig_ = layout_.signature();
  const int cells = layout_.width * layout_.height;
  std::vector<std::vector<GroundAtom>> at(cells);
  lava_.assign(cells, 0);
  at[layout_.goal.y * layout_.width + layout_.goal.x].push_back(GroundAtom("goal"));
  for (const auto& c : layout_.lava) {
    at[c.y * layout_.width + c.x].push_back(GroundAtom("lava"));
    lava_[c.y * layout_.width + c.x] = 1;
  }
  for (const auto& cp : layout_.checkpoints) at[cp.cell.y * layout_.width + cp.cell.x].push_back(cp.atom);
  for (auto& v : at) cell_obs_.emplace_back(std::move(v));
  auto members = [&](const std::string& p) {
    std::vector<GroundAtom> out;
    if (sig_.arity(p) == 1)
      for (const auto& c : sig_.members(p)) out.push_back({p, c});
    return out;
  };
  yellows_ = members("yellow");
  blues_ = members("blue");
  greens_ = members("green");
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) throw Error("task '" + name_ + "': layout lacks " + what);
  };
  switch (kind_) {
    case TaskKind::AllYellow: need(!yellows_.empty(), "yellow checkpoints"); break;
    case TaskKind::GreenButOneNoLava:
      need(sig_.contains(GroundAtom("green", "o12")), "green(o12)");
      need(greens_.size() >= 2, "a second green checkpoint");
      need(sig_.contains(GroundAtom("lava")), "lava");
      break;
    case TaskKind::BlueAllYellow7:
      need(!blues_.empty() && !yellows_.empty(), "blue and yellow checkpoints");
      need(sig_.contains(GroundAtom("purple", "o7")), "purple(o7)");
      break;
  }
}

Monitor Task::start_monitor() const {
  Monitor m;
  m.seen.assign(yellows_.size(), 0);
  return m;
}

Status Task::advance(Monitor& m, const Observation& o) const {
  if (m.status != Status::Running) return m.status;
  if (o.contains(GroundAtom("lava"))) return m.status = Status::Dead;
  auto any_of = [&](const std::vector<GroundAtom>& as) {
    return std::any_of(as.begin(), as.end(), [&](const GroundAtom& a) { return o.contains(a); });
  };
  // Marks yellows; true once all have been seen in the current stage.
  auto collect_yellows = [&] {
    for (std::size_t k = 0; k < yellows_.size(); ++k)
      if (o.contains(yellows_[k])) m.seen[k] = 1;
    return std::all_of(m.seen.begin(), m.seen.end(), [](char c) { return c != 0; });
  };
  const bool goal = o.contains(GroundAtom("goal"));
  switch (kind_) {
    case TaskKind::AllYellow:
      if (m.stage == 0) {
        if (collect_yellows()) m.stage = 1;
      } else if (goal) {
        m.status = Status::Goal;
      }
      break;
    case TaskKind::GreenButOneNoLava:
      if (m.stage == 0) {
        if (any_of(greens_) && !o.contains(GroundAtom("green", "o12"))) m.stage = 1;
      } else if (goal) {
        m.status = Status::Goal;
      }
      break;
    case TaskKind::BlueAllYellow7:
      if (m.stage == 0) {
        if (any_of(blues_)) m.stage = 1;
      } else if (m.stage == 1) {
        if (collect_yellows()) m.stage = 2;
      } else if (m.stage == 2) {
        if (o.contains(GroundAtom("purple", "o7"))) m.stage = 3;
      } else if (goal) {
        m.status = Status::Goal;
      }
      break;
  }
  return m.status;
}

bool Task::goal_predicate(const std::vector<Observation>& trace) const {
  Monitor m = start_monitor();
  for (const auto& o : trace)
    if (advance(m, o) != Status::Running) break;
  return m.status == Status::Goal;
}

bool Task::dead_predicate(const std::vector<Observation>& trace) const {
  Monitor m = start_monitor();
  for (const auto& o : trace)
    if (advance(m, o) != Status::Running) break;
  return m.status == Status::Dead;
}

Form Task::reference_machine() const {
  switch (kind_) {
    case TaskKind::AllYellow: return reference::all_yellow(sig_);
    case TaskKind::GreenButOneNoLava: return reference::green_but_one_no_lava(sig_);
    case TaskKind::BlueAllYellow7: return reference::blue_all_yellow_7(sig_);
  }
  throw Error("unknown task kind");
}

std::vector<std::string> task_names() {
  return {"all-yellow-2", "all-yellow-4", "all-yellow-6", "green-but-one-no-lava", "blue-allyellow-7"};
}

Task make_task(const std::string& name, const TaskOptions& opts) {
  static const std::map<std::string, std::tuple<TaskKind, int, bool>> catalog = {
      {"all-yellow-2", {TaskKind::AllYellow, 0, false}},
      {"all-yellow-4", {TaskKind::AllYellow, 2, false}},
      {"all-yellow-6", {TaskKind::AllYellow, 4, false}},
      {"green-but-one-no-lava", {TaskKind::GreenButOneNoLava, 0, true}},
      {"blue-allyellow-7", {TaskKind::BlueAllYellow7, 0, false}}};
  const auto it = catalog.find(name);
  if (it == catalog.end()) throw UnknownTask("unknown task '" + name + "'");
  const auto [kind, extra, lava] = it->second;
  GridLayout l = default_layout(extra, lava);
  if (opts.layout_seed) l = randomize_layout(l, *opts.layout_seed);
  return Task(name, kind, std::move(l), opts.max_steps);
}

EnvState reset(const Task& task) {
  EnvState st;
  st.agent = task.layout().start;
  st.monitor = task.start_monitor();
  return st;
}

Observation step(const Task& task, EnvState& st, Action a) {
  if (st.status != Status::Running) throw Error("step after the episode ended (" + status_name(st.status) + ")");
  st.agent = moved(task.layout(), st.agent, a);
  ++st.steps;
  const Observation& o = task.observation_at(st.agent);
  st.status = task.advance(st.monitor, o);
  if (st.status == Status::Running && st.steps >= task.max_steps()) st.status = Status::Timeout;
  return o;
}

TraceExample label_trace(const Task& task, const std::vector<Observation>& trace) {
  TraceExample t{trace, Label::Incomplete};
  Monitor m = task.start_monitor();
  for (const auto& o : trace)
    if (task.advance(m, o) != Status::Running) break;
  if (m.status == Status::Goal) t.label = Label::Goal;
  if (m.status == Status::Dead) t.label = Label::Dead;
  return t;
}

std::optional<std::vector<Action>> shortest_path(const Task& task, Cell a, Cell b) {
  const GridLayout& l = task.layout();
  std::map<Cell, std::pair<Cell, Action>> parent;
  std::deque<Cell> q{a};
  parent[a] = {a, Action::Up};
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop_front();
    if (c == b) break;
    for (int k = 0; k < kNumActions; ++k) {
      const Cell n = moved(l, c, static_cast<Action>(k));
      if ((task.is_lava(n) && n != b) || parent.count(n)) continue;
      parent[n] = {c, static_cast<Action>(k)};
      q.push_back(n);
    }
  }
  if (!parent.count(b)) return std::nullopt;
  std::vector<Action> path;
  for (Cell c = b; c != a; c = parent[c].first) path.push_back(parent[c].second);
  std::reverse(path.begin(), path.end());
  return path;
}

TraceExample random_walk(const Task& task, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> act(0, kNumActions - 1);
  EnvState st = reset(task);
  std::vector<Observation> trace;
  while (st.status == Status::Running) trace.push_back(step(task, st, static_cast<Action>(act(rng))));
  return label_trace(task, trace);
}

TraceExample guided_tour(const Task& task, std::mt19937_64& rng) {
  const auto& cps = task.layout().checkpoints;
  std::vector<Cell> stops;
  for (const auto& c : cps) stops.push_back(c.cell);
  std::shuffle(stops.begin(), stops.end(), rng);
  stops.resize(std::uniform_int_distribution<std::size_t>(0, stops.size())(rng));
  if (std::bernoulli_distribution(0.7)(rng)) stops.push_back(task.layout().goal);
  std::bernoulli_distribution noise(0.1);
  std::uniform_int_distribution<int> act(0, kNumActions - 1);
  EnvState st = reset(task);
  std::vector<Observation> trace;
  for (const Cell target : stops) {
    while (st.status == Status::Running && st.agent != target) {
      Action a = static_cast<Action>(act(rng));
      if (!noise(rng)) {
        const auto path = shortest_path(task, st.agent, target);
        if (!path) break;
        a = path->front();
      }
      trace.push_back(step(task, st, a));
    }
    if (st.status != Status::Running) break;
  }
  if (trace.empty()) trace.push_back(step(task, st, static_cast<Action>(act(rng))));
  return label_trace(task, trace);
}

std::vector<TraceExample> generate_traces(const Task& task, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TraceExample> out;
  for (int k = 0; k < count; ++k) out.push_back(k % 2 == 0 ? random_walk(task, rng) : guided_tour(task, rng));
  return out;
}

std::vector<TraceExample> balanced_traces(const Task& task, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Label> labels{Label::Goal, Label::Incomplete};
  if (!task.layout().lava.empty()) labels.push_back(Label::Dead);
  const std::size_t per = (count + labels.size() - 1) / labels.size();
  std::map<Label, std::vector<TraceExample>> bucket;
  for (long attempt = 0; attempt < 400L * count; ++attempt) {
    bool full = true;
    for (const Label l : labels) full = full && bucket[l].size() >= per;
    if (full) break;
    TraceExample t = attempt % 2 == 0 ? random_walk(task, rng) : guided_tour(task, rng);
    auto& b = bucket[t.label];
    if (b.size() < per) b.push_back(std::move(t));
  }
  std::vector<TraceExample> out;
  for (std::size_t k = 0; static_cast<int>(out.size()) < count; ++k) {
    bool any = false;
    for (const Label l : labels) {
      if (k < bucket[l].size() && static_cast<int>(out.size()) < count) {
        out.push_back(bucket[l][k]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

}  // namespace form::env
