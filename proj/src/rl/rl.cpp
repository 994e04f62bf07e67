#include "form/rl.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <cstdio>
#include <random>

namespace form::rl {

namespace {

void collect_forall(const Formula& f, std::set<std::string>& out) {
  switch (f.kind()) {
    case Formula::Kind::Ground: return;
    case Formula::Kind::Quantified:
      if (f.quantified_atom().quantifier == Quantifier::Forall) out.insert(f.quantified_atom().predicate);
      return;
    case Formula::Kind::Not: collect_forall(f.child(), out); return;
    case Formula::Kind::And:
    case Formula::Kind::Or:
      collect_forall(f.left(), out);
      collect_forall(f.right(), out);
      return;
  }
}

}  // namespace

std::vector<GroundAtom> universal_atoms(const Form& form, StateId u) {
  std::set<std::string> preds;
  for (const std::size_t e : form.outgoing(u)) collect_forall(form.edges()[e].formula, preds);
  std::vector<GroundAtom> out;
  for (const auto& a : form.signature().herbrand_base())
    if (!a.is_proposition() && preds.count(a.predicate)) out.push_back(a);
  return out;
}

ExtendedState extended_state(const Form& form, StateId u, int cell, const Buffer& buffer) {
  ExtendedState s{cell, {}};
  for (const auto& a : universal_atoms(form, u)) s.indicators.push_back(buffer.seen(a) ? 1 : 0);
  return s;
}

std::vector<std::pair<StateId, double>> split_reward(double r, const std::vector<StateId>& visited,
                                                     const Form& form) {
  std::vector<StateId> who;
  for (const StateId u : visited)
    if (!form.is_terminal(u) && std::find(who.begin(), who.end(), u) == who.end()) who.push_back(u);
  std::vector<std::pair<StateId, double>> out;
  if (who.empty()) return out;
  const double share = r / static_cast<double>(who.size());
  double given = 0.0;
  for (std::size_t k = 0; k + 1 < who.size(); ++k) {
    out.emplace_back(who[k], share);
    given += share;
  }
  out.emplace_back(who.back(), r - given);
  return out;
}

AgentTeam::AgentTeam(Form machine, int num_cells) : machine_(std::move(machine)), num_cells_(num_cells) {
  agents_.resize(machine_.num_states());
  for (StateId u = 0; u < static_cast<StateId>(machine_.num_states()); ++u) {
    if (machine_.is_terminal(u)) continue;
    Agent& a = agents_[u];
    a.g = universal_atoms(machine_, u);
    if (a.g.size() > 20) throw Error("too many indicator atoms for state " + machine_.name(u));
    a.rows = static_cast<std::size_t>(num_cells) << a.g.size();
    a.q.assign(a.rows * env::kNumActions, 0.0);
  }
}

std::size_t AgentTeam::row(StateId u, int cell, const Buffer& buffer) const {
  const Agent& a = agents_.at(u);
  std::size_t bits = 0;
  for (std::size_t k = 0; k < a.g.size(); ++k)
    if (buffer.seen(a.g[k])) bits |= std::size_t{1} << k;
  return (static_cast<std::size_t>(cell) << a.g.size()) | bits;
}

void AgentTeam::set_table(StateId u, std::vector<double> values) {
  Agent& a = agents_.at(u);
  if (values.size() != a.q.size()) throw Error("table shape mismatch for state " + machine_.name(u));
  a.q = std::move(values);
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::Fixed: return "fixed";
    case Mode::LearnForm: return "learn-form";
    case Mode::LearnProp: return "learn-prop";
    case Mode::NoMachine: return "no-machine";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  for (const Mode m : {Mode::Fixed, Mode::LearnForm, Mode::LearnProp, Mode::NoMachine})
    if (mode_name(m) == s) return m;
  throw Error("unknown mode '" + s + "'");
}

namespace {

// A transition that ended its agent's turn; updated once the episode's
// reward split is known. Bootstraps from the next agent unless the episode
// ended there.
struct Pending {
  StateId u;
  std::size_t row;
  int action;
  double shaping;
  StateId next;  // -1: no bootstrap
  std::size_t next_row;
};

class Runner {
 public:
  Runner(const env::Task& task, Mode mode, const RLConfig& cfg, AgentTeam team, CounterexampleLoop* loop)
      : task_(task), mode_(mode), cfg_(cfg), rng_(cfg.seed), team_(std::move(team)), loop_(loop) {
    if (cfg.alpha <= 0 || cfg.alpha > 1 || cfg.gamma < 0 || cfg.gamma >= 1 || cfg.eps_start < 0 ||
        cfg.eps_start > 1 || cfg.eps_end < 0 || cfg.eps_end > 1 || cfg.episodes < 1 || cfg.window < 1 ||
        cfg.iteration_episodes < 1)
      throw Error("invalid RL configuration");
    set_machine_derived();
    result_.machines.push_back(team_.machine());
  }

  TrainResult run() {
    std::deque<char> window;
    int successes = 0;
    double block_return = 0.0, block_learner_ms = 0.0;
    bool block_timeout = false;
    long block_n = 0;
    auto flush = [&] {
      IterationMetrics m;
      m.iteration = static_cast<int>(result_.metrics.size());
      m.episodes = result_.episodes_run;
      m.mean_return = block_return / static_cast<double>(block_n);
      m.success_rate = window.empty() ? 0.0 : static_cast<double>(successes) / static_cast<double>(window.size());
      m.machine_version = version_;
      m.learner_time_ms = block_learner_ms;
      m.learner_timeout = block_timeout;
      result_.metrics.push_back(m);
      block_return = block_learner_ms = 0.0;
      block_timeout = false;
      block_n = 0;
    };
    for (long ep = 0; ep < cfg_.episodes; ++ep) {
      const auto [success, ret] = episode(epsilon(ep));
      ++result_.episodes_run;
      block_return += ret;
      ++block_n;
      window.push_back(success ? 1 : 0);
      successes += success ? 1 : 0;
      if (static_cast<int>(window.size()) > cfg_.window) {
        successes -= window.front();
        window.pop_front();
      }
      if (update_) {
        block_learner_ms += update_->learner_ms;
        if (update_->status == LearnStatus::Timeout) {
          block_timeout = true;
          ++result_.learner_timeouts;
        }
        update_.reset();
      }
      const double rate = static_cast<double>(successes) / static_cast<double>(window.size());
      const bool full = static_cast<int>(window.size()) == cfg_.window;
      bool stop = false;
      if (full) {
        result_.best_success = std::max(result_.best_success, rate);
        if (!result_.episodes_to_target && rate >= cfg_.target_success) {
          result_.episodes_to_target = ep + 1;
          stop = cfg_.stop_at_target;
        }
        if (cfg_.early_stop.enabled && result_.best_success >= cfg_.early_stop.crossing &&
            rate < result_.best_success - cfg_.early_stop.drop) {
          stop = true;
          result_.stopped_early = true;
        }
      }
      result_.final_success = rate;
      if (block_n == cfg_.iteration_episodes || stop) flush();
      if (stop) break;
    }
    if (block_n > 0) flush();
    result_.team = std::move(team_);
    return std::move(result_);
  }

 private:
  bool use_machine() const { return mode_ != Mode::NoMachine; }

  void set_machine_derived() {
    const Form& m = team_.machine();
    phi_ = potentials(m);
    shaping_on_ = cfg_.shaping && use_machine() && !(loop_ && loop_->is_dummy());
  }

  double epsilon(long ep) const {
    const double span = cfg_.eps_decay_fraction * static_cast<double>(cfg_.episodes);
    const double frac = span <= 0 ? 1.0 : std::min(1.0, static_cast<double>(ep) / span);
    return cfg_.eps_start + (cfg_.eps_end - cfg_.eps_start) * frac;
  }

  int greedy(StateId u, std::size_t row) {
    double best = team_.q(u, row, 0);
    int ties[env::kNumActions] = {0};
    int n = 1;
    for (int a = 1; a < env::kNumActions; ++a) {
      const double v = team_.q(u, row, a);
      if (v > best) {
        best = v;
        n = 0;
      }
      if (v == best) ties[n++] = a;
    }
    return n == 1 ? ties[0] : ties[std::uniform_int_distribution<int>(0, n - 1)(rng_)];
  }

  int select(StateId u, std::size_t row, double eps) {
    if (!team_.frozen(u) && std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < eps)
      return std::uniform_int_distribution<int>(0, env::kNumActions - 1)(rng_);
    return greedy(u, row);
  }

  double max_q(StateId u, std::size_t row) const {
    double best = team_.q(u, row, 0);
    for (int a = 1; a < env::kNumActions; ++a) best = std::max(best, team_.q(u, row, a));
    return best;
  }

  int cell_of(env::Cell c) const { return c.y * task_.layout().width + c.x; }

  // (success, discounted return)
  std::pair<bool, double> episode(double eps) {
    const Form& form = team_.machine();
    env::EnvState es = env::reset(task_);
    RunState rs = start(form);
    StateId u = rs.current;
    std::vector<Pending> pending;
    std::vector<Observation> trace;
    const double a_ = cfg_.alpha, g = cfg_.gamma;
    while (es.status == env::Status::Running) {
      const std::size_t row = team_.row(u, cell_of(es.agent), rs.buffer);
      const int a = select(u, row, eps);
      const Observation& obs = env::step(task_, es, static_cast<env::Action>(a));
      if (loop_) trace.push_back(obs);
      StateId next = u;
      if (use_machine()) {
        step(form, rs, obs);
        ++result_.machine_steps;
        next = rs.current;
      }
      const double f = shaping_on_ ? g * phi_[next] - phi_[u] : 0.0;
      const bool env_end = es.status == env::Status::Goal || es.status == env::Status::Dead;
      if (next != u || env_end) {
        const bool boot = !env_end && !form.is_terminal(next);
        pending.push_back({u, row, a, f, boot ? next : -1,
                           boot ? team_.row(next, cell_of(es.agent), rs.buffer) : 0});
      } else if (!team_.frozen(u)) {
        const std::size_t row2 = team_.row(u, cell_of(es.agent), rs.buffer);
        double& q = team_.q(u, row, a);
        q += a_ * (f + g * max_q(u, row2) - q);
      }
      u = next;
      if (use_machine() && form.is_terminal(u)) break;  // nothing left to act for
    }
    const bool success = es.status == env::Status::Goal;
    const double r = success ? 1.0 : 0.0;
    const auto shares = split_reward(r, use_machine() ? rs.visited : std::vector<StateId>{form.initial()}, form);
    double total = 0.0;
    for (const auto& [who, s] : shares) total += s;
    if (total != r && !shares.empty()) ++result_.conservation_failures;
    for (const Pending& p : pending) {
      if (team_.frozen(p.u)) continue;
      double share = 0.0;
      for (const auto& [who, s] : shares)
        if (who == p.u) share = s;
      double& q = team_.q(p.u, p.row, p.action);
      const double boot = p.next >= 0 ? g * max_q(p.next, p.next_row) : 0.0;
      q += a_ * (p.shaping + share + boot - q);
    }
    if (loop_) {
      auto upd = loop_->observe(env::label_trace(task_, trace));
      if (upd) {
        update_ = upd;
        if (loop_->version() != version_) {
          version_ = loop_->version();
          team_ = AgentTeam(loop_->machine(), team_.num_cells());
          result_.machines.push_back(team_.machine());
          set_machine_derived();
        }
      }
    }
    const double ret = success ? std::pow(g, static_cast<double>(es.steps - 1)) : 0.0;
    return {success, ret};
  }

  const env::Task& task_;
  Mode mode_;
  RLConfig cfg_;
  std::mt19937_64 rng_;
  AgentTeam team_;
  CounterexampleLoop* loop_;
  std::vector<double> phi_;
  bool shaping_on_ = false;
  int version_ = 0;
  std::optional<CounterexampleLoop::Update> update_;
  TrainResult result_;
};

int cells(const env::Task& t) { return t.layout().width * t.layout().height; }

}  // namespace

TrainResult train(const env::Task& task, Mode mode, const RLConfig& cfg, const std::optional<Form>& machine,
                  const SearchConfig& search) {
  switch (mode) {
    case Mode::Fixed: {
      if (!machine) throw Error("fixed mode needs a machine");
      const Form m = machine->with_signature(task.signature());
      if (!validate(m).empty()) throw Error("fixed machine does not validate");
      return Runner(task, mode, cfg, AgentTeam(m, cells(task)), nullptr).run();
    }
    case Mode::NoMachine:
      return Runner(task, mode, cfg, AgentTeam(dummy_form(task.signature()), cells(task)), nullptr).run();
    case Mode::LearnForm:
    case Mode::LearnProp: {
      SearchConfig sc = search;
      sc.mode = mode == Mode::LearnForm ? LearnMode::FirstOrder : LearnMode::Propositional;
      CounterexampleLoop loop(task.signature(), sc);
      return Runner(task, mode, cfg, AgentTeam(loop.machine(), cells(task)), &loop).run();
    }
  }
  throw Error("unknown mode");
}

TrainResult transfer(const AgentTeam& team, const env::Task& task, const std::set<std::string>& retrain,
                     const RLConfig& cfg) {
  for (const auto& name : retrain) team.machine().id(name);  // throws on unknown names
  if (team.num_cells() != cells(task)) throw Error("transfer between different grid sizes");
  const Form m = team.machine().with_signature(task.signature());
  if (!validate(m).empty()) throw Error("machine is not valid over the new signature");
  AgentTeam next(m, cells(task));
  for (StateId u = 0; u < static_cast<StateId>(m.num_states()); ++u) {
    if (!next.has_agent(u)) continue;
    const bool same = team.table(u).size() == next.table(u).size();
    if (same) next.set_table(u, team.table(u));
    if (!retrain.count(m.name(u))) {
      if (!same) throw Error("frozen state " + m.name(u) + " changes its state space under the new task");
      next.freeze(u);
    }
  }
  return Runner(task, Mode::Fixed, cfg, std::move(next), nullptr).run();
}

void write_metrics_header(std::ostream& out) {
  out << "run_id,seed,iteration,episodes,mean_return,success_rate,machine_version,learner_time_ms,learner_timeout\n";
}

void write_metrics(std::ostream& out, const std::string& run_id, std::uint64_t seed,
                   const std::vector<IterationMetrics>& metrics) {
  char buf[256];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof buf, "%s,%llu,%d,%ld,%.17g,%.17g,%d,%.3f,%d\n", run_id.c_str(),
                  static_cast<unsigned long long>(seed), m.iteration, m.episodes, m.mean_return, m.success_rate,
                  m.machine_version, m.learner_time_ms, m.learner_timeout ? 1 : 0);
    out << buf;
  }
}

}  // namespace form::rl
