#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "form/rl.hpp"

using namespace form;
using namespace form::rl;

namespace {

GroundAtom at(const std::string& p, int k) { return {p, "o" + std::to_string(k)}; }

RLConfig small_config(long episodes, std::uint64_t seed) {
  RLConfig c;
  c.episodes = episodes;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(SplitReward, SharesVisitedNonTerminalStates) {
  const auto task = env::make_task("all-yellow-2");
  const Form m = task.reference_machine();
  const StateId u0 = m.id("u0"), u1 = m.id("u1"), acc = m.id("u_acc");
  const auto s = split_reward(1.0, {u0, u0, u1, acc}, m);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].first, u0);
  EXPECT_EQ(s[0].second, 0.5);
  EXPECT_EQ(s[1].first, u1);
  EXPECT_EQ(s[1].second, 0.5);
  EXPECT_TRUE(split_reward(1.0, {acc}, m).empty());
  const auto zero = split_reward(0.0, {u0}, m);
  ASSERT_EQ(zero.size(), 1u);
  EXPECT_EQ(zero[0].second, 0.0);
}

TEST(SplitReward, ConservesTaskRewardExactly) {
  // n' distinct non-terminal states on a chain machine.
  for (int n = 1; n <= 16; ++n) {
    Signature sig;
    sig.add_predicate("goal", 0);
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("u" + std::to_string(i));
    names.push_back("u_acc");
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) edges.push_back({i, i + 1, 0, parse_formula("goal", sig)});
    const Form m(sig, names, 0, n, std::nullopt, edges);
    std::vector<StateId> visited;
    for (int i = 0; i <= n; ++i) visited.push_back(i);
    for (const double r : {0.0, 1.0}) {
      const auto s = split_reward(r, visited, m);
      ASSERT_EQ(static_cast<int>(s.size()), n);
      double total = 0.0;
      for (const auto& [u, v] : s) total += v;
      EXPECT_EQ(total, r) << "n'=" << n;
    }
  }
}

TEST(ExtendedState, IndicatorsFollowUniversalAtoms) {
  const auto task = env::make_task("all-yellow-2");
  const Signature& sig = task.signature();
  const Form m(sig, {"u0", "u_acc"}, 0, 1, std::nullopt,
               {{0, 1, 0, parse_formula("forall X. blue(X) | red(o2)", sig)}});
  EXPECT_EQ(universal_atoms(m, 0), (std::vector<GroundAtom>{at("blue", 4), at("blue", 5)}));

  Buffer b({Observation({at("yellow", 0)}), Observation({at("blue", 4)})});
  const ExtendedState s = extended_state(m, 0, 9, b);
  EXPECT_EQ(s.cell, 9);
  EXPECT_EQ(s.indicators, (std::vector<char>{1, 0}));
  b.clear();
  EXPECT_EQ(extended_state(m, 0, 9, b).indicators, (std::vector<char>{0, 0}));

  const Form prop(sig, {"u0", "u_acc"}, 0, 1, std::nullopt, {{0, 1, 0, parse_formula("goal & red(o2)", sig)}});
  EXPECT_TRUE(extended_state(prop, 0, 3, b).indicators.empty());
  // Existentials carry no memory.
  const Form ex(sig, {"u0", "u_acc"}, 0, 1, std::nullopt, {{0, 1, 0, parse_formula("exists X. blue(X)", sig)}});
  EXPECT_TRUE(universal_atoms(ex, 0).empty());
}

TEST(AgentTeam, TableShapes) {
  const auto task = env::make_task("all-yellow-2");
  const Form m = task.reference_machine();
  AgentTeam team(m, 64);
  EXPECT_EQ(team.rows(m.id("u0")), 64u << 2);
  EXPECT_EQ(team.rows(m.id("u1")), 64u);
  EXPECT_FALSE(team.has_agent(m.id("u_acc")));
  EXPECT_EQ(team.table(m.id("u0")).size(), (64u << 2) * env::kNumActions);

  Buffer b({Observation({at("yellow", 1)})});
  EXPECT_EQ(team.row(m.id("u0"), 5, b), (5u << 2) | 2u);
  EXPECT_THROW(team.set_table(m.id("u1"), std::vector<double>(3)), Error);
}

TEST(Modes, NamesRoundTrip) {
  for (const Mode md : {Mode::Fixed, Mode::LearnForm, Mode::LearnProp, Mode::NoMachine})
    EXPECT_EQ(parse_mode(mode_name(md)), md);
  EXPECT_THROW(parse_mode("ppo"), Error);
}

TEST(Train, RejectsBadInput) {
  const auto task = env::make_task("all-yellow-2");
  EXPECT_THROW(train(task, Mode::Fixed, small_config(10, 0)), Error);
  RLConfig bad = small_config(10, 0);
  bad.gamma = 1.0;
  EXPECT_THROW(train(task, Mode::Fixed, bad, task.reference_machine()), Error);
  // Machine over symbols the task lacks.
  Signature other;
  other.add_predicate("goal", 0);
  other.add_predicate("lava", 0);
  const Form m(other, {"u0", "u_acc"}, 0, 1, std::nullopt, {{0, 1, 0, parse_formula("lava", other)}});
  EXPECT_ANY_THROW(train(task, Mode::Fixed, small_config(10, 0), m));
}

TEST(Train, FixedMachineSolvesAllYellow2) {
  const auto task = env::make_task("all-yellow-2");
  const auto r = train(task, Mode::Fixed, small_config(12000, 1), task.reference_machine());
  ASSERT_TRUE(r.episodes_to_target.has_value());
  EXPECT_GE(r.final_success, 0.9);
  EXPECT_EQ(r.conservation_failures, 0);
  EXPECT_EQ(r.episodes_run, 12000);
  EXPECT_EQ(r.metrics.size(), 120u);
  EXPECT_GT(r.machine_steps, 0);
  for (const auto& m : r.metrics) {
    EXPECT_GE(m.mean_return, 0.0);
    EXPECT_LE(m.mean_return, 1.0);
  }
}

TEST(Train, StopAtTargetAndEarlyStop) {
  const auto task = env::make_task("all-yellow-2");
  RLConfig c = small_config(12000, 1);
  c.stop_at_target = true;
  const auto r = train(task, Mode::Fixed, c, task.reference_machine());
  ASSERT_TRUE(r.episodes_to_target.has_value());
  EXPECT_EQ(r.episodes_run, *r.episodes_to_target);

  RLConfig e = small_config(5000, 2);
  e.early_stop = {true, 0.0, 0.0};
  const auto s = train(task, Mode::Fixed, e, task.reference_machine());
  EXPECT_TRUE(s.stopped_early);
  EXPECT_LT(s.episodes_run, 5000);
}

TEST(Train, SameSeedSameMetrics) {
  const auto task = env::make_task("all-yellow-2");
  for (const Mode md : {Mode::Fixed, Mode::LearnForm, Mode::NoMachine}) {
    auto run = [&](std::uint64_t seed) {
      return train(task, md, small_config(1500, seed),
                   md == Mode::Fixed ? std::optional<Form>(task.reference_machine()) : std::nullopt);
    };
    const auto a = run(7), b = run(7), c = run(8);
    ASSERT_EQ(a.metrics.size(), b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
      EXPECT_EQ(a.metrics[i].mean_return, b.metrics[i].mean_return);
      EXPECT_EQ(a.metrics[i].success_rate, b.metrics[i].success_rate);
      EXPECT_EQ(a.metrics[i].machine_version, b.metrics[i].machine_version);
      EXPECT_EQ(a.metrics[i].learner_timeout, b.metrics[i].learner_timeout);
    }
    EXPECT_EQ(a.machines, b.machines);
    bool differs = false;
    for (std::size_t i = 0; i < a.metrics.size(); ++i) differs |= a.metrics[i].mean_return != c.metrics[i].mean_return;
    EXPECT_TRUE(differs) << mode_name(md);
  }
}

TEST(Train, LearnedMachinesAreValidAndConsistent) {
  const auto task = env::make_task("all-yellow-2");
  const auto r = train(task, Mode::LearnForm, small_config(2000, 3));
  ASSERT_GE(r.machines.size(), 2u);
  for (const auto& m : r.machines) EXPECT_TRUE(validate(m).empty()) << to_text(m);
  EXPECT_EQ(r.conservation_failures, 0);
  EXPECT_EQ(r.metrics.back().machine_version, static_cast<int>(r.machines.size()) - 1);
}

TEST(Transfer, FrozenStatesAreNotUpdated) {
  const auto t2 = env::make_task("all-yellow-2");
  const auto t4 = env::make_task("all-yellow-4");
  const auto base = train(t2, Mode::Fixed, small_config(3000, 4), t2.reference_machine());
  const Form& m = base.team->machine();
  const auto r = transfer(*base.team, t4, {"u0"}, small_config(1000, 4));
  EXPECT_EQ(r.team->table(m.id("u1")), base.team->table(m.id("u1")));
  EXPECT_TRUE(r.team->frozen(m.id("u1")));
  EXPECT_FALSE(r.team->frozen(m.id("u0")));
  EXPECT_EQ(r.team->rows(m.id("u0")), 64u << 4);
  EXPECT_EQ(r.team->machine().signature(), t4.signature());
}

TEST(Transfer, Errors) {
  const auto t2 = env::make_task("all-yellow-2");
  const auto t4 = env::make_task("all-yellow-4");
  const auto base = train(t2, Mode::Fixed, small_config(50, 0), t2.reference_machine());
  EXPECT_THROW(transfer(*base.team, t4, {"nope"}, small_config(10, 0)), Error);
  // u0's indicator set grows, so it cannot stay frozen.
  EXPECT_THROW(transfer(*base.team, t4, {}, small_config(10, 0)), Error);
  // Same task: freezing everything is allowed and changes nothing.
  const auto same = transfer(*base.team, t2, {}, small_config(10, 0));
  EXPECT_EQ(same.team->table(0), base.team->table(0));
}

TEST(Metrics, CsvFormat) {
  std::ostringstream out;
  write_metrics_header(out);
  IterationMetrics m;
  m.iteration = 3;
  m.episodes = 400;
  m.mean_return = 0.1;
  m.success_rate = 0.25;
  m.machine_version = 2;
  m.learner_time_ms = 12.5;
  m.learner_timeout = true;
  write_metrics(out, "run", 9, {m});
  EXPECT_EQ(out.str(),
            "run_id,seed,iteration,episodes,mean_return,success_rate,machine_version,learner_time_ms,learner_timeout\n"
            "run,9,3,400,0.10000000000000001,0.25,2,12.500,1\n");
}
