#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "form/learner.hpp"
#include "learner_support.hpp"

using namespace form;
using form::testing::grid_signature;
using form::testing::random_tiny_instance;
using form::testing::small_signature;

namespace {

GroundAtom y(int k) { return {"yellow", "o" + std::to_string(k)}; }
GroundAtom b(int k) { return {"blue", "o" + std::to_string(k)}; }
GroundAtom pa(int k) { return {"p", "c" + std::to_string(k)}; }
const GroundAtom kGoal("goal");

TraceExample ex(Label l, std::vector<Observation> o) { return {std::move(o), l}; }

SearchConfig quick(LearnMode mode = LearnMode::FirstOrder) {
  SearchConfig c;
  c.mode = mode;
  c.time_budget = std::chrono::milliseconds(20000);
  return c;
}

}  // namespace

TEST(SpaceSize, Examples) {
  HypothesisSpace a{5, 2, 7, 0, LearnMode::Propositional};
  EXPECT_EQ(space_size(a), (SpaceSize{24, 336}));
  HypothesisSpace b{3, 1, 1, 0, LearnMode::Propositional};
  EXPECT_EQ(space_size(b), (SpaceSize{2, 4}));
}

TEST(SpaceSize, FirstOrderIncrementOnRandomTuples) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const int u = std::uniform_int_distribution<int>(3, 12)(rng);
    const int kappa = std::uniform_int_distribution<int>(1, 4)(rng);
    const std::size_t hb = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
    const std::size_t unary = std::uniform_int_distribution<std::size_t>(0, 8)(rng);
    const auto p = space_size({u, kappa, hb, unary, LearnMode::Propositional});
    const auto f = space_size({u, kappa, hb, unary, LearnMode::FirstOrder});
    EXPECT_EQ(p.edge_facts, static_cast<long long>((u - 2) * (u - 1) * kappa));
    EXPECT_EQ(f.edge_facts, p.edge_facts);
    EXPECT_EQ(f.rule_count - p.rule_count,
              static_cast<long long>(4 * unary) * (u - 2) * (u - 1) * kappa);
  }
}

TEST(SpaceSize, FirstOrderSmallerForBlueAllYellow) {
  const auto sig = grid_signature();
  const auto fo = space_size(hypothesis_space(sig, 5, 1, LearnMode::FirstOrder));
  const auto prop = space_size(hypothesis_space(sig, 7, 2, LearnMode::Propositional));
  EXPECT_LT(fo.rule_count, prop.rule_count);
}

TEST(LiteralPool, Sizes) {
  const auto sig = grid_signature();
  EXPECT_EQ(literal_pool(sig, LearnMode::Propositional).size(), 2 * sig.herbrand_base().size());
  EXPECT_EQ(literal_pool(sig, LearnMode::FirstOrder).size(), 2 * sig.herbrand_base().size() + 4 * 6);
}

TEST(Consistency, Examples) {
  const auto sig = grid_signature();
  const Form yellow_blue = reference::yellow_then_blue(sig);
  const auto good = ex(Label::Goal, {{y(0)}, {y(1)}, {b(4)}, {kGoal}});
  EXPECT_TRUE(consistent(yellow_blue, {good}));
  EXPECT_FALSE(consistent(yellow_blue, {ex(Label::Goal, {{kGoal}})}));
  EXPECT_TRUE(consistent(dummy_form(sig), {ex(Label::Incomplete, {{y(0)}, {kGoal}})}));

  EXPECT_TRUE(find_counterexample(dummy_form(sig), good));
  EXPECT_FALSE(find_counterexample(yellow_blue, ex(Label::Incomplete, {{y(0)}})));
  EXPECT_TRUE(find_counterexample(yellow_blue, ex(Label::Goal, {{y(0)}, {y(1)}, {kGoal}})));
  EXPECT_TRUE(find_counterexample(yellow_blue, ex(Label::Dead, {{y(0)}})));
}

TEST(TraceIo, RoundTrip) {
  const auto t = ex(Label::Goal, {{y(0)}, {}, {y(1), b(4)}, {kGoal}});
  const std::string line = trace_to_line(t);
  EXPECT_EQ(line, "GOAL;yellow(o0)||blue(o4),yellow(o1)|goal");
  EXPECT_EQ(trace_from_line(line), t);
  EXPECT_THROW(trace_from_line("WIN;goal"), ParseError);
  EXPECT_THROW(trace_from_line("GOAL"), ParseError);

  const auto path = std::filesystem::temp_directory_path() / "form_traces_test.txt";
  std::vector<TraceExample> all{t, ex(Label::Dead, {{GroundAtom("lava")}}), ex(Label::Incomplete, {{}})};
  write_traces(path.string(), all);
  EXPECT_EQ(read_traces(path.string()), all);
  std::filesystem::remove(path);
}

TEST(Learn, SingleGoalTrace) {
  const auto sig = grid_signature();
  const auto r = learn({ex(Label::Goal, {{kGoal}})}, sig, quick());
  ASSERT_EQ(r.status, LearnStatus::Ok);
  const Form& m = *r.machine;
  EXPECT_EQ(m.num_states(), 2u);
  ASSERT_EQ(m.edges().size(), 1u);
  EXPECT_EQ(format_formula(m.edges()[0].formula), "goal");
}

TEST(Learn, NeedsGoalExample) {
  const auto sig = grid_signature();
  EXPECT_THROW(learn({}, sig, quick()), std::invalid_argument);
  EXPECT_THROW(learn({ex(Label::Incomplete, {{kGoal}})}, sig, quick()), std::invalid_argument);
}

TEST(Learn, AllYellowNoWorseThanReference) {
  const auto sig = small_signature({2});
  std::vector<TraceExample> e{
      ex(Label::Goal, {{pa(0)}, {pa(1)}, {kGoal}}),     ex(Label::Goal, {{pa(1)}, {}, {pa(0)}, {kGoal}}),
      ex(Label::Incomplete, {{pa(0)}, {kGoal}}),        ex(Label::Incomplete, {{pa(1)}, {kGoal}}),
      ex(Label::Incomplete, {{kGoal}}),                 ex(Label::Incomplete, {{pa(0)}, {pa(1)}}),
      ex(Label::Goal, {{pa(0), pa(1)}, {kGoal}}),       ex(Label::Incomplete, {{pa(0)}, {pa(0)}, {kGoal}})};
  const auto r = learn(e, sig, quick());
  ASSERT_EQ(r.status, LearnStatus::Ok);
  EXPECT_TRUE(consistent(*r.machine, e));
  EXPECT_LE(r.machine->num_states(), 3u);
  bool uses_forall = false;
  for (const auto& edge : r.machine->edges())
    uses_forall = uses_forall || format_formula(edge.formula).find("forall") != std::string::npos;
  EXPECT_TRUE(uses_forall);
}

TEST(Learn, ContradictoryLabelsAreUnsat) {
  const auto sig = small_signature({2});
  const std::vector<Observation> t{{pa(0)}, {kGoal}};
  std::vector<TraceExample> e{ex(Label::Goal, t), ex(Label::Incomplete, t)};
  SearchConfig c = quick();
  c.max_states = 5;
  EXPECT_EQ(learn(e, sig, c).status, LearnStatus::Unsat);
  OracleBounds ob;
  ob.max_nonterminal_states = 2;
  EXPECT_FALSE(oracle_minimal(e, sig, ob).has_value());
}

TEST(Learn, RejectingStateOnlyWithDeadExamples) {
  const auto sig = small_signature({2}, true);
  const GroundAtom lava("lava");
  std::vector<TraceExample> e{ex(Label::Goal, {{pa(0)}, {kGoal}}), ex(Label::Dead, {{pa(1)}, {lava}}),
                              ex(Label::Incomplete, {{pa(1)}})};
  const auto r = learn(e, sig, quick());
  ASSERT_EQ(r.status, LearnStatus::Ok);
  EXPECT_TRUE(r.machine->rejecting().has_value());
  e.pop_back();
  e.erase(e.begin() + 1);
  const auto r2 = learn(e, sig, quick());
  ASSERT_EQ(r2.status, LearnStatus::Ok);
  EXPECT_FALSE(r2.machine->rejecting().has_value());
}

TEST(Learn, TimeoutIsReported) {
  std::mt19937_64 rng(3);
  const auto sig = grid_signature(true);
  std::vector<TraceExample> e;
  for (int k = 0; k < 200; ++k) {
    TraceExample t{form::testing::random_sequence(rng, sig, 12, 0.2), Label::Incomplete};
    t.label = k % 3 == 0 ? Label::Goal : (k % 3 == 1 ? Label::Dead : Label::Incomplete);
    e.push_back(std::move(t));
  }
  SearchConfig c = quick();
  c.time_budget = std::chrono::milliseconds(50);
  const auto r = learn(e, sig, c);
  EXPECT_NE(r.status, LearnStatus::Ok);
  EXPECT_FALSE(r.machine.has_value());
}

TEST(Oracle, EmptyExamplesGiveDummy) {
  const auto sig = small_signature({2});
  const auto m = oracle_minimal({}, sig, {});
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(*m, dummy_form(sig));
}

TEST(Oracle, RejectsLargeProblems) {
  EXPECT_THROW(oracle_minimal({}, grid_signature(), {}), Error);
  OracleBounds ob;
  ob.max_nonterminal_states = 4;
  EXPECT_THROW(oracle_minimal({}, small_signature({2}), ob), Error);
}

TEST(Learn, MinimalAgainstOracleOnTinyInstances) {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 30; ++k) {
    const auto inst = random_tiny_instance(rng);
    SearchConfig c = quick();
    c.max_states = 4;
    const auto r = learn(inst.examples, inst.sig, c);
    OracleBounds ob;
    ob.max_nonterminal_states = 2;
    const auto o = oracle_minimal(inst.examples, inst.sig, ob);
    ASSERT_TRUE(o.has_value()) << "instance " << k;
    ASSERT_EQ(r.status, LearnStatus::Ok) << "instance " << k;
    const auto cl = cost_of(*r.machine), co = cost_of(*o);
    EXPECT_EQ(cl.states, co.states) << "instance " << k;
    EXPECT_EQ(cl.literals, co.literals) << "instance " << k;
    EXPECT_EQ(cl.quantified, co.quantified) << "instance " << k;
    EXPECT_TRUE(validate(*r.machine).empty());
    EXPECT_TRUE(consistent(*r.machine, inst.examples));
    EXPECT_TRUE(consistent(*o, inst.examples));
  }
}

TEST(Learn, DeterministicOutput) {
  std::mt19937_64 rng(77);
  const auto inst = random_tiny_instance(rng);
  const auto a = learn(inst.examples, inst.sig, quick());
  const auto b2 = learn(inst.examples, inst.sig, quick());
  ASSERT_EQ(a.status, LearnStatus::Ok);
  EXPECT_EQ(*a.machine, *b2.machine);
}

TEST(ModeDominance, UniversalOverThreeInstances) {
  const auto sig = small_signature({3});
  const std::vector<int> perm0{0, 1, 2};
  std::vector<TraceExample> e;
  std::vector<int> perm = perm0;
  do {
    std::vector<Observation> t;
    for (int k : perm) t.push_back({pa(k)});
    t.push_back({kGoal});
    e.push_back(ex(Label::Goal, t));
    for (int drop = 0; drop < 3; ++drop) {
      std::vector<Observation> partial;
      for (int k : perm)
        if (k != drop) partial.push_back({pa(k)});
      partial.push_back({kGoal});
      e.push_back(ex(Label::Incomplete, partial));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  OracleBounds fo;
  fo.max_nonterminal_states = 3;
  OracleBounds prop = fo;
  prop.mode = LearnMode::Propositional;
  const auto mf = oracle_minimal(e, sig, fo);
  ASSERT_TRUE(mf.has_value());
  const auto mp = oracle_minimal(e, sig, prop);
  if (mp) {
    EXPECT_GT(mp->num_states(), mf->num_states());
  }
  const auto lf = learn(e, sig, quick());
  ASSERT_EQ(lf.status, LearnStatus::Ok);
  EXPECT_EQ(lf.machine->num_states(), mf->num_states());
  SearchConfig pc = quick(LearnMode::Propositional);
  pc.max_states = 6;
  const auto lp = learn(e, sig, pc);
  ASSERT_NE(lp.status, LearnStatus::Timeout);
  if (lp.status == LearnStatus::Ok) {
    EXPECT_GT(lp.machine->num_states(), lf.machine->num_states());
  }
}

TEST(CounterexampleLoop, IncompleteOnlyStaysDummy) {
  const auto sig = small_signature({2});
  CounterexampleLoop loop(sig, quick());
  for (int k = 0; k < 5; ++k) EXPECT_FALSE(loop.observe(ex(Label::Incomplete, {{pa(k % 2)}})).has_value());
  EXPECT_TRUE(loop.is_dummy());
  EXPECT_TRUE(loop.examples().empty());
}

TEST(CounterexampleLoop, ScriptedStream) {
  const auto sig = small_signature({2});
  CounterexampleLoop loop(sig, quick());
  const std::vector<TraceExample> stream{
      ex(Label::Incomplete, {{pa(0)}}),           ex(Label::Goal, {{pa(0)}, {pa(1)}, {kGoal}}),
      ex(Label::Incomplete, {{kGoal}}),           ex(Label::Incomplete, {{pa(1)}, {kGoal}}),
      ex(Label::Goal, {{pa(1)}, {pa(0)}, {kGoal}}), ex(Label::Incomplete, {{pa(0)}, {kGoal}}),
      ex(Label::Goal, {{pa(1)}, {pa(0)}, {kGoal}})};
  int updates = 0;
  for (const auto& t : stream) {
    const std::size_t before = loop.examples().size();
    const auto u = loop.observe(t);
    if (u) {
      ++updates;
      ASSERT_EQ(u->status, LearnStatus::Ok);
      EXPECT_EQ(u->trigger, t);
      EXPECT_EQ(loop.examples().size(), before + 1);
    }
    EXPECT_GE(loop.examples().size(), before);
    if (!loop.is_dummy()) {
      EXPECT_TRUE(consistent(loop.machine(), loop.examples()));
    }
  }
  EXPECT_EQ(loop.version(), updates);
  EXPECT_GE(updates, 1);
  EXPECT_FALSE(loop.observe(stream.back()).has_value());
}

TEST(Cost, Ordering) {
  const auto sig = grid_signature();
  const auto a = cost_of(reference::all_yellow(sig));
  const auto b3 = cost_of(reference::yellow_then_blue(sig));
  EXPECT_LT(a, b3);
  EXPECT_EQ(a.states, 3);
  EXPECT_EQ(a.literals, 2);
  EXPECT_EQ(a.quantified, 1);
}
