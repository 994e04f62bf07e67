#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "form/machine.hpp"
#include "test_support.hpp"

using namespace form;
using form::testing::grid_signature;
using form::testing::random_conjunction;
using form::testing::random_sequence;
using form::testing::small_signature;

namespace {

Observation obs(std::initializer_list<GroundAtom> atoms) { return Observation(atoms); }
GroundAtom y(int k) { return {"yellow", "o" + std::to_string(k)}; }
GroundAtom blue(int k) { return {"blue", "o" + std::to_string(k)}; }
const GroundAtom kGoal("goal");

// Random machine over u0..u{k-1}, u_acc, optional u_rej; edges are only kept
// when exclusive with the edges already leaving the same state.
Form random_valid_machine(std::mt19937_64& rng, const Signature& sig, bool quantifiers) {
  std::uniform_int_distribution<int> nint(1, 3);
  const int k = nint(rng);
  const bool rej = std::bernoulli_distribution(0.5)(rng);
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back("u" + std::to_string(i));
  names.push_back("u_acc");
  if (rej) names.push_back("u_rej");
  const int n = static_cast<int>(names.size());
  std::vector<Edge> edges;
  std::uniform_int_distribution<int> tries(1, 6);
  const int attempts = tries(rng);
  for (int a = 0; a < attempts; ++a) {
    const int from = std::uniform_int_distribution<int>(0, k - 1)(rng);
    int to = std::uniform_int_distribution<int>(0, n - 1)(rng);
    if (to == from) continue;
    auto lits = random_conjunction(rng, sig, 2);
    if (!quantifiers)
      for (auto& l : lits)
        if (l.is_quantified()) l.atom = sig.herbrand_base().front();
    if (!conjunction_satisfiable(lits, sig)) continue;
    const Formula f = conjunction_of(lits);
    bool ok = true;
    int index = 0;
    for (const auto& e : edges) {
      if (e.from != from) continue;
      if (e.to == to) index = std::max(index, e.index + 1);
      else if (!mutually_exclusive(e.formula, f, sig)) ok = false;
    }
    if (ok) edges.push_back({from, to, index, f});
  }
  return Form(sig, names, 0, k, rej ? std::optional<StateId>(k + 1) : std::nullopt, edges);
}

}  // namespace

TEST(Step, Fig2bExamples) {
  const Signature sig = grid_signature();
  const Form m = reference::yellow_then_blue(sig);
  RunState rs = start(m);
  step(m, rs, obs({y(0)}));
  const StepResult r = step(m, rs, obs({y(1)}));
  EXPECT_TRUE(r.transitioned);
  EXPECT_EQ(m.name(r.next_state), "u1");
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_TRUE(rs.buffer.empty());

  rs.current = m.id("u2");
  const StepResult acc = step(m, rs, obs({kGoal}));
  EXPECT_EQ(acc.next_state, m.accepting());
  EXPECT_EQ(acc.reward, 1.0);

  RunState fresh = start(m);
  const StepResult stay = step(m, fresh, Observation{});
  EXPECT_FALSE(stay.transitioned);
  EXPECT_EQ(stay.next_state, m.initial());
  EXPECT_EQ(fresh.buffer.length(), 1u);
  EXPECT_THROW(step(m, rs, obs({kGoal})), Error);  // rs is at u_acc
}

TEST(Step, DeterminismViolationIsLoud) {
  const Signature sig = grid_signature();
  const Form bad(sig, {"u0", "u1", "u2", "u_acc"}, 0, 3, std::nullopt,
                 {{0, 1, 0, Formula::exists("blue")}, {0, 2, 0, Formula::atom(kGoal)}});
  RunState rs = start(bad);
  EXPECT_THROW(step(bad, rs, obs({blue(4), kGoal})), DeterminismError);
  ASSERT_EQ(validate(bad).size(), 1u);
  EXPECT_EQ(validate(bad)[0].kind, Violation::Kind::Determinism);
}

TEST(RunTrace, Examples) {
  const Signature sig = grid_signature();
  const Form m = reference::yellow_then_blue(sig);
  const auto r = run_trace(m, {obs({y(0)}), obs({y(1)}), obs({blue(4)}), obs({kGoal})});
  EXPECT_EQ(r.final_state, m.accepting());
  EXPECT_EQ(r.total_reward, 1.0);
  EXPECT_EQ(r.states.size(), 5u);
  const auto g = run_trace(m, {obs({kGoal})});
  EXPECT_EQ(g.final_state, m.initial());
  EXPECT_EQ(g.total_reward, 0.0);

  const Signature lava_sig = grid_signature(true);
  const Form t2 = reference::green_but_one_no_lava(lava_sig);
  const auto d = run_trace(t2, {obs({GroundAtom("lava")})});
  EXPECT_EQ(d.final_state, *t2.rejecting());
  EXPECT_EQ(d.total_reward, 0.0);
  EXPECT_THROW(run_trace(m, {}), Error);
}

TEST(Validate, Examples) {
  const Signature sig = grid_signature(true);
  EXPECT_TRUE(validate(reference::yellow_then_blue(sig)).empty());
  EXPECT_TRUE(validate(reference::all_yellow(sig)).empty());
  EXPECT_TRUE(validate(reference::green_but_one_no_lava(sig)).empty());
  EXPECT_TRUE(validate(reference::blue_all_yellow_7(sig)).empty());
  const Form out_of_acc(sig, {"u0", "u_acc"}, 0, 1, std::nullopt,
                        {{0, 1, 0, Formula::atom(kGoal)}, {1, 0, 0, Formula::atom(kGoal)}});
  const auto v = validate(out_of_acc);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::Structure);
  const Form loop(sig, {"u0", "u_acc"}, 0, 1, std::nullopt, {{0, 0, 0, Formula::atom(kGoal)}});
  EXPECT_EQ(validate(loop).size(), 1u);
  const Form unknown(sig, {"u0", "u_acc"}, 0, 1, std::nullopt,
                     {{0, 1, 0, Formula::atom(GroundAtom("pink", "o1"))}});
  ASSERT_EQ(validate(unknown).size(), 1u);
  EXPECT_EQ(validate(unknown)[0].kind, Violation::Kind::Symbol);
}

TEST(Potential, Examples) {
  const Signature sig = grid_signature(true);
  const Form m = reference::yellow_then_blue(sig);
  EXPECT_EQ(potential(m, m.accepting()), 0.0);
  EXPECT_EQ(potential(m, m.id("u2")), -1.0);
  EXPECT_EQ(potential(m, m.initial()), -3.0);
  const Form single(sig, {"u"}, 0, 0, std::nullopt, {});
  EXPECT_EQ(potential(single, 0), 0.0);
  const Form t2 = reference::green_but_one_no_lava(sig);
  EXPECT_EQ(potential(t2, *t2.rejecting()), -4.0);
}

TEST(Dot, Fig2bStructure) {
  const Form m = reference::yellow_then_blue(grid_signature());
  const std::string dot = to_dot(m);
  std::size_t arrows = 0, labels = 0;
  for (std::size_t p = dot.find("->"); p != std::string::npos; p = dot.find("->", p + 1)) ++arrows;
  for (std::size_t p = dot.find("label="); p != std::string::npos; p = dot.find("label=", p + 1))
    ++labels;
  EXPECT_EQ(arrows, 4u);  // three edges plus the start marker
  EXPECT_EQ(labels, 3u);
  EXPECT_NE(dot.find("label=\"forall X. yellow(X)\""), std::string::npos);
  for (const char* s : {"\"u0\"", "\"u1\"", "\"u2\"", "\"u_acc\" [shape=doublecircle]"})
    EXPECT_NE(dot.find(s), std::string::npos) << s;
}

TEST(MachineText, RoundTrips) {
  const Signature sig = grid_signature(true);
  const Form dummy = dummy_form(sig);
  EXPECT_EQ(from_text(to_text(dummy)), dummy);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Form m = random_valid_machine(rng, sig, true);
    ASSERT_TRUE(validate(m).empty());
    ASSERT_EQ(from_text(to_text(m)), m) << to_text(m);
  }
  const auto path = std::filesystem::temp_directory_path() / "form_machine_roundtrip.txt";
  const Form ref = reference::green_but_one_no_lava(sig);
  to_file(ref, path.string());
  EXPECT_EQ(from_file(path.string()), ref);
  std::filesystem::remove(path);
}

TEST(MachineText, Errors) {
  EXPECT_THROW(from_text("state u0 initial\nedge u0 u1 0 \"goal\"\n"), Error);
  EXPECT_THROW(from_text("state u0\nstate u1 accepting\n"), Error);
  EXPECT_THROW(from_text("state u0 initial\nstate a accepting\nedge u0 a 0 \"goal &\"\n"), Error);
  EXPECT_THROW(from_text("bogus line\n"), Error);
  EXPECT_THROW(from_file("/nonexistent/machine.txt"), Error);
}

TEST(MachineProperties, BufferResetAndRewardConservation) {
  const Signature sig = small_signature({2, 2, 1}, true);
  std::mt19937_64 rng(29);
  for (int i = 0; i < 300; ++i) {
    const Form m = random_valid_machine(rng, sig, true);
    for (int t = 0; t < 10; ++t) {
      const auto trace = random_sequence(rng, sig, 12, 0.25);
      RunState rs = start(m);
      double total = 0.0;
      for (const auto& o : trace) {
        if (m.is_terminal(rs.current)) break;
        const auto r = step(m, rs, o);
        total += r.reward;
        if (r.transitioned) {
          EXPECT_EQ(rs.buffer.length(), 0u);
        }
        EXPECT_EQ(r.reward == 1.0, r.transitioned && r.next_state == m.accepting());
      }
      const auto run = run_trace(m, trace);
      EXPECT_EQ(run.total_reward, total);
      EXPECT_TRUE(run.total_reward == 0.0 || run.total_reward == 1.0);
      EXPECT_EQ(run.total_reward == 1.0, run.final_state == m.accepting());
    }
  }
}

TEST(MachineProperties, PropositionalMachinesIgnoreTheBuffer) {
  const Signature sig = small_signature({2, 1}, true);
  std::mt19937_64 rng(31);
  for (int i = 0; i < 200; ++i) {
    const Form m = random_valid_machine(rng, sig, false);
    for (int t = 0; t < 10; ++t) {
      const auto trace = random_sequence(rng, sig, 10, 0.3);
      // Observation-at-a-time transition function with no memory.
      std::vector<StateId> direct{m.initial()};
      StateId u = m.initial();
      for (const auto& o : trace) {
        if (m.is_terminal(u)) break;
        const Buffer single({o});
        for (const std::size_t e : m.outgoing(u))
          if (satisfies(single, m.edges()[e].formula, sig)) {
            u = m.edges()[e].to;
            break;
          }
        direct.push_back(u);
      }
      EXPECT_EQ(run_trace(m, trace).states, direct);
    }
  }
}

TEST(MachineProperties, ShapedReturnPrefersAcceptingRuns) {
  const double gamma = 0.999;
  const Signature sig = grid_signature(true);
  for (const Form& m : {reference::all_yellow(sig), reference::yellow_then_blue(sig),
                        reference::green_but_one_no_lava(sig), reference::blue_all_yellow_7(sig)}) {
    const auto phi = potentials(m);
    // Shaped return of a state path with one step per entry.
    auto shaped = [&](const std::vector<StateId>& path, double reward) {
      double g = 0.0, disc = 1.0;
      for (std::size_t t = 0; t + 1 < path.size(); ++t) {
        const double r = (t + 2 == path.size()) ? reward : 0.0;
        g += disc * (r + gamma * phi[path[t + 1]] - phi[path[t]]);
        disc *= gamma;
      }
      return g;
    };
    std::mt19937_64 rng(37);
    for (int i = 0; i < 200; ++i) {
      // Chain through every non-terminal state in id order with random dwell times.
      std::vector<StateId> path;
      std::uniform_int_distribution<int> dwell(1, 60);
      for (StateId u = 0; u < m.accepting(); ++u)
        for (int k = dwell(rng); k > 0; --k) path.push_back(u);
      std::vector<StateId> failed = path;
      path.push_back(m.accepting());
      failed.resize(std::min<std::size_t>(failed.size() + dwell(rng), 300), failed.back());
      const double acc = shaped(path, 1.0);
      EXPECT_NEAR(acc - 1.0 * std::pow(gamma, path.size() - 2),
                  std::pow(gamma, path.size() - 1) * phi[m.accepting()] - phi[m.initial()], 1e-9);
      EXPECT_GT(acc, shaped(failed, 0.0));
    }
  }
}
