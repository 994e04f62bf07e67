#include "form/learner.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "search.hpp"

namespace form {

std::string label_name(Label l) {
  switch (l) {
    case Label::Goal: return "GOAL";
    case Label::Incomplete: return "INCOMPLETE";
    case Label::Dead: return "DEAD";
  }
  return "?";
}

Label parse_label(const std::string& s) {
  if (s == "GOAL") return Label::Goal;
  if (s == "INCOMPLETE") return Label::Incomplete;
  if (s == "DEAD") return Label::Dead;
  throw ParseError("unknown label '" + s + "'", 0);
}

std::string trace_to_line(const TraceExample& t) {
  std::string out = label_name(t.label) + ";";
  for (std::size_t i = 0; i < t.observations.size(); ++i) {
    if (i) out += '|';
    out += format_observation(t.observations[i]);
  }
  return out;
}

TraceExample trace_from_line(const std::string& line) {
  const auto semi = line.find(';');
  if (semi == std::string::npos) throw ParseError("missing ';' in trace line", 0);
  TraceExample t;
  t.label = parse_label(line.substr(0, semi));
  std::string_view rest(line);
  rest.remove_prefix(semi + 1);
  std::size_t pos = 0;
  while (true) {
    const auto bar = rest.find('|', pos);
    t.observations.push_back(parse_observation(rest.substr(pos, bar == std::string_view::npos ? bar : bar - pos)));
    if (bar == std::string_view::npos) break;
    pos = bar + 1;
  }
  return t;
}

std::vector<TraceExample> read_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file '" + path + "'");
  std::vector<TraceExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(trace_from_line(line));
  }
  return out;
}

void write_traces(const std::string& path, const std::vector<TraceExample>& traces) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace file '" + path + "'");
  for (const auto& t : traces) out << trace_to_line(t) << '\n';
}

HypothesisSpace hypothesis_space(const Signature& sig, int num_states, int kappa, LearnMode mode) {
  return {num_states, kappa, sig.herbrand_base().size(), sig.unary_predicates().size(), mode};
}

SpaceSize space_size(const HypothesisSpace& hs) {
  SpaceSize s;
  const long long u = hs.num_states;
  s.edge_facts = (u - 2) * (u - 1) * hs.kappa;
  long long per_slot = 2LL * static_cast<long long>(hs.herbrand_size);
  if (hs.mode == LearnMode::FirstOrder) per_slot += 4LL * static_cast<long long>(hs.unary_predicates);
  s.rule_count = s.edge_facts * per_slot;
  return s;
}

std::vector<Literal> literal_pool(const Signature& sig, LearnMode mode) {
  std::vector<Literal> out;
  for (const auto& a : sig.herbrand_base()) {
    out.push_back({true, a});
    out.push_back({false, a});
  }
  if (mode == LearnMode::FirstOrder) {
    for (const auto& p : sig.unary_predicates()) {
      for (const auto q : {Quantifier::Exists, Quantifier::Forall}) {
        out.push_back({true, QuantifiedAtom{q, p}});
        out.push_back({false, QuantifiedAtom{q, p}});
      }
    }
  }
  return out;
}

MachineCost cost_of(const Form& m) {
  MachineCost c;
  c.states = static_cast<int>(m.num_states());
  for (const auto& e : m.edges()) {
    const auto lits = literals_of(e.formula);
    if (!lits) throw Error("edge formula is not a conjunction of literals");
    c.literals += static_cast<int>(lits->size());
    for (const auto& l : *lits) c.quantified += std::holds_alternative<QuantifiedAtom>(l.atom) ? 1 : 0;
  }
  c.canonical = to_text(m);
  return c;
}

std::string status_name(LearnStatus s) {
  switch (s) {
    case LearnStatus::Ok: return "ok";
    case LearnStatus::Timeout: return "timeout";
    case LearnStatus::Unsat: return "unsat";
  }
  return "?";
}

bool accepts_example(const Form& m, const TraceExample& t) {
  StateId end = m.initial();
  if (!t.observations.empty()) end = run_trace(m, t.observations).final_state;
  const bool acc = end == m.accepting();
  const bool rej = m.rejecting() && end == *m.rejecting();
  switch (t.label) {
    case Label::Goal: return acc;
    case Label::Dead: return rej;
    case Label::Incomplete: return !acc && !rej;
  }
  return false;
}

bool consistent(const Form& m, const std::vector<TraceExample>& examples) {
  return std::all_of(examples.begin(), examples.end(),
                     [&](const TraceExample& t) { return accepts_example(m, t); });
}

bool find_counterexample(const Form& m, const TraceExample& t) { return !accepts_example(m, t); }

LearnResult learn(const std::vector<TraceExample>& examples, const Signature& sig,
                  const SearchConfig& cfg) {
  if (std::none_of(examples.begin(), examples.end(),
                   [](const TraceExample& t) { return t.label == Label::Goal; }))
    throw std::invalid_argument("learn needs at least one GOAL example");
  if (cfg.kappa < 1 || cfg.max_literals_per_edge < 1 || cfg.max_states < 2)
    throw std::invalid_argument("invalid search configuration");

  const auto t0 = std::chrono::steady_clock::now();
  LearnResult res;
  auto finish = [&](LearnStatus st) {
    res.status = st;
    res.stats.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return res;
  };
  for (const auto& t : examples)
    if (t.observations.empty() && t.label != Label::Incomplete) return finish(LearnStatus::Unsat);

  detail::Searcher searcher(sig, cfg, examples, t0 + cfg.time_budget);
  const int has_rej = searcher.has_reject() ? 1 : 0;

  // Counterexample-guided: solve on a working set, then add the shortest
  // example the candidate gets wrong.
  std::vector<int> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return examples[a].observations.size() < examples[b].observations.size();
  });
  std::vector<int> subset;
  for (int idx : order)
    if (examples[idx].label == Label::Goal) {
      subset.push_back(idx);
      break;
    }

  int n = 2 + has_rej;
  try {
    while (true) {
      ++res.stats.rounds;
      std::optional<detail::Solution> sol;
      while (n <= cfg.max_states && !(sol = searcher.solve(subset, n))) ++n;
      res.stats.nodes = searcher.nodes();
      if (!sol) return finish(LearnStatus::Unsat);
      Form m = searcher.build(*sol, n);
      int bad = -1;
      for (int idx : order)
        if (!accepts_example(m, examples[idx])) {
          bad = idx;
          break;
        }
      if (bad < 0) {
        if (!validate(m).empty() || !consistent(m, examples))
          throw std::logic_error("learner produced an invalid machine");
        res.machine = std::move(m);
        res.stats.examples_used = static_cast<int>(subset.size());
        return finish(LearnStatus::Ok);
      }
      subset.push_back(bad);
      std::sort(subset.begin(), subset.end());
    }
  } catch (const detail::SearchTimeout&) {
    res.stats.nodes = searcher.nodes();
    res.stats.examples_used = static_cast<int>(subset.size());
    return finish(LearnStatus::Timeout);
  }
}

CounterexampleLoop::CounterexampleLoop(Signature sig, SearchConfig cfg)
    : sig_(std::move(sig)), cfg_(cfg), machine_(dummy_form(sig_)) {}

std::optional<CounterexampleLoop::Update> CounterexampleLoop::observe(const TraceExample& t) {
  if (!find_counterexample(machine_, t)) return std::nullopt;
  examples_.push_back(t);
  if (std::none_of(examples_.begin(), examples_.end(),
                   [](const TraceExample& e) { return e.label == Label::Goal; }))
    return std::nullopt;
  auto r = learn(examples_, sig_, cfg_);
  Update u{r.status, r.stats.elapsed_ms, t};
  if (r.status == LearnStatus::Ok) {
    machine_ = std::move(*r.machine);
    ++version_;
  }
  return u;
}

}  // namespace form
