// Learning minimal deterministic machines from labelled traces.
#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "form/logic.hpp"
#include "form/machine.hpp"

namespace form {

enum class Label { Goal, Incomplete, Dead };

std::string label_name(Label l);  // GOAL / INCOMPLETE / DEAD
Label parse_label(const std::string& s);

struct TraceExample {
  std::vector<Observation> observations;
  Label label = Label::Incomplete;
  bool operator==(const TraceExample&) const = default;
};

// One trace per line: LABEL;obs|obs|... with comma-separated atoms per obs.
std::string trace_to_line(const TraceExample& t);
TraceExample trace_from_line(const std::string& line);
std::vector<TraceExample> read_traces(const std::string& path);
void write_traces(const std::string& path, const std::vector<TraceExample>& traces);

enum class LearnMode { Propositional, FirstOrder };

struct HypothesisSpace {
  int num_states = 3;
  int kappa = 1;
  std::size_t herbrand_size = 0;
  std::size_t unary_predicates = 0;
  LearnMode mode = LearnMode::FirstOrder;
};

HypothesisSpace hypothesis_space(const Signature& sig, int num_states, int kappa, LearnMode mode);

struct SpaceSize {
  long long edge_facts = 0;
  long long rule_count = 0;
  bool operator==(const SpaceSize&) const = default;
};

SpaceSize space_size(const HypothesisSpace& hs);

// obs(a), !obs(a) for every atom; first-order mode adds exists/forall and
// their negations for every unary predicate.
std::vector<Literal> literal_pool(const Signature& sig, LearnMode mode);

struct SearchConfig {
  LearnMode mode = LearnMode::FirstOrder;
  int max_states = 8;
  int kappa = 1;
  int max_literals_per_edge = 2;
  std::chrono::milliseconds time_budget{60000};
};

// Ordered lexicographically: states, literals, quantified literals, text.
struct MachineCost {
  int states = 0;
  int literals = 0;
  int quantified = 0;
  std::string canonical;
  auto operator<=>(const MachineCost&) const = default;
};

MachineCost cost_of(const Form& m);

enum class LearnStatus { Ok, Timeout, Unsat };
std::string status_name(LearnStatus s);

struct LearnStats {
  double elapsed_ms = 0.0;
  int rounds = 0;         // counterexample-guided refinements
  int examples_used = 0;  // size of the final working set
  std::uint64_t nodes = 0;
};

struct LearnResult {
  LearnStatus status = LearnStatus::Unsat;
  std::optional<Form> machine;
  LearnStats stats;
};

// True iff the run of t on m ends where its label requires.
bool accepts_example(const Form& m, const TraceExample& t);
bool consistent(const Form& m, const std::vector<TraceExample>& examples);
bool find_counterexample(const Form& m, const TraceExample& t);

// Smallest machine consistent with every example. Requires a GOAL example
// (std::invalid_argument otherwise). Returned machines always validate and
// are consistent; anything else is an internal error.
LearnResult learn(const std::vector<TraceExample>& examples, const Signature& sig,
                  const SearchConfig& cfg);

struct OracleBounds {
  int max_nonterminal_states = 3;
  int max_literals_per_edge = 2;
  int kappa = 1;
  LearnMode mode = LearnMode::FirstOrder;
};

// Plain enumeration of every machine in cost order; for tiny problems only
// (Error when |HB| > 6 or bounds exceed 3 non-terminal states / 2 literals).
// nullopt when nothing within bounds is consistent.
std::optional<Form> oracle_minimal(const std::vector<TraceExample>& examples, const Signature& sig,
                                   const OracleBounds& bounds);

// Starts from the dummy machine and relearns whenever a trace contradicts the
// current machine.
class CounterexampleLoop {
 public:
  CounterexampleLoop(Signature sig, SearchConfig cfg);

  struct Update {
    LearnStatus status = LearnStatus::Ok;
    double learner_ms = 0.0;
    TraceExample trigger;
  };

  // nullopt when t is not a counterexample. On Timeout/Unsat the previous
  // machine stays in place and the example is still recorded.
  std::optional<Update> observe(const TraceExample& t);

  const Form& machine() const { return machine_; }
  const std::vector<TraceExample>& examples() const { return examples_; }
  int version() const { return version_; }  // 0 for the dummy machine
  bool is_dummy() const { return version_ == 0; }

 private:
  Signature sig_;
  SearchConfig cfg_;
  Form machine_;
  std::vector<TraceExample> examples_;
  int version_ = 0;
};

}  // namespace form
