// Reward machine runtime: structure, buffered stepping, validation, shaping
// potential and text/DOT serialization.
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "form/logic.hpp"

namespace form {

using StateId = int;

// Raised when two edges to different targets fire on the same step.
class DeterminismError : public Error {
 public:
  using Error::Error;
};

struct Edge {
  StateId from = 0;
  StateId to = 0;
  int index = 0;
  Formula formula;
  auto operator<=>(const Edge&) const = default;
  bool operator==(const Edge&) const = default;
};

class Form {
 public:
  // Edges are stored sorted by (from, to, index). Throws Error for ids out of
  // range or duplicate state names; semantic checks are left to validate().
  Form(Signature sig, std::vector<std::string> states, StateId initial, StateId accepting,
       std::optional<StateId> rejecting, std::vector<Edge> edges);

  const Signature& signature() const { return sig_; }
  const std::vector<std::string>& states() const { return states_; }
  std::size_t num_states() const { return states_.size(); }
  StateId initial() const { return initial_; }
  StateId accepting() const { return accepting_; }
  std::optional<StateId> rejecting() const { return rejecting_; }
  const std::vector<Edge>& edges() const { return edges_; }
  // Indices into edges() leaving u.
  const std::vector<std::size_t>& outgoing(StateId u) const { return out_.at(u); }

  const std::string& name(StateId u) const { return states_.at(u); }
  StateId id(const std::string& name) const;  // throws Error when unknown
  bool is_terminal(StateId u) const { return u == accepting_ || (rejecting_ && u == *rejecting_); }
  std::size_t literal_count() const;  // over conjunction-of-literal edges

  // Same machine over another signature; throws SignatureError when a formula
  // mentions symbols the new signature lacks.
  Form with_signature(Signature sig) const;

  bool operator==(const Form& other) const;

 private:
  Signature sig_;
  std::vector<std::string> states_;
  StateId initial_;
  StateId accepting_;
  std::optional<StateId> rejecting_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> out_;
};

// u_I, u_acc, u_rej and no edges.
Form dummy_form(const Signature& sig);

struct RunState {
  StateId current = 0;
  Buffer buffer;
  std::vector<StateId> visited;  // distinct states in order of first entry
  std::size_t step_count = 0;
};

struct StepResult {
  StateId next_state = 0;
  double reward = 0.0;
  bool transitioned = false;
};

RunState start(const Form& form);
StepResult step(const Form& form, RunState& rs, const Observation& obs);

struct RunResult {
  StateId final_state = 0;
  std::vector<StateId> states;  // initial state, then the state after each processed step
  double total_reward = 0.0;
};

// Stops early on a terminal state. Throws on an empty trace.
RunResult run_trace(const Form& form, const std::vector<Observation>& trace);

struct Violation {
  enum class Kind { Structure, Determinism, Symbol };
  Kind kind;
  std::string message;
  std::vector<std::string> states;
  std::vector<std::size_t> edges;
};

std::vector<Violation> validate(const Form& form);

// -(edge distance to u_acc); states that cannot reach u_acc get -|states|.
double potential(const Form& form, StateId u);
std::vector<double> potentials(const Form& form);

std::string to_dot(const Form& form);
std::string to_text(const Form& form);
Form from_text(const std::string& text);
void to_file(const Form& form, const std::string& path);
Form from_file(const std::string& path);

// Signature records shared by machine files and standalone signature files:
//   constants c1 c2 ...
//   predicate <name> <arity> [members...]
std::string signature_to_text(const Signature& sig);
// Consumes a signature record; false when the line is not one.
bool parse_signature_line(const std::string& line, Signature& sig);
Signature signature_from_text(const std::string& text);

// Hand-built machines for the benchmark tasks.
namespace reference {
Form all_yellow(const Signature& sig);
Form yellow_then_blue(const Signature& sig);  // all yellow, then any blue, then goal
Form green_but_one_no_lava(const Signature& sig);
Form blue_all_yellow_7(const Signature& sig);
}  // namespace reference

}  // namespace form
