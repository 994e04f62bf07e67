#include <algorithm>
#include <deque>
#include <set>

#include "form/machine.hpp"

namespace form {

Form::Form(Signature sig, std::vector<std::string> states, StateId initial, StateId accepting,
           std::optional<StateId> rejecting, std::vector<Edge> edges)
    : sig_(std::move(sig)),
      states_(std::move(states)),
      initial_(initial),
      accepting_(accepting),
      rejecting_(rejecting),
      edges_(std::move(edges)) {
  const auto n = static_cast<StateId>(states_.size());
  auto in_range = [n](StateId u) { return u >= 0 && u < n; };
  if (!in_range(initial_) || !in_range(accepting_) || (rejecting_ && !in_range(*rejecting_)))
    throw Error("distinguished state out of range");
  if (std::set<std::string>(states_.begin(), states_.end()).size() != states_.size())
    throw Error("duplicate state name");
  for (const auto& e : edges_)
    if (!in_range(e.from) || !in_range(e.to)) throw Error("edge endpoint out of range");
  std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.from, a.to, a.index) < std::tie(b.from, b.to, b.index);
  });
  out_.assign(states_.size(), {});
  for (std::size_t i = 0; i < edges_.size(); ++i) out_[edges_[i].from].push_back(i);
}

StateId Form::id(const std::string& name) const {
  const auto it = std::find(states_.begin(), states_.end(), name);
  if (it == states_.end()) throw Error("unknown state '" + name + "'");
  return static_cast<StateId>(it - states_.begin());
}

std::size_t Form::literal_count() const {
  std::size_t n = 0;
  for (const auto& e : edges_)
    if (const auto lits = literals_of(e.formula)) n += lits->size();
  return n;
}

Form Form::with_signature(Signature sig) const {
  for (const auto& e : edges_) check_formula(e.formula, sig);
  return Form(std::move(sig), states_, initial_, accepting_, rejecting_, edges_);
}

bool Form::operator==(const Form& other) const {
  return sig_ == other.sig_ && states_ == other.states_ && initial_ == other.initial_ &&
         accepting_ == other.accepting_ && rejecting_ == other.rejecting_ &&
         edges_ == other.edges_;
}

Form dummy_form(const Signature& sig) { return Form(sig, {"u0", "u_acc", "u_rej"}, 0, 1, 2, {}); }

RunState start(const Form& form) {
  RunState rs;
  rs.current = form.initial();
  rs.visited = {form.initial()};
  return rs;
}

StepResult step(const Form& form, RunState& rs, const Observation& obs) {
  if (form.is_terminal(rs.current))
    throw Error("cannot step from terminal state '" + form.name(rs.current) + "'");
  rs.buffer.append(obs);
  ++rs.step_count;
  std::optional<StateId> target;
  for (const std::size_t i : form.outgoing(rs.current)) {
    const Edge& e = form.edges()[i];
    if (!satisfies(rs.buffer, e.formula, form.signature())) continue;
    if (target && *target != e.to)
      throw DeterminismError("edges from '" + form.name(rs.current) + "' to '" +
                             form.name(*target) + "' and '" + form.name(e.to) +
                             "' fire together");
    target = e.to;
  }
  if (!target) return {rs.current, 0.0, false};
  rs.current = *target;
  rs.buffer.clear();
  if (std::find(rs.visited.begin(), rs.visited.end(), *target) == rs.visited.end())
    rs.visited.push_back(*target);
  return {*target, *target == form.accepting() ? 1.0 : 0.0, true};
}

RunResult run_trace(const Form& form, const std::vector<Observation>& trace) {
  if (trace.empty()) throw Error("empty trace");
  RunState rs = start(form);
  RunResult res;
  res.states.push_back(rs.current);
  for (const auto& o : trace) {
    if (form.is_terminal(rs.current)) break;
    res.total_reward += step(form, rs, o).reward;
    res.states.push_back(rs.current);
  }
  res.final_state = rs.current;
  return res;
}

std::vector<Violation> validate(const Form& form) {
  std::vector<Violation> out;
  const auto& edges = form.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (form.is_terminal(e.from))
      out.push_back({Violation::Kind::Structure,
                     "terminal state '" + form.name(e.from) + "' has an outgoing edge",
                     {form.name(e.from)},
                     {i}});
    if (e.from == e.to)
      out.push_back({Violation::Kind::Structure,
                     "explicit self-loop on '" + form.name(e.from) + "'",
                     {form.name(e.from)},
                     {i}});
    if (e.index < 0)
      out.push_back({Violation::Kind::Structure, "negative edge index", {form.name(e.from)}, {i}});
    if (i > 0 && edges[i - 1].from == e.from && edges[i - 1].to == e.to &&
        edges[i - 1].index == e.index)
      out.push_back({Violation::Kind::Structure,
                     "duplicate edge index " + std::to_string(e.index),
                     {form.name(e.from), form.name(e.to)},
                     {i - 1, i}});
    try {
      check_formula(e.formula, form.signature());
    } catch (const SignatureError& err) {
      out.push_back({Violation::Kind::Symbol, err.what(), {form.name(e.from), form.name(e.to)}, {i}});
    }
  }
  if (form.rejecting() && *form.rejecting() == form.accepting())
    out.push_back({Violation::Kind::Structure,
                   "accepting and rejecting states coincide",
                   {form.name(form.accepting())},
                   {}});
  for (StateId u = 0; u < static_cast<StateId>(form.num_states()); ++u) {
    const auto& out_u = form.outgoing(u);
    for (std::size_t a = 0; a < out_u.size(); ++a)
      for (std::size_t b = a + 1; b < out_u.size(); ++b) {
        const Edge& ea = edges[out_u[a]];
        const Edge& eb = edges[out_u[b]];
        if (ea.to == eb.to) continue;
        bool exclusive = false;
        try {
          exclusive = formulas_exclusive(ea.formula, eb.formula, form.signature());
        } catch (const SignatureError&) {
          continue;  // already reported as a symbol violation
        }
        if (!exclusive)
          out.push_back({Violation::Kind::Determinism,
                         "edges " + form.name(u) + "->" + form.name(ea.to) + " and " +
                             form.name(u) + "->" + form.name(eb.to) + " are not mutually exclusive",
                         {form.name(u), form.name(ea.to), form.name(eb.to)},
                         {out_u[a], out_u[b]}});
      }
  }
  return out;
}

std::vector<double> potentials(const Form& form) {
  const std::size_t n = form.num_states();
  std::vector<int> dist(n, -1);
  std::vector<std::vector<StateId>> preds(n);
  for (const auto& e : form.edges()) preds[e.to].push_back(e.from);
  std::deque<StateId> queue{form.accepting()};
  dist[form.accepting()] = 0;
  while (!queue.empty()) {
    const StateId v = queue.front();
    queue.pop_front();
    for (const StateId p : preds[v])
      if (dist[p] < 0) {
        dist[p] = dist[v] + 1;
        queue.push_back(p);
      }
  }
  std::vector<double> phi(n);
  for (std::size_t u = 0; u < n; ++u)
    phi[u] = dist[u] < 0 ? -static_cast<double>(n) : -static_cast<double>(dist[u]);
  return phi;
}

double potential(const Form& form, StateId u) { return potentials(form).at(u); }

}  // namespace form
