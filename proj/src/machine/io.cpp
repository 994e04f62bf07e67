#include <fstream>
#include <sstream>

#include "form/machine.hpp"

namespace form {

namespace {

std::vector<std::string> split_words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

std::string read_all(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string signature_to_text(const Signature& sig) {
  std::ostringstream out;
  out << "constants";
  for (const auto& c : sig.constants()) out << ' ' << c;
  out << '\n';
  for (const auto& p : sig.predicates()) {
    out << "predicate " << p.name << ' ' << p.arity;
    if (p.arity == 1)
      for (const auto& m : sig.members(p.name)) out << ' ' << m;
    out << '\n';
  }
  return out.str();
}

bool parse_signature_line(const std::string& line, Signature& sig) {
  const auto w = split_words(strip_comment(line));
  if (w.empty()) return false;
  if (w[0] == "constants") {
    for (std::size_t i = 1; i < w.size(); ++i) sig.add_constant(w[i]);
    return true;
  }
  if (w[0] == "predicate") {
    if (w.size() < 3) throw Error("malformed predicate record: '" + line + "'");
    int arity = 0;
    try {
      arity = std::stoi(w[2]);
    } catch (const std::exception&) {
      throw Error("bad arity in '" + line + "'");
    }
    sig.add_predicate(w[1], arity);
    if (arity == 0 && w.size() > 3) throw Error("proposition with members: '" + line + "'");
    for (std::size_t i = 3; i < w.size(); ++i) sig.add_member(w[1], w[i]);
    return true;
  }
  return false;
}

Signature signature_from_text(const std::string& text) {
  Signature sig;
  std::istringstream in(text);
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (split_words(strip_comment(line)).empty()) continue;
    if (!parse_signature_line(line, sig))
      throw Error("line " + std::to_string(lineno) + ": not a signature record");
  }
  return sig;
}

std::string to_text(const Form& form) {
  std::ostringstream out;
  out << "# form machine\n" << signature_to_text(form.signature());
  for (StateId u = 0; u < static_cast<StateId>(form.num_states()); ++u) {
    out << "state " << form.name(u);
    if (u == form.initial()) out << " initial";
    if (u == form.accepting()) out << " accepting";
    if (form.rejecting() && u == *form.rejecting()) out << " rejecting";
    out << '\n';
  }
  for (const auto& e : form.edges())
    out << "edge " << form.name(e.from) << ' ' << form.name(e.to) << ' ' << e.index << " \""
        << format_formula(e.formula) << "\"\n";
  return out.str();
}

Form from_text(const std::string& text) {
  Signature sig;
  std::vector<std::string> states;
  std::optional<StateId> initial, accepting, rejecting;
  struct RawEdge {
    std::string from, to;
    int index;
    std::string formula;
    int line;
  };
  std::vector<RawEdge> raw;
  std::istringstream in(text);
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line.find_first_not_of(" \t") != std::string::npos && line[line.find_first_not_of(" \t")] == '#')
      continue;
    const auto w = split_words(line);
    if (w[0] == "state") {
      if (w.size() < 2) throw Error(where + "state record needs an id");
      const auto id = static_cast<StateId>(states.size());
      states.push_back(w[1]);
      for (std::size_t i = 2; i < w.size(); ++i) {
        auto& slot = w[i] == "initial"     ? initial
                     : w[i] == "accepting" ? accepting
                     : w[i] == "rejecting" ? rejecting
                                           : throw Error(where + "unknown state flag '" + w[i] + "'");
        if (slot) throw Error(where + "second " + w[i] + " state");
        slot = id;
      }
    } else if (w[0] == "edge") {
      const auto open = line.find('"');
      const auto close = line.rfind('"');
      if (open == std::string::npos || close == open)
        throw Error(where + "edge formula must be quoted");
      const auto head = split_words(line.substr(0, open));
      if (head.size() != 4) throw Error(where + "expected: edge <from> <to> <index> \"formula\"");
      int index = 0;
      try {
        index = std::stoi(head[3]);
      } catch (const std::exception&) {
        throw Error(where + "bad edge index");
      }
      raw.push_back({head[1], head[2], index, line.substr(open + 1, close - open - 1), lineno});
    } else {
      try {
        if (!parse_signature_line(line, sig)) throw Error("unknown record '" + w[0] + "'");
      } catch (const Error& e) {
        throw Error(where + e.what());
      }
    }
  }
  if (!initial) throw Error("machine has no initial state");
  if (!accepting) throw Error("machine has no accepting state");
  auto lookup = [&](const std::string& n, int line) {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i] == n) return static_cast<StateId>(i);
    throw Error("line " + std::to_string(line) + ": unknown state '" + n + "'");
  };
  std::vector<Edge> edges;
  for (const auto& r : raw) {
    Formula f = [&] {
      try {
        return parse_formula(r.formula);
      } catch (const ParseError& e) {
        throw Error("line " + std::to_string(r.line) + ": " + e.what());
      }
    }();
    edges.push_back({lookup(r.from, r.line), lookup(r.to, r.line), r.index, f});
  }
  return Form(std::move(sig), std::move(states), *initial, *accepting, rejecting, std::move(edges));
}

void to_file(const Form& form, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << to_text(form);
}

Form from_file(const std::string& path) { return from_text(read_all(path)); }

std::string to_dot(const Form& form) {
  std::ostringstream out;
  out << "digraph form {\n  rankdir=LR;\n  node [shape=circle];\n";
  for (StateId u = 0; u < static_cast<StateId>(form.num_states()); ++u) {
    out << "  \"" << form.name(u) << "\"";
    if (u == form.accepting())
      out << " [shape=doublecircle]";
    else if (form.rejecting() && u == *form.rejecting())
      out << " [shape=doublecircle, style=dashed]";
    out << ";\n";
  }
  out << "  start [shape=point];\n  start -> \"" << form.name(form.initial()) << "\";\n";
  for (const auto& e : form.edges()) {
    std::string label = format_formula(e.formula);
    std::string escaped;
    for (char c : label) {
      if (c == '"' || c == '\\') escaped += '\\';
      escaped += c;
    }
    out << "  \"" << form.name(e.from) << "\" -> \"" << form.name(e.to) << "\" [label=\"" << escaped
        << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

namespace reference {

namespace {
Formula f(const std::string& text, const Signature& sig) { return parse_formula(text, sig); }
}  // namespace

Form all_yellow(const Signature& sig) {
  return Form(sig, {"u0", "u1", "u_acc"}, 0, 2, std::nullopt,
              {{0, 1, 0, f("forall X. yellow(X)", sig)}, {1, 2, 0, f("goal", sig)}});
}

Form yellow_then_blue(const Signature& sig) {
  return Form(sig, {"u0", "u1", "u2", "u_acc"}, 0, 3, std::nullopt,
              {{0, 1, 0, f("forall X. yellow(X)", sig)},
               {1, 2, 0, f("exists X. blue(X)", sig)},
               {2, 3, 0, f("goal", sig)}});
}

Form green_but_one_no_lava(const Signature& sig) {
  return Form(sig, {"u0", "u1", "u_acc", "u_rej"}, 0, 2, 3,
              {{0, 1, 0, f("exists X. green(X) & !green(o12) & !lava", sig)},
               {0, 3, 0, f("lava", sig)},
               {1, 2, 0, f("goal & !lava", sig)},
               {1, 3, 0, f("lava", sig)}});
}

Form blue_all_yellow_7(const Signature& sig) {
  return Form(sig, {"u0", "u1", "u2", "u3", "u_acc"}, 0, 4, std::nullopt,
              {{0, 1, 0, f("exists X. blue(X)", sig)},
               {1, 2, 0, f("forall X. yellow(X)", sig)},
               {2, 3, 0, f("purple(o7)", sig)},
               {3, 4, 0, f("goal", sig)}});
}

}  // namespace reference

}  // namespace form
