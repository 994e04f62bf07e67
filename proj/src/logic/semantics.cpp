#include <algorithm>
#include <cctype>
#include <functional>
#include <set>

#include "form/logic.hpp"

namespace form {

Observation::Observation(std::initializer_list<GroundAtom> atoms) : atoms_(atoms) {
  std::sort(atoms_.begin(), atoms_.end());
  atoms_.erase(std::unique(atoms_.begin(), atoms_.end()), atoms_.end());
}

Observation::Observation(std::vector<GroundAtom> atoms) : atoms_(std::move(atoms)) {
  std::sort(atoms_.begin(), atoms_.end());
  atoms_.erase(std::unique(atoms_.begin(), atoms_.end()), atoms_.end());
}

bool Observation::contains(const GroundAtom& a) const {
  return std::binary_search(atoms_.begin(), atoms_.end(), a);
}

Observation parse_observation(std::string_view text) {
  std::vector<GroundAtom> atoms;
  std::size_t i = 0;
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  if (trim(text).empty()) return {};
  while (i <= text.size()) {
    std::size_t j = text.find(',', i);
    if (j == std::string_view::npos) j = text.size();
    const std::string_view tok = trim(text.substr(i, j - i));
    const auto open = tok.find('(');
    if (open == std::string_view::npos) {
      if (!is_identifier(tok)) throw ParseError("invalid atom '" + std::string(tok) + "'", i);
      atoms.emplace_back(std::string(tok));
    } else {
      const auto pred = tok.substr(0, open);
      if (tok.back() != ')') throw ParseError("unterminated atom '" + std::string(tok) + "'", i);
      const auto arg = tok.substr(open + 1, tok.size() - open - 2);
      if (!is_identifier(pred) || !is_identifier(arg))
        throw ParseError("invalid atom '" + std::string(tok) + "'", i);
      atoms.emplace_back(std::string(pred), std::string(arg));
    }
    i = j + 1;
  }
  return Observation(std::move(atoms));
}

std::string format_observation(const Observation& o) {
  std::string s;
  for (const auto& a : o.atoms()) {
    if (!s.empty()) s += ',';
    s += a.to_string();
  }
  return s;
}

Buffer::Buffer(const std::vector<Observation>& sequence) {
  for (const auto& o : sequence) append(o);
}

void Buffer::append(const Observation& o) {
  latest_ = o;
  std::vector<GroundAtom> merged;
  merged.reserve(seen_.size() + o.atoms().size());
  std::set_union(seen_.begin(), seen_.end(), o.atoms().begin(), o.atoms().end(),
                 std::back_inserter(merged));
  seen_ = std::move(merged);
  ++length_;
}

void Buffer::clear() {
  latest_ = Observation();
  seen_.clear();
  length_ = 0;
}

bool Buffer::seen(const GroundAtom& a) const {
  return std::binary_search(seen_.begin(), seen_.end(), a);
}

namespace {

bool eval(const Buffer& b, const Formula& f, const Signature& sig) {
  switch (f.kind()) {
    case Formula::Kind::Ground:
      if (!sig.contains(f.ground()))
        throw SignatureError("atom '" + f.ground().to_string() + "' is not in the Herbrand base");
      return b.latest().contains(f.ground());
    case Formula::Kind::Quantified: {
      const auto& q = f.quantified_atom();
      const auto& members = sig.members(q.predicate);
      if (q.quantifier == Quantifier::Exists)
        return std::any_of(members.begin(), members.end(), [&](const std::string& c) {
          return b.latest().contains(GroundAtom(q.predicate, c));
        });
      return std::all_of(members.begin(), members.end(),
                         [&](const std::string& c) { return b.seen(GroundAtom(q.predicate, c)); });
    }
    case Formula::Kind::Not:
      return !eval(b, f.child(), sig);
    case Formula::Kind::And:
      return eval(b, f.left(), sig) && eval(b, f.right(), sig);
    case Formula::Kind::Or:
      return eval(b, f.left(), sig) || eval(b, f.right(), sig);
  }
  return false;
}

}  // namespace

bool satisfies(const Buffer& b, const Formula& f, const Signature& sig) {
  if (b.empty()) throw Error("cannot evaluate a formula on an empty buffer");
  return eval(b, f, sig);
}

// A model is a pair latest ⊆ seen. Positive ground literals and existential
// picks go into latest, universals into seen; negated universals need one
// member outside seen. Keeping both sets minimal is optimal, so only the
// existential picks need search.
bool conjunction_satisfiable(const std::vector<Literal>& lits, const Signature& sig) {
  std::set<GroundAtom> lpos, lneg, spos;
  std::vector<std::vector<GroundAtom>> picks, escapes;
  for (const auto& l : lits) {
    if (const auto* g = std::get_if<GroundAtom>(&l.atom)) {
      if (!sig.contains(*g))
        throw SignatureError("atom '" + g->to_string() + "' is not in the Herbrand base");
      (l.positive ? lpos : lneg).insert(*g);
      continue;
    }
    const auto& q = std::get<QuantifiedAtom>(l.atom);
    const auto inst = ground_instances(q, sig);
    const bool exists = q.quantifier == Quantifier::Exists;
    if (exists && l.positive) {
      if (inst.empty()) return false;
      picks.push_back(inst);
    } else if (exists) {
      lneg.insert(inst.begin(), inst.end());
    } else if (l.positive) {
      spos.insert(inst.begin(), inst.end());
    } else {
      if (inst.empty()) return false;
      escapes.push_back(inst);
    }
  }
  for (const auto& a : lpos)
    if (lneg.count(a)) return false;

  std::set<GroundAtom> latest = lpos;
  std::function<bool(std::size_t)> choose = [&](std::size_t k) -> bool {
    if (k == picks.size()) {
      for (const auto& group : escapes) {
        const bool ok = std::any_of(group.begin(), group.end(), [&](const GroundAtom& a) {
          return !latest.count(a) && !spos.count(a);
        });
        if (!ok) return false;
      }
      return true;
    }
    for (const auto& a : picks[k]) {
      if (lneg.count(a)) continue;
      const bool fresh = latest.insert(a).second;
      const bool ok = choose(k + 1);
      if (fresh) latest.erase(a);
      if (ok) return true;
    }
    return false;
  };
  return choose(0);
}

bool mutually_exclusive(const Formula& a, const Formula& b, const Signature& sig) {
  auto la = literals_of(a), lb = literals_of(b);
  if (!la || !lb) throw Error("mutual exclusivity needs conjunctions of literals");
  la->insert(la->end(), lb->begin(), lb->end());
  return !conjunction_satisfiable(*la, sig);
}

bool formulas_exclusive(const Formula& a, const Formula& b, const Signature& sig) {
  const auto da = to_dnf(a), db = to_dnf(b);
  for (const auto& x : da)
    for (const auto& y : db) {
      auto c = x;
      c.insert(c.end(), y.begin(), y.end());
      if (conjunction_satisfiable(c, sig)) return false;
    }
  return true;
}

}  // namespace form
