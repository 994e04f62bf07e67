#include <cctype>

#include "form/logic.hpp"

namespace form {

struct Formula::Node {
  Kind kind;
  GroundAtom ground;
  QuantifiedAtom quant;
  std::vector<Formula> kids;
};

Formula Formula::atom(GroundAtom a) {
  return Formula(std::make_shared<const Node>(Node{Kind::Ground, std::move(a), {}, {}}));
}

Formula Formula::quantified(QuantifiedAtom q) {
  return Formula(std::make_shared<const Node>(Node{Kind::Quantified, {}, std::move(q), {}}));
}

Formula Formula::exists(const std::string& predicate) {
  return quantified({Quantifier::Exists, predicate});
}

Formula Formula::forall(const std::string& predicate) {
  return quantified({Quantifier::Forall, predicate});
}

Formula Formula::negation(Formula f) {
  return Formula(std::make_shared<const Node>(Node{Kind::Not, {}, {}, {std::move(f)}}));
}

Formula Formula::conjunction(Formula l, Formula r) {
  return Formula(
      std::make_shared<const Node>(Node{Kind::And, {}, {}, {std::move(l), std::move(r)}}));
}

Formula Formula::disjunction(Formula l, Formula r) {
  return Formula(
      std::make_shared<const Node>(Node{Kind::Or, {}, {}, {std::move(l), std::move(r)}}));
}

Formula::Kind Formula::kind() const { return node_->kind; }

const GroundAtom& Formula::ground() const {
  if (node_->kind != Kind::Ground) throw Error("formula is not a ground atom");
  return node_->ground;
}

const QuantifiedAtom& Formula::quantified_atom() const {
  if (node_->kind != Kind::Quantified) throw Error("formula is not a quantified atom");
  return node_->quant;
}

const Formula& Formula::child() const {
  if (node_->kind != Kind::Not) throw Error("formula is not a negation");
  return node_->kids[0];
}

const Formula& Formula::left() const {
  if (node_->kids.size() != 2) throw Error("formula is not binary");
  return node_->kids[0];
}

const Formula& Formula::right() const {
  if (node_->kids.size() != 2) throw Error("formula is not binary");
  return node_->kids[1];
}

bool Formula::operator==(const Formula& other) const { return (*this <=> other) == 0; }

std::strong_ordering Formula::operator<=>(const Formula& other) const {
  if (node_ == other.node_) return std::strong_ordering::equal;
  if (auto c = node_->kind <=> other.node_->kind; c != 0) return c;
  switch (node_->kind) {
    case Kind::Ground:
      return node_->ground <=> other.node_->ground;
    case Kind::Quantified:
      return node_->quant <=> other.node_->quant;
    default:
      for (std::size_t i = 0; i < node_->kids.size(); ++i)
        if (auto c = node_->kids[i] <=> other.node_->kids[i]; c != 0) return c;
      return std::strong_ordering::equal;
  }
}

std::string Literal::to_string() const {
  const std::string body = std::holds_alternative<GroundAtom>(atom)
                               ? std::get<GroundAtom>(atom).to_string()
                               : std::get<QuantifiedAtom>(atom).to_string();
  return positive ? body : "!" + body;
}

namespace {

Formula literal_formula(const Literal& l) {
  Formula f = std::holds_alternative<GroundAtom>(l.atom)
                  ? Formula::atom(std::get<GroundAtom>(l.atom))
                  : Formula::quantified(std::get<QuantifiedAtom>(l.atom));
  return l.positive ? f : Formula::negation(f);
}

std::optional<Literal> as_literal(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Ground:
      return Literal{true, f.ground()};
    case Formula::Kind::Quantified:
      return Literal{true, f.quantified_atom()};
    case Formula::Kind::Not: {
      const Formula& c = f.child();
      if (c.kind() == Formula::Kind::Ground) return Literal{false, c.ground()};
      if (c.kind() == Formula::Kind::Quantified) return Literal{false, c.quantified_atom()};
      return std::nullopt;
    }
    default:
      return std::nullopt;
  }
}

bool collect_literals(const Formula& f, std::vector<Literal>& out) {
  if (f.kind() == Formula::Kind::And)
    return collect_literals(f.left(), out) && collect_literals(f.right(), out);
  auto l = as_literal(f);
  if (!l) return false;
  out.push_back(std::move(*l));
  return true;
}

using Dnf = std::vector<std::vector<Literal>>;

Dnf dnf(const Formula& f, bool negated) {
  switch (f.kind()) {
    case Formula::Kind::Ground:
      return {{Literal{!negated, f.ground()}}};
    case Formula::Kind::Quantified:
      return {{Literal{!negated, f.quantified_atom()}}};
    case Formula::Kind::Not:
      return dnf(f.child(), !negated);
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      const bool product = (f.kind() == Formula::Kind::And) != negated;
      Dnf l = dnf(f.left(), negated), r = dnf(f.right(), negated);
      if (!product) {
        l.insert(l.end(), r.begin(), r.end());
        return l;
      }
      Dnf out;
      for (const auto& a : l)
        for (const auto& b : r) {
          auto c = a;
          c.insert(c.end(), b.begin(), b.end());
          out.push_back(std::move(c));
        }
      return out;
    }
  }
  return {};
}

}  // namespace

Formula conjunction_of(const std::vector<Literal>& lits) {
  if (lits.empty()) throw Error("empty conjunction");
  Formula f = literal_formula(lits[0]);
  for (std::size_t i = 1; i < lits.size(); ++i)
    f = Formula::conjunction(f, literal_formula(lits[i]));
  return f;
}

std::optional<std::vector<Literal>> literals_of(const Formula& f) {
  std::vector<Literal> out;
  if (!collect_literals(f, out)) return std::nullopt;
  return out;
}

std::vector<std::vector<Literal>> to_dnf(const Formula& f) { return dnf(f, false); }

void check_formula(const Formula& f, const Signature& sig) {
  switch (f.kind()) {
    case Formula::Kind::Ground:
      if (!sig.contains(f.ground()))
        throw SignatureError("atom '" + f.ground().to_string() + "' is not in the Herbrand base");
      return;
    case Formula::Kind::Quantified: {
      const auto& p = f.quantified_atom().predicate;
      if (sig.arity(p) != 1) throw SignatureError("'" + p + "' is not a unary predicate");
      return;
    }
    case Formula::Kind::Not:
      check_formula(f.child(), sig);
      return;
    default:
      check_formula(f.left(), sig);
      check_formula(f.right(), sig);
  }
}

// ---- text syntax ----

namespace {

class Parser {
 public:
  explicit Parser(std::string_view t) : text_(t) {}

  Formula parse() {
    Formula f = disjunction();
    skip();
    if (pos_ != text_.size()) throw ParseError("unexpected '" + std::string(1, text_[pos_]) + "'", pos_);
    return f;
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
  }

  std::string word() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    if (start == pos_) throw ParseError("expected a name", pos_);
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string identifier() {
    const std::size_t at = (skip(), pos_);
    std::string w = word();
    if (!is_identifier(w)) throw ParseError("invalid name '" + w + "'", at);
    return w;
  }

  std::string variable() {
    const std::size_t at = (skip(), pos_);
    std::string w = word();
    if (!std::isupper(static_cast<unsigned char>(w[0])))
      throw ParseError("expected a variable, got '" + w + "'", at);
    return w;
  }

  Formula disjunction() {
    Formula f = conjunction();
    while (accept('|')) f = Formula::disjunction(f, conjunction());
    return f;
  }

  Formula conjunction() {
    Formula f = unary();
    while (accept('&')) f = Formula::conjunction(f, unary());
    return f;
  }

  Formula unary() {
    if (accept('!')) return Formula::negation(unary());
    return primary();
  }

  Formula primary() {
    if (accept('(')) {
      Formula f = disjunction();
      expect(')');
      return f;
    }
    skip();
    const std::size_t at = pos_;
    std::string name = word();
    if (name == "forall" || name == "exists") {
      const std::string var = variable();
      expect('.');
      const std::string pred = identifier();
      expect('(');
      const std::size_t vat = (skip(), pos_);
      if (variable() != var) throw ParseError("quantified variable mismatch", vat);
      expect(')');
      return Formula::quantified(
          {name == "forall" ? Quantifier::Forall : Quantifier::Exists, pred});
    }
    if (!is_identifier(name)) throw ParseError("invalid name '" + name + "'", at);
    if (accept('(')) {
      std::string arg = identifier();
      expect(')');
      return Formula::atom({name, arg});
    }
    return Formula::atom(GroundAtom(name));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

int precedence(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Or:
      return 1;
    case Formula::Kind::And:
      return 2;
    case Formula::Kind::Not:
      return 3;
    default:
      return 4;
  }
}

// Left-associative binaries: a right child of equal precedence needs parentheses.
std::string format(const Formula& f, int parent, bool right) {
  const int p = precedence(f);
  std::string s;
  switch (f.kind()) {
    case Formula::Kind::Ground:
      return f.ground().to_string();
    case Formula::Kind::Quantified:
      return f.quantified_atom().to_string();
    case Formula::Kind::Not:
      return "!" + format(f.child(), p, false);
    case Formula::Kind::And:
      s = format(f.left(), p, false) + " & " + format(f.right(), p, true);
      break;
    case Formula::Kind::Or:
      s = format(f.left(), p, false) + " | " + format(f.right(), p, true);
      break;
  }
  if (parent > p || (parent == p && right)) return "(" + s + ")";
  return s;
}

}  // namespace

Formula parse_formula(std::string_view text) { return Parser(text).parse(); }

Formula parse_formula(std::string_view text, const Signature& sig) {
  Formula f = Parser(text).parse();
  check_formula(f, sig);
  return f;
}

std::string format_formula(const Formula& f) { return format(f, 0, false); }

}  // namespace form
