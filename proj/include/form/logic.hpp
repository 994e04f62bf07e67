// First-order logic layer: signatures, atoms, formulas, trace buffers and
// satisfaction.
#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace form {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad signature usage or an atom/predicate that is not part of the signature.
class SignatureError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at offset " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Orders "o2" before "o10": compares alphabetic runs lexically, digit runs numerically.
bool natural_less(std::string_view a, std::string_view b);

bool is_identifier(std::string_view s);  // [a-z][a-z0-9_]*

struct Predicate {
  std::string name;
  int arity = 0;
  auto operator<=>(const Predicate&) const = default;
};

// A proposition when `argument` is empty, otherwise predicate(argument).
struct GroundAtom {
  std::string predicate;
  std::string argument;

  GroundAtom() = default;
  GroundAtom(std::string p) : predicate(std::move(p)) {}                    // NOLINT
  GroundAtom(const char* p) : predicate(p) {}                               // NOLINT
  GroundAtom(std::string p, std::string a) : predicate(std::move(p)), argument(std::move(a)) {}

  bool is_proposition() const { return argument.empty(); }
  std::string to_string() const;
  auto operator<=>(const GroundAtom&) const = default;
};

enum class Quantifier { Exists, Forall };

struct QuantifiedAtom {
  Quantifier quantifier = Quantifier::Exists;
  std::string predicate;
  std::string to_string() const;
  auto operator<=>(const QuantifiedAtom&) const = default;
};

// Constants, predicates of arity 0 or 1, and the membership relation that
// decides which constants instantiate each unary predicate.
class Signature {
 public:
  void add_constant(const std::string& name);
  void add_predicate(const std::string& name, int arity);
  // Declares constant as an instance of unary predicate; both must exist.
  void add_member(const std::string& predicate, const std::string& constant);

  // Constants in natural order.
  const std::vector<std::string>& constants() const { return constants_; }
  // Predicates sorted by name.
  const std::vector<Predicate>& predicates() const { return predicates_; }
  std::vector<std::string> unary_predicates() const;
  std::vector<std::string> propositions() const;
  // Members of a unary predicate in natural order. Throws for unknown/0-ary.
  const std::vector<std::string>& members(const std::string& predicate) const;

  bool has_constant(const std::string& c) const;
  std::optional<int> arity(const std::string& predicate) const;
  bool contains(const GroundAtom& a) const;

  // Propositions followed by member-restricted unary instances, predicates by
  // name and constants in natural order.
  const std::vector<GroundAtom>& herbrand_base() const { return herbrand_; }
  // Index into herbrand_base(), or nullopt.
  std::optional<std::size_t> index_of(const GroundAtom& a) const;

  bool operator==(const Signature& other) const;

 private:
  void rebuild();

  std::vector<std::string> constants_;
  std::vector<Predicate> predicates_;
  std::map<std::string, std::vector<std::string>> members_;
  std::vector<GroundAtom> herbrand_;
  std::map<GroundAtom, std::size_t> index_;
};

std::vector<GroundAtom> herbrand_base(const Signature& sig);
// Instances of q's predicate in canonical order. Empty membership yields {}.
std::vector<GroundAtom> ground_instances(const QuantifiedAtom& q, const Signature& sig);

// Immutable formula tree with value semantics (shared nodes).
class Formula {
 public:
  enum class Kind { Ground, Quantified, Not, And, Or };

  static Formula atom(GroundAtom a);
  static Formula quantified(QuantifiedAtom q);
  static Formula exists(const std::string& predicate);
  static Formula forall(const std::string& predicate);
  static Formula negation(Formula f);
  static Formula conjunction(Formula l, Formula r);
  static Formula disjunction(Formula l, Formula r);

  Kind kind() const;
  const GroundAtom& ground() const;
  const QuantifiedAtom& quantified_atom() const;
  const Formula& child() const;  // Not
  const Formula& left() const;   // And/Or
  const Formula& right() const;  // And/Or

  bool operator==(const Formula& other) const;
  std::strong_ordering operator<=>(const Formula& other) const;

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

using AtomRef = std::variant<GroundAtom, QuantifiedAtom>;

struct Literal {
  bool positive = true;
  AtomRef atom;
  bool is_quantified() const { return std::holds_alternative<QuantifiedAtom>(atom); }
  std::string to_string() const;
  auto operator<=>(const Literal&) const = default;
};

// Left-nested conjunction; throws on an empty list.
Formula conjunction_of(const std::vector<Literal>& lits);
// The literals of a (possibly nested) conjunction of literals, or nullopt.
std::optional<std::vector<Literal>> literals_of(const Formula& f);
// Disjunctive normal form with negations pushed onto atoms.
std::vector<std::vector<Literal>> to_dnf(const Formula& f);

// Throws SignatureError when f mentions atoms or predicates outside sig, or a
// quantifier over a non-unary predicate.
void check_formula(const Formula& f, const Signature& sig);

// Text syntax: forall X. p(X) | exists X. p(X) | p(o1) | p, with !, &, |
// (tightest first) and parentheses.
Formula parse_formula(std::string_view text);
// Parses and checks every symbol against sig.
Formula parse_formula(std::string_view text, const Signature& sig);
std::string format_formula(const Formula& f);

// Set of ground atoms observed at one step, kept sorted and unique.
class Observation {
 public:
  Observation() = default;
  Observation(std::initializer_list<GroundAtom> atoms);
  explicit Observation(std::vector<GroundAtom> atoms);

  bool contains(const GroundAtom& a) const;
  const std::vector<GroundAtom>& atoms() const { return atoms_; }
  bool empty() const { return atoms_.empty(); }
  auto operator<=>(const Observation&) const = default;

 private:
  std::vector<GroundAtom> atoms_;
};

// "a,b(o1)" ; empty text is the empty observation.
Observation parse_observation(std::string_view text);
std::string format_observation(const Observation& o);

// Observations since the last state change, stored as the latest one plus the
// union of all of them.
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(const std::vector<Observation>& sequence);

  void append(const Observation& o);
  void clear();

  bool empty() const { return length_ == 0; }
  std::size_t length() const { return length_; }
  const Observation& latest() const { return latest_; }
  bool seen(const GroundAtom& a) const;
  const std::vector<GroundAtom>& seen_atoms() const { return seen_; }

 private:
  Observation latest_;
  std::vector<GroundAtom> seen_;
  std::size_t length_ = 0;
};

// Ground atoms, propositions and existentials look at the latest observation;
// universals look at everything seen in the buffer.
bool satisfies(const Buffer& b, const Formula& f, const Signature& sig);

// Whether some buffer satisfies every literal. Exact under the latest/seen
// semantics (latest is always a subset of seen).
bool conjunction_satisfiable(const std::vector<Literal>& lits, const Signature& sig);
// Both formulas must be conjunctions of literals (SignatureError otherwise).
bool mutually_exclusive(const Formula& a, const Formula& b, const Signature& sig);
// Arbitrary formulas, via DNF.
bool formulas_exclusive(const Formula& a, const Formula& b, const Signature& sig);

}  // namespace form
