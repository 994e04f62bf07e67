#include <algorithm>
#include <cctype>

#include "form/logic.hpp"

namespace form {

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      // strip leading zeros, then compare by length and digits
      std::size_t is = i, js = j;
      while (is + 1 < ie && a[is] == '0') ++is;
      while (js + 1 < je && b[js] == '0') ++js;
      const auto na = a.substr(is, ie - is), nb = b.substr(js, je - js);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      if (ie - i != je - j) return ie - i < je - j;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || s[0] < 'a' || s[0] > 'z') return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

std::string GroundAtom::to_string() const {
  return argument.empty() ? predicate : predicate + "(" + argument + ")";
}

std::string QuantifiedAtom::to_string() const {
  return std::string(quantifier == Quantifier::Exists ? "exists" : "forall") + " X. " + predicate +
         "(X)";
}

void Signature::add_constant(const std::string& name) {
  if (!is_identifier(name)) throw SignatureError("invalid constant name '" + name + "'");
  if (has_constant(name)) throw SignatureError("duplicate constant '" + name + "'");
  constants_.push_back(name);
  std::sort(constants_.begin(), constants_.end(),
            [](const std::string& a, const std::string& b) { return natural_less(a, b); });
  rebuild();
}

void Signature::add_predicate(const std::string& name, int arity) {
  if (!is_identifier(name)) throw SignatureError("invalid predicate name '" + name + "'");
  if (arity < 0 || arity > 1)
    throw SignatureError("predicate '" + name + "' has arity " + std::to_string(arity) +
                         "; only 0 and 1 are supported");
  if (this->arity(name)) throw SignatureError("duplicate predicate '" + name + "'");
  predicates_.push_back({name, arity});
  std::sort(predicates_.begin(), predicates_.end());
  if (arity == 1) members_[name];
  rebuild();
}

void Signature::add_member(const std::string& predicate, const std::string& constant) {
  const auto ar = arity(predicate);
  if (!ar) throw SignatureError("unknown predicate '" + predicate + "'");
  if (*ar != 1) throw SignatureError("predicate '" + predicate + "' is not unary");
  if (!has_constant(constant)) throw SignatureError("unknown constant '" + constant + "'");
  auto& m = members_[predicate];
  if (std::find(m.begin(), m.end(), constant) != m.end()) return;
  m.push_back(constant);
  std::sort(m.begin(), m.end(),
            [](const std::string& a, const std::string& b) { return natural_less(a, b); });
  rebuild();
}

std::vector<std::string> Signature::unary_predicates() const {
  std::vector<std::string> out;
  for (const auto& p : predicates_)
    if (p.arity == 1) out.push_back(p.name);
  return out;
}

std::vector<std::string> Signature::propositions() const {
  std::vector<std::string> out;
  for (const auto& p : predicates_)
    if (p.arity == 0) out.push_back(p.name);
  return out;
}

const std::vector<std::string>& Signature::members(const std::string& predicate) const {
  const auto it = members_.find(predicate);
  if (it == members_.end())
    throw SignatureError("'" + predicate + "' is not a unary predicate of the signature");
  return it->second;
}

bool Signature::has_constant(const std::string& c) const {
  return std::find(constants_.begin(), constants_.end(), c) != constants_.end();
}

std::optional<int> Signature::arity(const std::string& predicate) const {
  for (const auto& p : predicates_)
    if (p.name == predicate) return p.arity;
  return std::nullopt;
}

bool Signature::contains(const GroundAtom& a) const { return index_.count(a) != 0; }

std::optional<std::size_t> Signature::index_of(const GroundAtom& a) const {
  const auto it = index_.find(a);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Signature::operator==(const Signature& other) const {
  return constants_ == other.constants_ && predicates_ == other.predicates_ &&
         members_ == other.members_;
}

void Signature::rebuild() {
  herbrand_.clear();
  index_.clear();
  for (const auto& p : predicates_)
    if (p.arity == 0) herbrand_.emplace_back(p.name);
  for (const auto& p : predicates_)
    if (p.arity == 1)
      for (const auto& c : members_.at(p.name)) herbrand_.emplace_back(p.name, c);
  for (std::size_t i = 0; i < herbrand_.size(); ++i) index_[herbrand_[i]] = i;
}

std::vector<GroundAtom> herbrand_base(const Signature& sig) { return sig.herbrand_base(); }

std::vector<GroundAtom> ground_instances(const QuantifiedAtom& q, const Signature& sig) {
  std::vector<GroundAtom> out;
  for (const auto& c : sig.members(q.predicate)) out.emplace_back(q.predicate, c);
  return out;
}

}  // namespace form
