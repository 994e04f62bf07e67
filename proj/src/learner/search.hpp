// Internal machinery of learn(): compiled traces and the exact minimal-machine
// search over a fixed number of states.
#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "form/learner.hpp"

namespace form::detail {

struct SearchTimeout {};

struct LitSpec {
  enum Kind : std::uint8_t { Pos, Neg, Exists, NotExists, Forall, NotForall };
  Kind kind;
  int arg;  // atom id for Pos/Neg, unary predicate index otherwise
  bool quantified() const { return kind >= Exists; }
};

struct Seg {
  int trace;
  int start;
  auto operator<=>(const Seg&) const = default;
};

struct SolvedEdge {
  int from;
  int to;
  int formula;
};

struct Solution {
  int lits = 0;
  int quant = 0;
  std::vector<SolvedEdge> edges;
};

struct Closure;

class Searcher {
 public:
  Searcher(const Signature& sig, const SearchConfig& cfg, const std::vector<TraceExample>& examples,
           std::chrono::steady_clock::time_point deadline);
  ~Searcher();

  // Cheapest machine with exactly n states consistent with the examples in
  // `subset`; nullopt when none exists. Throws SearchTimeout.
  std::optional<Solution> solve(const std::vector<int>& subset, int n);
  Form build(const Solution& s, int n) const;
  bool has_reject() const { return has_rej_; }
  std::uint64_t nodes() const { return nodes_; }
  std::size_t formula_count() const { return formulas_.size(); }

 private:
  struct Pending {
    std::vector<std::vector<Seg>> segs;
    std::vector<char> entered;
  };
  struct Memo {
    std::optional<Solution> best;
    int failed_upto = -1;
  };
  struct Enum;

  std::optional<Solution> solve_state(int i, const Pending& pend, int budget);
  std::shared_ptr<const Closure> closure_for(const std::vector<Seg>& segs);
  bool exclusive(int fa, int fb);
  void tick();

  const Signature& sig_;
  SearchConfig cfg_;
  std::chrono::steady_clock::time_point deadline_;
  int num_atoms_ = 0;
  std::vector<std::vector<int>> inst_;
  std::vector<LitSpec> lits_;
  std::vector<Literal> lit_objs_;
  std::vector<std::vector<int>> formulas_;
  std::vector<int> formula_quant_;
  std::vector<std::vector<std::vector<int>>> traces_;
  std::vector<Label> labels_;
  bool has_rej_ = false;

  int n_ = 0, m_ = 0;  // states, intermediates (u0..u_{m-1})
  std::unordered_map<std::string, Memo> memo_;
  std::unordered_map<std::string, std::shared_ptr<const Closure>> closures_;
  std::unordered_map<std::uint64_t, bool> excl_;
  std::uint64_t nodes_ = 0;
};

}  // namespace form::detail
