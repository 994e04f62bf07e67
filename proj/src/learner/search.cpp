#include "search.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <string>
#include <unordered_set>

namespace form::detail {

// Points of the traces delivered to one state, grouped into behaviour classes
// of candidate formulas. A point is a maximal run of steps with the same
// literal truth values; a formula's behaviour is the first point at which it
// holds on every segment.
struct Closure {
  std::vector<Seg> segs;
  std::vector<Label> label;
  std::vector<int> trace_len;
  std::vector<int> begin;    // point range of segment s is [begin[s], begin[s+1])
  std::vector<int> step_of;  // first trace step of each point
  std::vector<std::vector<int>> ff;       // class -> first point per segment, -1 if never
  std::vector<std::vector<int>> members;  // class -> formula ids, cheapest first
  std::vector<int> min_lits;
  std::vector<std::vector<std::pair<int, int>>> by_seg;  // segment -> (point, class) by point
};

namespace {

bool mandatory(Label l) { return l != Label::Incomplete; }

template <typename T>
void put(std::string& s, T v) {
  s.append(reinterpret_cast<const char*>(&v), sizeof v);
}

int first_bit(const std::uint64_t* w, int b, int e) {
  int i = b;
  while (i < e) {
    const int wi = i >> 6;
    const std::uint64_t word = w[wi] >> (i & 63);
    if (word != 0) {
      const int pos = i + std::countr_zero(word);
      return pos < e ? pos : -1;
    }
    i = (wi + 1) << 6;
  }
  return -1;
}

}  // namespace

Searcher::Searcher(const Signature& sig, const SearchConfig& cfg,
                   const std::vector<TraceExample>& examples,
                   std::chrono::steady_clock::time_point deadline)
    : sig_(sig), cfg_(cfg), deadline_(deadline) {
  const auto& hb = sig.herbrand_base();
  num_atoms_ = static_cast<int>(hb.size());
  for (int a = 0; a < num_atoms_; ++a) {
    lits_.push_back({LitSpec::Pos, a});
    lits_.push_back({LitSpec::Neg, a});
    lit_objs_.push_back({true, hb[a]});
    lit_objs_.push_back({false, hb[a]});
  }
  const auto unary = sig.unary_predicates();
  for (std::size_t p = 0; p < unary.size(); ++p) {
    std::vector<int> ids;
    for (const auto& c : sig.members(unary[p])) ids.push_back(static_cast<int>(*sig.index_of({unary[p], c})));
    inst_.push_back(ids);
    if (cfg.mode != LearnMode::FirstOrder) continue;
    const int pi = static_cast<int>(p);
    lits_.push_back({LitSpec::Exists, pi});
    lits_.push_back({LitSpec::NotExists, pi});
    lits_.push_back({LitSpec::Forall, pi});
    lits_.push_back({LitSpec::NotForall, pi});
    lit_objs_.push_back({true, QuantifiedAtom{Quantifier::Exists, unary[p]}});
    lit_objs_.push_back({false, QuantifiedAtom{Quantifier::Exists, unary[p]}});
    lit_objs_.push_back({true, QuantifiedAtom{Quantifier::Forall, unary[p]}});
    lit_objs_.push_back({false, QuantifiedAtom{Quantifier::Forall, unary[p]}});
  }

  // Satisfiable conjunctions without implied literals; the complement of
  // literal l is l ^ 1 by construction of the pool.
  const int pool = static_cast<int>(lits_.size());
  std::vector<int> cur;
  auto as_lits = [&](const std::vector<int>& ids) {
    std::vector<Literal> out;
    for (int id : ids) out.push_back(lit_objs_[id]);
    return out;
  };
  auto keep = [&](const std::vector<int>& ids) {
    if (!conjunction_satisfiable(as_lits(ids), sig_)) return false;
    if (ids.size() < 2) return true;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      std::vector<int> probe;
      for (std::size_t j = 0; j < ids.size(); ++j)
        if (j != k) probe.push_back(ids[j]);
      probe.push_back(ids[k] ^ 1);
      if (!conjunction_satisfiable(as_lits(probe), sig_)) return false;
    }
    return true;
  };
  auto grow = [&](auto&& self, int from) -> void {
    for (int l = from; l < pool; ++l) {
      if (!cur.empty() && std::find(cur.begin(), cur.end(), l ^ 1) != cur.end()) continue;
      cur.push_back(l);
      if (keep(cur)) formulas_.push_back(cur);
      if (static_cast<int>(cur.size()) < cfg_.max_literals_per_edge) self(self, l + 1);
      cur.pop_back();
    }
  };
  grow(grow, 0);
  auto quant = [&](const std::vector<int>& f) {
    int q = 0;
    for (int l : f) q += lits_[l].quantified() ? 1 : 0;
    return q;
  };
  std::stable_sort(formulas_.begin(), formulas_.end(),
                   [&](const std::vector<int>& a, const std::vector<int>& b) {
                     if (a.size() != b.size()) return a.size() < b.size();
                     const int qa = quant(a), qb = quant(b);
                     if (qa != qb) return qa < qb;
                     return a < b;
                   });
  for (const auto& f : formulas_) formula_quant_.push_back(quant(f));

  for (const auto& ex : examples) {
    std::vector<std::vector<int>> steps;
    for (const auto& o : ex.observations) {
      std::vector<int> ids;
      for (const auto& a : o.atoms()) {
        const auto idx = sig.index_of(a);
        if (!idx) throw SignatureError("observed atom '" + a.to_string() + "' is not in the signature");
        ids.push_back(static_cast<int>(*idx));
      }
      steps.push_back(std::move(ids));
    }
    traces_.push_back(std::move(steps));
    labels_.push_back(ex.label);
    has_rej_ = has_rej_ || ex.label == Label::Dead;
  }
}

Searcher::~Searcher() = default;

void Searcher::tick() {
  if ((++nodes_ & 1023u) == 0 && std::chrono::steady_clock::now() > deadline_) throw SearchTimeout{};
}

bool Searcher::exclusive(int fa, int fb) {
  if (fa > fb) std::swap(fa, fb);
  const std::uint64_t key = (static_cast<std::uint64_t>(fa) << 32) | static_cast<std::uint32_t>(fb);
  const auto it = excl_.find(key);
  if (it != excl_.end()) return it->second;
  std::vector<Literal> both;
  for (int l : formulas_[fa]) both.push_back(lit_objs_[l]);
  for (int l : formulas_[fb]) both.push_back(lit_objs_[l]);
  const bool ex = !conjunction_satisfiable(both, sig_);
  excl_.emplace(key, ex);
  return ex;
}

std::shared_ptr<const Closure> Searcher::closure_for(const std::vector<Seg>& segs_in) {
  std::string key;
  for (const auto& s : segs_in) {
    put(key, s.trace);
    put(key, s.start);
  }
  if (const auto it = closures_.find(key); it != closures_.end()) return it->second;
  if (closures_.size() > 20000) closures_.clear();

  auto c = std::make_shared<Closure>();
  c->segs = segs_in;
  std::stable_sort(c->segs.begin(), c->segs.end(), [&](const Seg& a, const Seg& b) {
    return mandatory(labels_[a.trace]) > mandatory(labels_[b.trace]);
  });
  const int pool = static_cast<int>(lits_.size());
  const int nseg = static_cast<int>(c->segs.size());
  std::vector<std::uint8_t> truth;  // flat, pool entries per point
  std::vector<int> latest(num_atoms_, -1);
  std::vector<char> seen(num_atoms_);
  std::vector<std::uint8_t> tv(pool), prev(pool);
  for (int s = 0; s < nseg; ++s) {
    const Seg& sg = c->segs[s];
    const auto& tr = traces_[sg.trace];
    c->label.push_back(labels_[sg.trace]);
    c->trace_len.push_back(static_cast<int>(tr.size()));
    c->begin.push_back(static_cast<int>(c->step_of.size()));
    std::fill(seen.begin(), seen.end(), 0);
    std::fill(latest.begin(), latest.end(), -1);
    for (int t = sg.start; t < static_cast<int>(tr.size()); ++t) {
      for (int a : tr[t]) {
        latest[a] = t;
        seen[a] = 1;
      }
      for (int l = 0; l < pool; ++l) {
        const LitSpec ls = lits_[l];
        bool v = false;
        switch (ls.kind) {
          case LitSpec::Pos:
          case LitSpec::Neg:
            v = latest[ls.arg] == t;
            break;
          case LitSpec::Exists:
          case LitSpec::NotExists:
            v = std::any_of(inst_[ls.arg].begin(), inst_[ls.arg].end(),
                            [&](int a) { return latest[a] == t; });
            break;
          case LitSpec::Forall:
          case LitSpec::NotForall:
            v = std::all_of(inst_[ls.arg].begin(), inst_[ls.arg].end(),
                            [&](int a) { return seen[a] != 0; });
            break;
        }
        const bool negated = ls.kind == LitSpec::Neg || ls.kind == LitSpec::NotExists ||
                             ls.kind == LitSpec::NotForall;
        tv[l] = static_cast<std::uint8_t>(v != negated);
      }
      if (t == sg.start || tv != prev) {
        c->step_of.push_back(t);
        truth.insert(truth.end(), tv.begin(), tv.end());
        prev = tv;
      }
    }
  }
  c->begin.push_back(static_cast<int>(c->step_of.size()));
  const int npoints = static_cast<int>(c->step_of.size());
  const int words = (npoints + 63) / 64;
  std::vector<std::vector<std::uint64_t>> col(pool, std::vector<std::uint64_t>(words));
  for (int p = 0; p < npoints; ++p)
    for (int l = 0; l < pool; ++l)
      if (truth[static_cast<std::size_t>(p) * pool + l]) col[l][p >> 6] |= 1ULL << (p & 63);

  std::unordered_map<std::string, int> class_of;
  std::vector<std::uint64_t> acc(words);
  std::vector<int> ff(nseg);
  for (std::size_t f = 0; f < formulas_.size(); ++f) {
    const auto& lits = formulas_[f];
    acc = col[lits[0]];
    bool any = false;
    for (std::size_t k = 1; k < lits.size(); ++k)
      for (int w = 0; w < words; ++w) acc[w] &= col[lits[k]][w];
    for (int w = 0; w < words && !any; ++w) any = acc[w] != 0;
    if (!any) continue;
    for (int s = 0; s < nseg; ++s) ff[s] = first_bit(acc.data(), c->begin[s], c->begin[s + 1]);
    std::string k(reinterpret_cast<const char*>(ff.data()), ff.size() * sizeof(int));
    auto [it, fresh] = class_of.emplace(std::move(k), static_cast<int>(c->ff.size()));
    if (fresh) {
      c->ff.push_back(ff);
      c->members.emplace_back();
      c->min_lits.push_back(static_cast<int>(lits.size()));
    }
    c->members[it->second].push_back(static_cast<int>(f));
  }
  c->by_seg.assign(nseg, {});
  for (int cls = 0; cls < static_cast<int>(c->ff.size()); ++cls)
    for (int s = 0; s < nseg; ++s)
      if (c->ff[cls][s] >= 0) c->by_seg[s].emplace_back(c->ff[cls][s], cls);
  for (auto& v : c->by_seg) std::sort(v.begin(), v.end());
  closures_.emplace(std::move(key), c);
  return c;
}

// Enumerates the edge sets leaving state i at the level of behaviour classes.
// Segments are visited in order; each one either keeps its current
// departure (or stays, if incomplete) or receives a new edge that fires
// strictly earlier on it. Decisions on earlier segments are never undone by
// later edges, so every irredundant edge set is produced.
struct Searcher::Enum {
  Searcher& S;
  const Closure& C;
  int i;
  const Pending& pend;
  int budget;
  int nseg;
  std::vector<int> targets;
  std::vector<std::pair<int, int>> edges;  // (target, class)
  std::vector<int> per_target;
  std::vector<int> dep_point, dep_target, commit;
  int lits_lb = 0;
  std::optional<Solution> best;
  std::unordered_set<std::string> done;

  Enum(Searcher& s, const Closure& c, int state, const Pending& p, int b)
      : S(s), C(c), i(state), pend(p), budget(b), nseg(static_cast<int>(c.segs.size())) {
    for (int t = i + 1; t < S.n_; ++t) targets.push_back(t);
    per_target.assign(S.n_, 0);
    dep_point.assign(nseg, -1);
    dep_target.assign(nseg, -1);
    commit.assign(nseg, -2);
  }

  int bound() const { return best ? best->lits : budget; }

  bool valid(int s, int target, int point) const {
    if (target == S.m_) return C.label[s] == Label::Goal;
    if (target == S.m_ + 1) return C.label[s] == Label::Dead;
    return C.label[s] == Label::Incomplete || C.step_of[point] + 1 < C.trace_len[s];
  }

  bool compatible(int cls, int target, int k) const {
    const auto& f = C.ff[cls];
    for (int s = 0; s < k; ++s) {
      if (f[s] < 0) continue;
      if (commit[s] == -1) return false;
      if (f[s] < commit[s]) return false;
      if (f[s] == commit[s] && target != dep_target[s]) return false;
    }
    for (const auto& [t2, c2] : edges) {
      if (c2 == cls) return false;
      if (t2 == target) continue;
      const auto& g = C.ff[c2];
      for (int s = 0; s < nseg; ++s)
        if (f[s] >= 0 && f[s] == g[s]) return false;
    }
    return true;
  }

  void dfs(int k) {
    S.tick();
    if (k == nseg) {
      emit();
      return;
    }
    if (dep_point[k] < 0) {
      if (C.label[k] == Label::Incomplete) {
        commit[k] = -1;
        dfs(k + 1);
        commit[k] = -2;
      }
    } else if (valid(k, dep_target[k], dep_point[k])) {
      commit[k] = dep_point[k];
      dfs(k + 1);
      commit[k] = -2;
    }
    for (const auto& [p, cls] : C.by_seg[k]) {
      if (dep_point[k] >= 0 && p >= dep_point[k]) break;
      if (lits_lb + C.min_lits[cls] > bound()) continue;
      for (const int t : targets) {
        if (per_target[t] >= S.cfg_.kappa || !valid(k, t, p) || !compatible(cls, t, k)) continue;
        std::vector<std::tuple<int, int, int>> undo;
        bool fatal = false;
        const auto& f = C.ff[cls];
        for (int s = k; s < nseg; ++s) {
          if (f[s] < 0 || (dep_point[s] >= 0 && f[s] >= dep_point[s])) continue;
          undo.emplace_back(s, dep_point[s], dep_target[s]);
          dep_point[s] = f[s];
          dep_target[s] = t;
          if (s > k && f[s] == C.begin[s] && !valid(s, t, f[s])) fatal = true;
        }
        if (!fatal) {
          edges.emplace_back(t, cls);
          ++per_target[t];
          lits_lb += C.min_lits[cls];
          commit[k] = p;
          dfs(k + 1);
          commit[k] = -2;
          lits_lb -= C.min_lits[cls];
          --per_target[t];
          edges.pop_back();
        }
        for (const auto& [s, op, ot] : undo) {
          dep_point[s] = op;
          dep_target[s] = ot;
        }
      }
    }
  }

  // Cheapest formula per edge such that edges to different targets are
  // pairwise exclusive. Returns (lits, quant, formula ids).
  bool select(std::vector<int>& chosen, int& lits, int& quant) {
    const int k = static_cast<int>(edges.size());
    std::vector<int> rest_l(k + 1, 0), rest_q(k + 1, 0);
    for (int e = k - 1; e >= 0; --e) {
      const int f0 = C.members[edges[e].second][0];
      rest_l[e] = rest_l[e + 1] + static_cast<int>(S.formulas_[f0].size());
      rest_q[e] = rest_q[e + 1] + S.formula_quant_[f0];
    }
    int best_l = bound() + 1, best_q = 0;
    bool found = false;
    std::vector<int> cur(k);
    auto rec = [&](auto&& self, int e, int l, int q) -> void {
      if (e == k) {
        if (!found || std::pair(l, q) < std::pair(best_l, best_q)) {
          found = true;
          best_l = l;
          best_q = q;
          chosen = cur;
        }
        return;
      }
      for (const int f : C.members[edges[e].second]) {
        const int fl = static_cast<int>(S.formulas_[f].size()), fq = S.formula_quant_[f];
        const std::pair tot(l + fl + rest_l[e + 1], q + fq + rest_q[e + 1]);
        if (found ? tot >= std::pair(best_l, best_q) : tot.first > best_l - 1) break;
        bool ok = true;
        for (int j = 0; j < e && ok; ++j)
          if (edges[j].first != edges[e].first) ok = S.exclusive(cur[j], f);
        if (!ok) continue;
        cur[e] = f;
        self(self, e + 1, l + fl, q + fq);
      }
    };
    rec(rec, 0, 0, 0);
    lits = best_l;
    quant = best_q;
    return found;
  }

  void emit() {
    std::vector<std::pair<int, int>> sorted = edges;
    std::sort(sorted.begin(), sorted.end());
    std::string sig;
    for (const auto& [t, c] : sorted) {
      put(sig, t);
      put(sig, c);
    }
    if (!done.insert(sig).second) return;
    std::vector<int> chosen;
    int lits = 0, quant = 0;
    if (!select(chosen, lits, quant) || lits > bound()) return;

    Pending next = pend;
    for (int s = 0; s < nseg; ++s) {
      if (commit[s] < 0) continue;
      const int t = dep_target[s];
      if (t >= S.m_) continue;
      next.entered[t] = 1;
      const int step = C.step_of[commit[s]];
      if (step + 1 < C.trace_len[s]) next.segs[t].push_back({C.segs[s].trace, step + 1});
    }
    for (int t = i + 1; t < S.m_; ++t) std::sort(next.segs[t].begin(), next.segs[t].end());
    auto sub = S.solve_state(i + 1, next, bound() - lits);
    if (!sub) return;
    const int tl = lits + sub->lits, tq = quant + sub->quant;
    if (best && std::pair(tl, tq) >= std::pair(best->lits, best->quant)) return;
    Solution sol{tl, tq, {}};
    for (std::size_t e = 0; e < edges.size(); ++e) sol.edges.push_back({i, edges[e].first, chosen[e]});
    sol.edges.insert(sol.edges.end(), sub->edges.begin(), sub->edges.end());
    best = std::move(sol);
  }
};

std::optional<Solution> Searcher::solve_state(int i, const Pending& pend, int budget) {
  if (i == m_) return Solution{};
  if (!pend.entered[i]) return std::nullopt;  // an unused state means fewer states suffice
  std::string key;
  put(key, i);
  for (int j = i; j < m_; ++j) {
    put(key, static_cast<int>(pend.entered[j]));
    put(key, static_cast<int>(pend.segs[j].size()));
    for (const auto& s : pend.segs[j]) {
      put(key, s.trace);
      put(key, s.start);
    }
  }
  if (const auto it = memo_.find(key); it != memo_.end()) {
    const Memo& mm = it->second;
    if (mm.best) return mm.best->lits <= budget ? mm.best : std::nullopt;
    if (budget <= mm.failed_upto) return std::nullopt;
  }
  tick();
  std::optional<Solution> result;
  if (pend.segs[i].empty()) {
    result = solve_state(i + 1, pend, budget);
  } else {
    const auto closure = closure_for(pend.segs[i]);
    Enum e(*this, *closure, i, pend, budget);
    e.dfs(0);
    result = std::move(e.best);
  }
  Memo& mm = memo_[key];
  if (result)
    mm.best = result;
  else
    mm.failed_upto = std::max(mm.failed_upto, budget);
  return result;
}

std::optional<Solution> Searcher::solve(const std::vector<int>& subset, int n) {
  n_ = n;
  m_ = n - 1 - (has_rej_ ? 1 : 0);
  if (m_ < 1) return std::nullopt;
  memo_.clear();
  Pending root;
  root.segs.assign(m_, {});
  root.entered.assign(m_, 0);
  root.entered[0] = 1;
  for (int idx : subset)
    if (!traces_[idx].empty()) root.segs[0].push_back({idx, 0});
  std::sort(root.segs[0].begin(), root.segs[0].end());
  int max_budget = 0;
  for (int i = 0; i < m_; ++i) max_budget += (n_ - 1 - i) * cfg_.kappa * cfg_.max_literals_per_edge;
  for (int b = 0; b <= max_budget; ++b)
    if (auto s = solve_state(0, root, b)) return s;
  return std::nullopt;
}

Form Searcher::build(const Solution& s, int n) const {
  const int m = n - 1 - (has_rej_ ? 1 : 0);
  std::vector<std::string> names;
  for (int i = 0; i < m; ++i) names.push_back("u" + std::to_string(i));
  names.push_back("u_acc");
  if (has_rej_) names.push_back("u_rej");
  std::vector<Edge> edges;
  std::vector<std::vector<int>> next_index(n, std::vector<int>(n, 0));
  for (const auto& e : s.edges) {
    std::vector<Literal> lits;
    for (int l : formulas_[e.formula]) lits.push_back(lit_objs_[l]);
    edges.push_back({e.from, e.to, next_index[e.from][e.to]++, conjunction_of(lits)});
  }
  return Form(sig_, names, 0, m, has_rej_ ? std::optional<StateId>(m + 1) : std::nullopt, edges);
}

}  // namespace form::detail
