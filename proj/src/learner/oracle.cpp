// Brute-force reference for learn(): every edge assignment over the same
// state layout, in cost order, checked by direct simulation.
#include <algorithm>
#include <string>

#include "form/learner.hpp"

namespace form {

namespace {

struct Slot {
  int from;
  int to;
  int parallel;  // 0..kappa-1
};

}  // namespace

std::optional<Form> oracle_minimal(const std::vector<TraceExample>& examples, const Signature& sig,
                                   const OracleBounds& bounds) {
  if (sig.herbrand_base().size() > 6) throw Error("oracle: Herbrand base larger than 6");
  if (bounds.max_nonterminal_states > 3 || bounds.max_nonterminal_states < 1 ||
      bounds.max_literals_per_edge > 2 || bounds.max_literals_per_edge < 1 || bounds.kappa < 1)
    throw Error("oracle: bounds too large");
  if (examples.empty()) return dummy_form(sig);
  for (const auto& t : examples)
    if (t.observations.empty() && t.label != Label::Incomplete) return std::nullopt;

  const bool has_rej = std::any_of(examples.begin(), examples.end(),
                                   [](const TraceExample& t) { return t.label == Label::Dead; });

  const auto pool = literal_pool(sig, bounds.mode);
  std::vector<std::vector<Literal>> conj;
  for (std::size_t a = 0; a < pool.size(); ++a) {
    if (conjunction_satisfiable({pool[a]}, sig)) conj.push_back({pool[a]});
    if (bounds.max_literals_per_edge < 2) continue;
    for (std::size_t b = a + 1; b < pool.size(); ++b) {
      if (pool[a].atom == pool[b].atom) continue;
      if (conjunction_satisfiable({pool[a], pool[b]}, sig)) conj.push_back({pool[a], pool[b]});
    }
  }
  std::vector<Formula> formulas;
  std::vector<int> size, quant;
  for (const auto& c : conj) {
    formulas.push_back(conjunction_of(c));
    size.push_back(static_cast<int>(c.size()));
    quant.push_back(static_cast<int>(std::count_if(c.begin(), c.end(),
                                                   [](const Literal& l) { return l.is_quantified(); })));
  }
  const int nf = static_cast<int>(formulas.size());
  std::vector<std::vector<char>> excl(nf, std::vector<char>(nf));
  for (int a = 0; a < nf; ++a)
    for (int b = a; b < nf; ++b)
      excl[a][b] = excl[b][a] = mutually_exclusive(formulas[a], formulas[b], sig) ? 1 : 0;

  // sat[f][trace][start * len + t]: formula f on the buffer of steps start..t.
  std::vector<std::vector<std::vector<char>>> sat(nf);
  for (int f = 0; f < nf; ++f) {
    for (const auto& ex : examples) {
      const int len = static_cast<int>(ex.observations.size());
      std::vector<char> v(static_cast<std::size_t>(len) * len);
      for (int s = 0; s < len; ++s) {
        Buffer b;
        for (int t = s; t < len; ++t) {
          b.append(ex.observations[t]);
          v[s * len + t] = satisfies(b, formulas[f], sig) ? 1 : 0;
        }
      }
      sat[f].push_back(std::move(v));
    }
  }

  for (int m = 1; m <= bounds.max_nonterminal_states; ++m) {
    const int acc = m, rej = m + 1, n = m + 1 + (has_rej ? 1 : 0);
    std::vector<Slot> slots;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = 0; k < bounds.kappa; ++k) slots.push_back({i, j, k});
    const int ns = static_cast<int>(slots.size());
    std::vector<int> assign(ns, -1);
    std::vector<int> trace_order(examples.size());
    for (std::size_t i = 0; i < trace_order.size(); ++i) trace_order[i] = static_cast<int>(i);

    auto accepts = [&](int x) {
      const auto& ex = examples[x];
      const int len = static_cast<int>(ex.observations.size());
      int u = 0, s = 0;
      for (int t = 0; t < len && u < m; ++t) {
        for (int k = 0; k < ns; ++k) {
          if (slots[k].from != u || assign[k] < 0 || !sat[assign[k]][x][s * len + t]) continue;
          u = slots[k].to;
          s = t + 1;
          break;
        }
      }
      switch (ex.label) {
        case Label::Goal: return u == acc;
        case Label::Dead: return has_rej && u == rej;
        case Label::Incomplete: return u < m;
      }
      return false;
    };
    auto all_accept = [&] {
      for (std::size_t p = 0; p < trace_order.size(); ++p) {
        if (accepts(trace_order[p])) continue;
        std::rotate(trace_order.begin(), trace_order.begin() + p, trace_order.begin() + p + 1);
        return false;
      }
      return true;
    };

    const int max_l = ns * bounds.max_literals_per_edge;
    for (int budget = 0; budget <= max_l; ++budget) {
      int best_q = -1;
      std::vector<int> best;
      auto rec = [&](auto&& self, int k, int left, int q) -> void {
        if (best_q >= 0 && q >= best_q) return;
        if (k == ns) {
          if (left == 0 && all_accept()) {
            best_q = q;
            best = assign;
          }
          return;
        }
        const Slot& sl = slots[k];
        // Parallel edges fill in order with increasing formula ids.
        const bool prev_used = sl.parallel == 0 || assign[k - 1] >= 0;
        assign[k] = -1;
        self(self, k + 1, left, q);
        if (!prev_used) return;
        const int lo = sl.parallel == 0 ? 0 : assign[k - 1] + 1;
        for (int f = lo; f < nf; ++f) {
          if (size[f] > left) continue;
          bool ok = true;
          for (int j = 0; j < k && ok; ++j)
            if (assign[j] >= 0 && slots[j].from == sl.from && slots[j].to != sl.to)
              ok = excl[assign[j]][f] != 0;
          if (!ok) continue;
          assign[k] = f;
          self(self, k + 1, left - size[f], q + quant[f]);
        }
        assign[k] = -1;
      };
      rec(rec, 0, budget, 0);
      if (best_q < 0) continue;
      std::vector<std::string> names;
      for (int i = 0; i < m; ++i) names.push_back("u" + std::to_string(i));
      names.push_back("u_acc");
      if (has_rej) names.push_back("u_rej");
      std::vector<Edge> edges;
      for (int k = 0; k < ns; ++k)
        if (best[k] >= 0) edges.push_back({slots[k].from, slots[k].to, slots[k].parallel, formulas[best[k]]});
      return Form(sig, names, 0, acc, has_rej ? std::optional<StateId>(rej) : std::nullopt, edges);
    }
  }
  return std::nullopt;
}

}  // namespace form
