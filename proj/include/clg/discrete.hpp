#pragma once

// Exact inference over the discrete part of a network: variable
// elimination onto a kept set, clique trees, calibration, forward sampling
// and anytime enumeration of configurations in order of probability.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "clg/errors.hpp"
#include "clg/gaussian.hpp"
#include "clg/model.hpp"

namespace clg {

/// Table over discrete variables, vars sorted by node id, row-major (last
/// variable fastest).
struct Factor {
  std::vector<int> vars;
  std::vector<int> cards;
  std::vector<double> table;

  std::size_t size() const { return table.size(); }

  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(vars.size());
    std::size_t acc = 1;
    for (std::size_t i = vars.size(); i-- > 0;) {
      s[i] = acc;
      acc *= static_cast<std::size_t>(cards[i]);
    }
    return s;
  }

  /// Entry selected by a node-indexed assignment.
  double at(const std::vector<int>& full) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < vars.size(); ++i) idx = idx * cards[i] + static_cast<std::size_t>(full[vars[i]]);
    return table[idx];
  }
};

namespace disc_detail {

// Visits every assignment of (vars, cards) in row-major order, handing the
// callback the running offsets into each operand described by `strides`.
template <class F>
void for_each_entry(const std::vector<int>& cards, const std::vector<std::vector<std::size_t>>& strides, F&& f) {
  const std::size_t n = cards.size();
  std::size_t total = 1;
  for (int c : cards) total *= static_cast<std::size_t>(c);
  std::vector<int> digit(n, 0);
  std::vector<std::size_t> off(strides.size(), 0);
  for (std::size_t e = 0; e < total; ++e) {
    f(e, off, digit);
    for (std::size_t i = n; i-- > 0;) {
      if (++digit[i] < cards[i]) {
        for (std::size_t k = 0; k < strides.size(); ++k) off[k] += strides[k][i];
        break;
      }
      for (std::size_t k = 0; k < strides.size(); ++k) off[k] -= strides[k][i] * static_cast<std::size_t>(cards[i] - 1);
      digit[i] = 0;
    }
  }
}

// Strides of `f` laid over the variable list `vars` (0 where absent).
inline std::vector<std::size_t> strides_over(const Factor& f, const std::vector<int>& vars) {
  auto fs = f.strides();
  std::vector<std::size_t> out(vars.size(), 0);
  for (std::size_t i = 0, j = 0; i < vars.size(); ++i) {
    while (j < f.vars.size() && f.vars[j] < vars[i]) ++j;
    if (j < f.vars.size() && f.vars[j] == vars[i]) out[i] = fs[j];
  }
  return out;
}

inline void union_scope(const Factor& a, const Factor& b, std::vector<int>& vars, std::vector<int>& cards) {
  vars.clear();
  cards.clear();
  std::size_t i = 0, j = 0;
  while (i < a.vars.size() || j < b.vars.size()) {
    if (j == b.vars.size() || (i < a.vars.size() && a.vars[i] < b.vars[j])) {
      vars.push_back(a.vars[i]);
      cards.push_back(a.cards[i++]);
    } else if (i == a.vars.size() || b.vars[j] < a.vars[i]) {
      vars.push_back(b.vars[j]);
      cards.push_back(b.cards[j++]);
    } else {
      vars.push_back(a.vars[i]);
      cards.push_back(a.cards[i]);
      ++i;
      ++j;
    }
  }
}

}  // namespace disc_detail

inline Factor factor_product(const Factor& a, const Factor& b) {
  Factor out;
  disc_detail::union_scope(a, b, out.vars, out.cards);
  std::size_t total = 1;
  for (int c : out.cards) total *= static_cast<std::size_t>(c);
  out.table.resize(total);
  std::vector<std::vector<std::size_t>> st{disc_detail::strides_over(a, out.vars),
                                           disc_detail::strides_over(b, out.vars)};
  disc_detail::for_each_entry(out.cards, st, [&](std::size_t e, const std::vector<std::size_t>& off, const std::vector<int>&) {
    out.table[e] = a.table[off[0]] * b.table[off[1]];
  });
  return out;
}

/// Sums (or maximizes, when `max` is set) `var` out of `f`.
inline Factor factor_eliminate(const Factor& f, int var, bool max = false) {
  Factor out;
  for (std::size_t i = 0; i < f.vars.size(); ++i) {
    if (f.vars[i] == var) continue;
    out.vars.push_back(f.vars[i]);
    out.cards.push_back(f.cards[i]);
  }
  std::size_t total = 1;
  for (int c : out.cards) total *= static_cast<std::size_t>(c);
  out.table.assign(total, 0.0);
  std::vector<std::vector<std::size_t>> st{disc_detail::strides_over(out, f.vars)};
  disc_detail::for_each_entry(f.cards, st, [&](std::size_t e, const std::vector<std::size_t>& off, const std::vector<int>&) {
    if (max)
      out.table[off[0]] = std::max(out.table[off[0]], f.table[e]);
    else
      out.table[off[0]] += f.table[e];
  });
  return out;
}

/// Zeroes every entry that disagrees with var = state.
inline void factor_reduce(Factor& f, int var, int state) {
  auto it = std::find(f.vars.begin(), f.vars.end(), var);
  if (it == f.vars.end()) return;
  const std::size_t pos = static_cast<std::size_t>(it - f.vars.begin());
  const std::size_t stride = f.strides()[pos];
  const std::size_t card = static_cast<std::size_t>(f.cards[pos]);
  for (std::size_t e = 0; e < f.table.size(); ++e)
    if ((e / stride) % card != static_cast<std::size_t>(state)) f.table[e] = 0.0;
}

/// CPT of a discrete node as a factor over (parents, node).
inline Factor cpt_factor(const Model& m, int node) {
  const auto& n = m.node(node);
  std::vector<int> vars = n.dparents;
  vars.push_back(node);
  std::vector<int> cards;
  for (int v : vars) cards.push_back(m.card(v));
  // Reorder into sorted-variable layout.
  std::vector<int> perm(vars.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) { return vars[a] < vars[b]; });
  Factor f;
  for (int p : perm) {
    f.vars.push_back(vars[p]);
    f.cards.push_back(cards[p]);
  }
  f.table.resize(n.cpt.size());
  auto fs = f.strides();
  std::vector<std::size_t> src_to_dst(vars.size());
  for (std::size_t k = 0; k < perm.size(); ++k) src_to_dst[perm[k]] = fs[k];
  std::vector<std::vector<std::size_t>> st{src_to_dst};
  disc_detail::for_each_entry(cards, st, [&](std::size_t e, const std::vector<std::size_t>& off, const std::vector<int>&) {
    f.table[off[0]] = n.cpt[e];
  });
  return f;
}

namespace disc_detail {

/// Min-fill elimination order over `candidates` on the interaction graph of
/// `scopes`; ties go to the lowest node id.
inline std::vector<int> min_fill_order(const std::vector<std::vector<int>>& scopes, std::vector<int> candidates,
                                       std::map<int, std::set<int>>* graph_out = nullptr) {
  std::map<int, std::set<int>> adj;
  for (const auto& s : scopes)
    for (int a : s) {
      adj[a];
      for (int b : s)
        if (a != b) adj[a].insert(b);
    }
  for (int c : candidates) adj[c];
  std::sort(candidates.begin(), candidates.end());
  std::set<int> remaining(candidates.begin(), candidates.end());
  std::vector<int> order;
  while (!remaining.empty()) {
    int best = -1;
    std::size_t best_fill = SIZE_MAX;
    for (int v : remaining) {
      const auto& nb = adj[v];
      std::size_t fill = 0;
      for (auto i = nb.begin(); i != nb.end(); ++i)
        for (auto j = std::next(i); j != nb.end(); ++j)
          if (!adj[*i].count(*j)) ++fill;
      if (fill < best_fill) {
        best_fill = fill;
        best = v;
      }
    }
    const auto nb = adj[best];
    for (int a : nb)
      for (int b : nb)
        if (a != b) adj[a].insert(b);
    for (int a : nb) adj[a].erase(best);
    adj.erase(best);
    remaining.erase(best);
    order.push_back(best);
  }
  if (graph_out) *graph_out = std::move(adj);
  return order;
}

inline void eliminate_into(std::vector<Factor>& factors, int var) {
  std::vector<Factor> keep, bucket;
  for (auto& f : factors) {
    if (std::binary_search(f.vars.begin(), f.vars.end(), var))
      bucket.push_back(std::move(f));
    else
      keep.push_back(std::move(f));
  }
  if (!bucket.empty()) {
    Factor prod = bucket.front();
    for (std::size_t i = 1; i < bucket.size(); ++i) prod = factor_product(prod, bucket[i]);
    keep.push_back(factor_eliminate(prod, var));
  }
  factors = std::move(keep);
}

}  // namespace disc_detail

/// Variable elimination of every discrete node outside `keep` after applying
/// discrete evidence. The product of the returned factors is proportional to
/// P(keep, d). Throws ImpossibleEvidenceError when P(d) = 0.
inline std::vector<Factor> restrict_to(const Model& m, const std::vector<int>& keep,
                                       const std::map<int, int>& evidence) {
  std::vector<Factor> factors;
  for (int v : m.discrete_ids()) {
    Factor f = cpt_factor(m, v);
    for (const auto& [var, st] : evidence) factor_reduce(f, var, st);
    factors.push_back(std::move(f));
  }
  std::set<int> keep_set(keep.begin(), keep.end());
  for (int v : keep)
    if (!m.is_discrete(v)) throw InputError("restrict_to: '" + m.name(v) + "' is not discrete");
  std::vector<int> elim;
  for (int v : m.discrete_ids())
    if (!keep_set.count(v)) elim.push_back(v);
  std::vector<std::vector<int>> scopes;
  for (const auto& f : factors) scopes.push_back(f.vars);
  for (int v : disc_detail::min_fill_order(scopes, elim)) disc_detail::eliminate_into(factors, v);

  // Fold constants together; a zero anywhere means the evidence is impossible.
  std::vector<Factor> out;
  double constant = 1.0;
  for (auto& f : factors) {
    if (f.vars.empty())
      constant *= f.table[0];
    else
      out.push_back(std::move(f));
  }
  bool any_mass = constant > 0.0;
  if (any_mass) {
    // Total mass of the remaining product.
    std::vector<Factor> copy = out;
    std::vector<std::vector<int>> sc;
    for (const auto& f : copy) sc.push_back(f.vars);
    std::vector<int> rest(keep_set.begin(), keep_set.end());
    for (int v : disc_detail::min_fill_order(sc, rest)) disc_detail::eliminate_into(copy, v);
    double z = 1.0;
    for (const auto& f : copy) z *= f.table[0];
    any_mass = z > 0.0;
  }
  if (!any_mass) throw ImpossibleEvidenceError("discrete evidence has zero probability");
  return out;
}

// ---------------------------------------------------------------------------
// clique tree

struct Clique {
  std::vector<int> vars;  // sorted node ids
  std::vector<int> cards;
  std::vector<std::size_t> strides;
  std::vector<double> table;  // potential, later the normalized belief
  int parent = -1;
  std::vector<int> children;
  std::vector<int> sep;        // positions (into vars) of the variables shared with the parent
  std::vector<double> sep_belief;  // normalized marginal over sep, row-major

  std::size_t size() const { return table.size(); }
};

struct CliqueTree {
  std::size_t num_nodes = 0;  // node-id space of assignments
  std::vector<int> vars;      // sorted
  std::vector<Clique> cliques;
  std::vector<int> roots;
  std::vector<int> order;     // parents before children

  std::size_t total_entries() const {
    std::size_t t = 0;
    for (const auto& c : cliques) t += c.size();
    return t;
  }
  std::size_t num_cliques() const { return cliques.size(); }
};

/// Junction tree whose clique potentials hold the product of the factors.
/// `cards_of` maps node ids to cardinalities.
inline CliqueTree build_clique_tree(const std::vector<Factor>& factors, std::size_t num_nodes,
                                    std::size_t max_entries = SIZE_MAX) {
  CliqueTree t;
  t.num_nodes = num_nodes;
  std::map<int, int> card;
  std::vector<std::vector<int>> scopes;
  for (const auto& f : factors) {
    scopes.push_back(f.vars);
    for (std::size_t i = 0; i < f.vars.size(); ++i) card[f.vars[i]] = f.cards[i];
  }
  for (const auto& [v, c] : card) t.vars.push_back(v);

  // Elimination cliques.
  std::map<int, std::set<int>> adj;
  for (const auto& s : scopes)
    for (int a : s) {
      adj[a];
      for (int b : s)
        if (a != b) adj[a].insert(b);
    }
  std::vector<std::set<int>> raw;
  {
    auto order = disc_detail::min_fill_order(scopes, t.vars);
    auto g = adj;
    for (int v : order) {
      std::set<int> c = g[v];
      c.insert(v);
      raw.push_back(c);
      const auto nb = g[v];
      for (int a : nb)
        for (int b : nb)
          if (a != b) g[a].insert(b);
      for (int a : nb) g[a].erase(v);
      g.erase(v);
    }
  }
  // Keep maximal cliques, in order of first appearance.
  std::vector<std::set<int>> maximal;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    bool sub = false;
    for (std::size_t j = 0; j < raw.size() && !sub; ++j) {
      if (i == j) continue;
      if (raw[j].size() > raw[i].size() || (raw[j].size() == raw[i].size() && j < i))
        sub = std::includes(raw[j].begin(), raw[j].end(), raw[i].begin(), raw[i].end());
    }
    if (!sub) maximal.push_back(raw[i]);
  }
  std::size_t projected = 0;
  for (const auto& c : maximal) {
    std::size_t s = 1;
    for (int v : c) s *= static_cast<std::size_t>(card[v]);
    projected += s;
  }
  if (projected > max_entries)
    throw CapExceededError("clique tree would hold " + std::to_string(projected) + " entries");

  for (const auto& c : maximal) {
    Clique q;
    q.vars.assign(c.begin(), c.end());
    for (int v : q.vars) q.cards.push_back(card[v]);
    Factor tmp{q.vars, q.cards, {}};
    q.strides = tmp.strides();
    std::size_t s = 1;
    for (int cd : q.cards) s *= static_cast<std::size_t>(cd);
    q.table.assign(s, 1.0);
    t.cliques.push_back(std::move(q));
  }

  // Maximum spanning forest on sepset size (Kruskal, deterministic ties).
  struct Edge {
    std::size_t w;
    int a, b;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < t.cliques.size(); ++i)
    for (std::size_t j = i + 1; j < t.cliques.size(); ++j) {
      std::vector<int> inter;
      std::set_intersection(t.cliques[i].vars.begin(), t.cliques[i].vars.end(), t.cliques[j].vars.begin(),
                            t.cliques[j].vars.end(), std::back_inserter(inter));
      if (!inter.empty()) edges.push_back({inter.size(), static_cast<int>(i), static_cast<int>(j)});
    }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.w > y.w; });
  std::vector<int> uf(t.cliques.size());
  std::iota(uf.begin(), uf.end(), 0);
  auto find = [&](int x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  };
  std::vector<std::vector<int>> nbrs(t.cliques.size());
  for (const auto& e : edges) {
    int ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    uf[ra] = rb;
    nbrs[e.a].push_back(e.b);
    nbrs[e.b].push_back(e.a);
  }
  // Orient from the lowest-index clique of each component.
  std::vector<char> seen(t.cliques.size(), 0);
  for (std::size_t r = 0; r < t.cliques.size(); ++r) {
    if (seen[r]) continue;
    t.roots.push_back(static_cast<int>(r));
    std::vector<int> queue{static_cast<int>(r)};
    seen[r] = 1;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      int c = queue[qi];
      t.order.push_back(c);
      std::sort(nbrs[c].begin(), nbrs[c].end());
      for (int nb : nbrs[c]) {
        if (seen[nb]) continue;
        seen[nb] = 1;
        t.cliques[nb].parent = c;
        t.cliques[c].children.push_back(nb);
        queue.push_back(nb);
      }
    }
  }
  for (auto& c : t.cliques) {
    if (c.parent < 0) continue;
    const auto& pv = t.cliques[c.parent].vars;
    for (std::size_t i = 0; i < c.vars.size(); ++i)
      if (std::binary_search(pv.begin(), pv.end(), c.vars[i])) c.sep.push_back(static_cast<int>(i));
  }

  // Assign factors to the first clique covering them.
  for (const auto& f : factors) {
    int home = -1;
    for (std::size_t i = 0; i < t.cliques.size() && home < 0; ++i)
      if (std::includes(t.cliques[i].vars.begin(), t.cliques[i].vars.end(), f.vars.begin(), f.vars.end()))
        home = static_cast<int>(i);
    if (home < 0) throw StructuralError("clique tree does not cover a factor scope");
    auto& c = t.cliques[home];
    std::vector<std::vector<std::size_t>> st{disc_detail::strides_over(f, c.vars)};
    disc_detail::for_each_entry(c.cards, st, [&](std::size_t e, const std::vector<std::size_t>& off, const std::vector<int>&) {
      c.table[e] *= f.table[off[0]];
    });
  }
  return t;
}

/// Calibrated tree: clique tables are normalized beliefs P(C | d), and every
/// non-root clique carries its sepset belief. `potentials` keeps the
/// uncalibrated tables.
struct CalibratedTree {
  CliqueTree tree;
  std::vector<std::vector<double>> potentials;
  double log_z = 0.0;  // log of the total potential mass

  const std::vector<int>& vars() const { return tree.vars; }
};

namespace disc_detail {

inline std::size_t sep_size(const Clique& c) {
  std::size_t s = 1;
  for (int p : c.sep) s *= static_cast<std::size_t>(c.cards[p]);
  return s;
}

// Offset into a row-major sep table for clique entry digits.
inline std::vector<std::size_t> sep_strides(const Clique& c) {
  std::vector<std::size_t> st(c.vars.size(), 0);
  std::size_t acc = 1;
  for (std::size_t k = c.sep.size(); k-- > 0;) {
    st[c.sep[k]] = acc;
    acc *= static_cast<std::size_t>(c.cards[c.sep[k]]);
  }
  return st;
}

// Clique-position strides of the parent laid over the child's sep order.
inline std::vector<std::size_t> parent_sep_strides(const Clique& child, const Clique& parent) {
  std::vector<std::size_t> st(parent.vars.size(), 0);
  std::size_t acc = 1;
  for (std::size_t k = child.sep.size(); k-- > 0;) {
    int var = child.vars[child.sep[k]];
    auto pos = std::lower_bound(parent.vars.begin(), parent.vars.end(), var) - parent.vars.begin();
    st[pos] = acc;
    acc *= static_cast<std::size_t>(child.cards[child.sep[k]]);
  }
  return st;
}

}  // namespace disc_detail

/// Sum-product calibration after applying additional evidence.
inline CalibratedTree calibrate(CliqueTree tree, const std::map<int, int>& evidence = {}) {
  CalibratedTree out;
  for (auto& c : tree.cliques) {
    for (const auto& [var, st] : evidence) {
      auto it = std::find(c.vars.begin(), c.vars.end(), var);
      if (it == c.vars.end()) continue;
      std::size_t pos = static_cast<std::size_t>(it - c.vars.begin());
      for (std::size_t e = 0; e < c.table.size(); ++e)
        if ((e / c.strides[pos]) % static_cast<std::size_t>(c.cards[pos]) != static_cast<std::size_t>(st)) c.table[e] = 0.0;
    }
  }
  for (const auto& c : tree.cliques) out.potentials.push_back(c.table);

  const std::size_t nc = tree.cliques.size();
  std::vector<std::vector<double>> up(nc);  // child -> parent messages (normalized)
  double log_z = 0.0;
  // Collect.
  for (std::size_t k = tree.order.size(); k-- > 0;) {
    int ci = tree.order[k];
    auto& c = tree.cliques[ci];
    for (int ch : c.children) {
      const auto& child = tree.cliques[ch];
      std::vector<std::vector<std::size_t>> st{disc_detail::parent_sep_strides(child, c)};
      disc_detail::for_each_entry(c.cards, st, [&](std::size_t e, const std::vector<std::size_t>& off, const std::vector<int>&) {
        c.table[e] *= up[ch][off[0]];
      });
    }
    if (c.parent >= 0) {
      std::vector<double> msg(disc_detail::sep_size(c), 0.0);
      std::vector<std::vector<std::size_t>> st{disc_detail::sep_strides(c)};
      disc_detail::for_each_entry(c.cards, st, [&](std::size_t e, const std::vector<std::size_t>& off, const std::vector<int>&) {
        msg[off[0]] += c.table[e];
      });
      double s = std::accumulate(msg.begin(), msg.end(), 0.0);
      if (!(s > 0.0)) throw ImpossibleEvidenceError("clique tree has zero total mass");
      for (double& x : msg) x /= s;
      log_z += std::log(s);
      up[ci] = std::move(msg);
    }
  }
  for (int r : tree.roots) {
    auto& c = tree.cliques[r];
    double s = std::accumulate(c.table.begin(), c.table.end(), 0.0);
    if (!(s > 0.0)) throw ImpossibleEvidenceError("clique tree has zero total mass");
    log_z += std::log(s);
    for (double& x : c.table) x /= s;
  }
  // Distribute: child belief = child collect-table * (parent belief / up msg) on the sepset.
  for (int ci : tree.order) {
    auto& c = tree.cliques[ci];
    if (c.parent < 0) continue;
    const auto& p = tree.cliques[c.parent];
    std::vector<double> pm(disc_detail::sep_size(c), 0.0);
    std::vector<std::vector<std::size_t>> pst{disc_detail::parent_sep_strides(c, p)};
    disc_detail::for_each_entry(p.cards, pst, [&](std::size_t e, const std::vector<std::size_t>& off, const std::vector<int>&) {
      pm[off[0]] += p.table[e];
    });
    std::vector<double> ratio(pm.size(), 0.0);
    for (std::size_t i = 0; i < pm.size(); ++i) ratio[i] = up[ci][i] > 0.0 ? pm[i] / up[ci][i] : 0.0;
    std::vector<std::vector<std::size_t>> st{disc_detail::sep_strides(c)};
    // c.table currently holds potential * child messages; rescale to sum 1 first.
    double s = std::accumulate(c.table.begin(), c.table.end(), 0.0);
    disc_detail::for_each_entry(c.cards, st, [&](std::size_t e, const std::vector<std::size_t>& off, const std::vector<int>&) {
      c.table[e] = c.table[e] / s * ratio[off[0]];
    });
    double t = std::accumulate(c.table.begin(), c.table.end(), 0.0);
    for (double& x : c.table) x /= t;
    c.sep_belief = std::move(pm);
  }
  out.tree = std::move(tree);
  out.log_z = log_z;
  return out;
}

/// Exact P(delta | d) from the calibrated factorization
/// prod beliefs / prod sepset beliefs. delta is node-indexed and must assign
/// every tree variable.
inline double log_prob_of(const CalibratedTree& ct, const std::vector<int>& delta) {
  if (delta.size() < ct.tree.num_nodes) throw InputError("prob_of: assignment vector too short");
  double lp = 0.0;
  for (const auto& c : ct.tree.cliques) {
    std::size_t idx = 0, sidx = 0;
    std::size_t sacc = 1;
    for (std::size_t i = 0; i < c.vars.size(); ++i) {
      int s = delta[c.vars[i]];
      if (s < 0 || s >= c.cards[i]) throw InputError("prob_of: partial assignment");
      idx += c.strides[i] * static_cast<std::size_t>(s);
    }
    for (std::size_t k = c.sep.size(); k-- > 0;) {
      sidx += sacc * static_cast<std::size_t>(delta[c.vars[c.sep[k]]]);
      sacc *= static_cast<std::size_t>(c.cards[c.sep[k]]);
    }
    double b = c.table[idx];
    if (!(b > 0.0)) return kNegInf;
    lp += std::log(b);
    if (c.parent >= 0) lp -= std::log(c.sep_belief[sidx]);
  }
  return lp;
}

inline double prob_of(const CalibratedTree& ct, const std::vector<int>& delta) {
  return std::exp(log_prob_of(ct, delta));
}

/// Forward sample of the tree variables; other entries stay -1.
template <class Rng>
std::vector<int> sample_configuration(const CalibratedTree& ct, Rng& rng) {
  std::vector<int> out(ct.tree.num_nodes, -1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int ci : ct.tree.order) {
    const auto& c = ct.tree.cliques[ci];
    // Mass of entries consistent with the already-sampled sepset.
    double total = 0.0;
    auto consistent = [&](std::size_t e) {
      for (int p : c.sep)
        if (static_cast<int>((e / c.strides[p]) % static_cast<std::size_t>(c.cards[p])) != out[c.vars[p]]) return false;
      return true;
    };
    for (std::size_t e = 0; e < c.table.size(); ++e)
      if (consistent(e)) total += c.table[e];
    double u = unif(rng) * total;
    std::size_t pick = SIZE_MAX, last = SIZE_MAX;
    for (std::size_t e = 0; e < c.table.size(); ++e) {
      if (!consistent(e) || !(c.table[e] > 0.0)) continue;
      last = e;
      u -= c.table[e];
      if (u < 0.0) {
        pick = e;
        break;
      }
    }
    if (pick == SIZE_MAX) pick = last;
    if (pick == SIZE_MAX) throw ImpossibleEvidenceError("sampling from a clique with zero mass");
    for (std::size_t i = 0; i < c.vars.size(); ++i)
      out[c.vars[i]] = static_cast<int>((pick / c.strides[i]) % static_cast<std::size_t>(c.cards[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// K-best enumeration

/// Anytime stream of configurations of the tree variables in nonincreasing
/// probability without duplicates. Max-propagation finds the best
/// configuration of a constrained subproblem; Lawler partitioning splits the
/// remaining space after every emission. Ties are ordered by the
/// lexicographically smaller assignment (tree variables in node-id order).
class KBestStream {
 public:
  struct Item {
    std::vector<int> assignment;  // node-indexed, -1 outside the tree
    double log_prob;
  };

  /// `fixed` pins tree variables before enumeration starts.
  explicit KBestStream(const CalibratedTree& ct, const std::map<int, int>& fixed = {}) : ct_(&ct) {
    const auto& vars = ct.tree.vars;
    Mask root_mask;
    for (int v : vars) {
      int card = 0;
      for (const auto& c : ct.tree.cliques) {
        auto it = std::find(c.vars.begin(), c.vars.end(), v);
        if (it != c.vars.end()) card = c.cards[it - c.vars.begin()];
      }
      cards_.push_back(card);
      root_mask.push_back(std::vector<char>(card, 1));
    }
    for (const auto& [v, s] : fixed) {
      auto it = std::lower_bound(vars.begin(), vars.end(), v);
      if (it == vars.end() || *it != v) throw InputError("k_best: constrained variable not in tree");
      auto& m = root_mask[it - vars.begin()];
      std::fill(m.begin(), m.end(), 0);
      m.at(s) = 1;
    }
    // Log of the conditional factorization: root beliefs and child
    // beliefs divided by their sepset beliefs.
    for (const auto& c : ct.tree.cliques) {
      std::vector<double> lt(c.table.size());
      std::vector<std::vector<std::size_t>> st{disc_detail::sep_strides(c)};
      disc_detail::for_each_entry(c.cards, st, [&](std::size_t e, const std::vector<std::size_t>& off, const std::vector<int>&) {
        double b = c.table[e];
        if (!(b > 0.0)) {
          lt[e] = kNegInf;
        } else {
          lt[e] = std::log(b);
          if (c.parent >= 0) lt[e] -= std::log(c.sep_belief[off[0]]);
        }
      });
      log_tables_.push_back(std::move(lt));
    }
    push(std::move(root_mask));
  }

  std::optional<Item> next() {
    while (!queue_.empty()) {
      Node top = queue_.top();
      queue_.pop();
      if (top.log_prob == kNegInf) {
        queue_ = {};
        return std::nullopt;
      }
      // Lawler split: child i fixes the first i free variables to the emitted
      // values and forbids the emitted value of variable i.
      Mask prefix = top.mask;
      for (std::size_t i = 0; i < cards_.size(); ++i) {
        int s = top.tree_assignment[i];
        int allowed = 0;
        for (char a : prefix[i]) allowed += a;
        if (allowed > 1) {
          Mask child = prefix;
          child[i][s] = 0;
          push(std::move(child));
        }
        std::fill(prefix[i].begin(), prefix[i].end(), 0);
        prefix[i][s] = 1;
      }
      ++emitted_;
      Item it;
      it.assignment.assign(ct_->tree.num_nodes, -1);
      for (std::size_t i = 0; i < cards_.size(); ++i) it.assignment[ct_->tree.vars[i]] = top.tree_assignment[i];
      it.log_prob = top.log_prob;
      return it;
    }
    return std::nullopt;
  }

  std::size_t emitted() const { return emitted_; }
  std::size_t max_propagations() const { return solves_; }

 private:
  using Mask = std::vector<std::vector<char>>;  // per tree variable, allowed states

  struct Node {
    double log_prob;
    std::vector<int> tree_assignment;
    Mask mask;
  };
  struct Worse {
    bool operator()(const Node& a, const Node& b) const {
      if (a.log_prob != b.log_prob) return a.log_prob < b.log_prob;
      return a.tree_assignment > b.tree_assignment;
    }
  };

  void push(Mask mask) {
    Node n;
    n.mask = std::move(mask);
    n.log_prob = solve(n.mask, n.tree_assignment);
    if (n.log_prob == kNegInf) return;
    queue_.push(std::move(n));
  }

  // Constrained max-product; fills the argmax (first maximizer in table
  // order at every clique) and returns its log probability.
  double solve(const Mask& mask, std::vector<int>& best) {
    ++solves_;
    const auto& t = ct_->tree;
    const auto& vars = t.vars;
    const std::size_t nc = t.cliques.size();
    std::vector<std::vector<double>> work(nc);
    std::vector<std::vector<double>> msg(nc);
    auto var_pos = [&](int v) { return static_cast<std::size_t>(std::lower_bound(vars.begin(), vars.end(), v) - vars.begin()); };
    for (std::size_t ci = 0; ci < nc; ++ci) {
      const auto& c = t.cliques[ci];
      auto& w = work[ci];
      w = log_tables_[ci];
      for (std::size_t i = 0; i < c.vars.size(); ++i) {
        const auto& m = mask[var_pos(c.vars[i])];
        bool all = true;
        for (char a : m) all = all && a;
        if (all) continue;
        for (std::size_t e = 0; e < w.size(); ++e)
          if (!m[(e / c.strides[i]) % static_cast<std::size_t>(c.cards[i])]) w[e] = kNegInf;
      }
    }
    for (std::size_t k = t.order.size(); k-- > 0;) {
      int ci = t.order[k];
      const auto& c = t.cliques[ci];
      auto& w = work[ci];
      for (int ch : c.children) {
        std::vector<std::vector<std::size_t>> st{disc_detail::parent_sep_strides(t.cliques[ch], c)};
        disc_detail::for_each_entry(c.cards, st, [&](std::size_t e, const std::vector<std::size_t>& off, const std::vector<int>&) {
          w[e] += msg[ch][off[0]];
        });
      }
      if (c.parent >= 0) {
        std::vector<double> m(disc_detail::sep_size(c), kNegInf);
        std::vector<std::vector<std::size_t>> st{disc_detail::sep_strides(c)};
        disc_detail::for_each_entry(c.cards, st, [&](std::size_t e, const std::vector<std::size_t>& off, const std::vector<int>&) {
          m[off[0]] = std::max(m[off[0]], w[e]);
        });
        msg[ci] = std::move(m);
      }
    }
    double total = 0.0;
    std::vector<int> full(t.num_nodes, -1);
    for (int ci : t.order) {
      const auto& c = t.cliques[ci];
      const auto& w = work[ci];
      double bv = kNegInf;
      std::size_t be = SIZE_MAX;
      for (std::size_t e = 0; e < w.size(); ++e) {
        if (c.parent >= 0) {
          bool ok = true;
          for (int p : c.sep)
            if (static_cast<int>((e / c.strides[p]) % static_cast<std::size_t>(c.cards[p])) != full[c.vars[p]]) {
              ok = false;
              break;
            }
          if (!ok) continue;
        }
        if (w[e] > bv) {
          bv = w[e];
          be = e;
        }
      }
      if (be == SIZE_MAX || bv == kNegInf) return kNegInf;
      if (c.parent < 0) total += bv;
      for (std::size_t i = 0; i < c.vars.size(); ++i)
        full[c.vars[i]] = static_cast<int>((be / c.strides[i]) % static_cast<std::size_t>(c.cards[i]));
    }
    best.resize(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) best[i] = full[vars[i]];
    return total;
  }

  const CalibratedTree* ct_;
  std::vector<int> cards_;
  std::vector<std::vector<double>> log_tables_;
  std::priority_queue<Node, std::vector<Node>, Worse> queue_;
  std::size_t emitted_ = 0;
  std::size_t solves_ = 0;
};

/// Convenience: the first K items of the stream.
inline std::vector<KBestStream::Item> k_best(const CalibratedTree& ct, std::size_t k) {
  KBestStream s(ct);
  std::vector<KBestStream::Item> out;
  while (out.size() < k) {
    auto it = s.next();
    if (!it) break;
    out.push_back(std::move(*it));
  }
  return out;
}

// ---------------------------------------------------------------------------
// helpers

/// Discrete evidence translated to node ids.
inline std::map<int, int> discrete_evidence_ids(const Model& m, const Evidence& ev) {
  std::map<int, int> out;
  for (const auto& [name, st] : ev.discrete) {
    int id = m.id(name);
    out[id] = m.state_index(id, st);
  }
  return out;
}

/// Calibrated tree over `keep` given discrete evidence.
inline CalibratedTree restricted_tree(const Model& m, const std::vector<int>& keep, const std::map<int, int>& evidence,
                                      std::size_t max_entries = SIZE_MAX) {
  auto factors = restrict_to(m, keep, evidence);
  auto tree = build_clique_tree(factors, m.size(), max_entries);
  // Kept variables absent from every factor cannot occur (each keeps its CPT
  // or an elimination product), so the tree covers `keep`.
  return calibrate(std::move(tree), evidence);
}

}  // namespace clg
