#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "clg/errors.hpp"

namespace clg {

enum class NodeKind { discrete, continuous };

/// One row of a conditional linear Gaussian CPD: the parameters selected by a
/// single assignment of the node's discrete parents.
struct ClgEntry {
  std::vector<std::string> assignment;  // labels, aligned to discrete_parents
  double intercept = 0.0;
  std::vector<double> coeffs;  // aligned to continuous_parents
  double variance = 1.0;

  bool operator==(const ClgEntry&) const = default;
};

/// A network node as it appears in a network file. Which fields are
/// meaningful depends on `kind`; validate() reports inconsistencies.
struct Node {
  std::string name;
  NodeKind kind = NodeKind::discrete;

  // discrete nodes
  std::vector<std::string> states;
  std::vector<std::string> parents;
  std::vector<std::vector<double>> cpt;  // rows row-major over parent states

  // continuous nodes
  std::vector<std::string> discrete_parents;
  std::vector<std::string> continuous_parents;
  std::vector<ClgEntry> clg;

  bool operator==(const Node&) const = default;

  static Node make_discrete(std::string name, std::vector<std::string> states,
                            std::vector<std::string> parents,
                            std::vector<std::vector<double>> cpt) {
    Node n;
    n.name = std::move(name);
    n.kind = NodeKind::discrete;
    n.states = std::move(states);
    n.parents = std::move(parents);
    n.cpt = std::move(cpt);
    return n;
  }

  static Node make_continuous(std::string name,
                              std::vector<std::string> discrete_parents,
                              std::vector<std::string> continuous_parents,
                              std::vector<ClgEntry> clg) {
    Node n;
    n.name = std::move(name);
    n.kind = NodeKind::continuous;
    n.discrete_parents = std::move(discrete_parents);
    n.continuous_parents = std::move(continuous_parents);
    n.clg = std::move(clg);
    return n;
  }

  /// Every parent regardless of kind, discrete parents first.
  std::vector<std::string> all_parents() const {
    if (kind == NodeKind::discrete) return parents;
    std::vector<std::string> out = discrete_parents;
    out.insert(out.end(), continuous_parents.begin(), continuous_parents.end());
    return out;
  }
};

struct Network {
  std::vector<Node> nodes;

  bool operator==(const Network&) const = default;

  const Node* find(const std::string& name) const {
    for (const auto& n : nodes)
      if (n.name == name) return &n;
    return nullptr;
  }
  Node* find(const std::string& name) {
    for (auto& n : nodes)
      if (n.name == name) return &n;
    return nullptr;
  }
  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

/// Discrete evidence d and continuous evidence x.
struct Evidence {
  std::map<std::string, std::string> discrete;
  std::map<std::string, double> continuous;

  bool empty() const { return discrete.empty() && continuous.empty(); }
  bool operator==(const Evidence&) const = default;
};

// ---------------------------------------------------------------------------
// validation

enum class ViolationKind {
  empty_name,
  duplicate_name,
  too_few_states,
  duplicate_state,
  dangling_reference,
  illegal_parent_kind,
  cycle,
  cpt_shape,
  negative_probability,
  unnormalized_row,
  clg_assignment,
  clg_coverage,
  coefficient_count,
  nonpositive_variance,
  nonfinite_value,
};

struct Violation {
  ViolationKind kind;
  std::string node;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind k) const {
    return std::any_of(violations.begin(), violations.end(),
                       [k](const Violation& v) { return v.kind == k; });
  }
  std::string to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.node << ": " << v.message << "\n";
    return os.str();
  }
};

inline constexpr double kCptTolerance = 1e-9;

namespace detail {

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

// Row-major enumeration of a mixed-radix domain, last digit fastest.
inline bool next_assignment(std::vector<int>& digits,
                            const std::vector<int>& radix) {
  for (std::size_t i = digits.size(); i-- > 0;) {
    if (++digits[i] < radix[i]) return true;
    digits[i] = 0;
  }
  return false;
}

}  // namespace detail

inline ValidationReport validate(const Network& net) {
  ValidationReport rep;
  auto add = [&](ViolationKind k, const std::string& node, std::string msg) {
    rep.violations.push_back({k, node, std::move(msg)});
  };

  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    const auto& n = net.nodes[i];
    if (n.name.empty()) add(ViolationKind::empty_name, "#" + std::to_string(i), "empty node name");
    if (!index.emplace(n.name, static_cast<int>(i)).second)
      add(ViolationKind::duplicate_name, n.name, "duplicate node name");
  }
  auto lookup = [&](const std::string& name) -> const Node* {
    auto it = index.find(name);
    return it == index.end() ? nullptr : &net.nodes[it->second];
  };

  // Resolves a discrete parent list; returns false if any entry is unusable.
  auto check_discrete_parents = [&](const Node& n, const std::vector<std::string>& ps,
                                    std::vector<int>& cards) {
    bool usable = true;
    for (const auto& p : ps) {
      const Node* pn = lookup(p);
      if (!pn) {
        add(ViolationKind::dangling_reference, n.name, "unknown parent '" + p + "'");
        usable = false;
      } else if (pn->kind != NodeKind::discrete) {
        add(ViolationKind::illegal_parent_kind, n.name,
            "illegal parent kind: discrete-parent slot holds continuous node '" + p + "'");
        usable = false;
      } else {
        cards.push_back(static_cast<int>(pn->states.size()));
      }
    }
    return usable;
  };

  for (const auto& n : net.nodes) {
    if (n.kind == NodeKind::discrete) {
      if (n.states.size() < 2)
        add(ViolationKind::too_few_states, n.name, "discrete node needs at least 2 states");
      std::set<std::string> seen(n.states.begin(), n.states.end());
      if (seen.size() != n.states.size())
        add(ViolationKind::duplicate_state, n.name, "duplicate state label");
      std::vector<int> cards;
      if (!check_discrete_parents(n, n.parents, cards)) continue;
      std::size_t rows = 1;
      for (int c : cards) rows *= static_cast<std::size_t>(c);
      if (n.cpt.size() != rows) {
        add(ViolationKind::cpt_shape, n.name,
            "cpt has " + std::to_string(n.cpt.size()) + " rows, expected " + std::to_string(rows));
        continue;
      }
      for (std::size_t r = 0; r < n.cpt.size(); ++r) {
        const auto& row = n.cpt[r];
        if (row.size() != n.states.size()) {
          add(ViolationKind::cpt_shape, n.name,
              "cpt row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                  " entries, expected " + std::to_string(n.states.size()));
          continue;
        }
        double sum = 0.0;
        bool bad = false;
        for (double p : row) {
          if (!std::isfinite(p)) {
            add(ViolationKind::nonfinite_value, n.name, "non-finite cpt entry in row " + std::to_string(r));
            bad = true;
          } else if (p < 0.0) {
            add(ViolationKind::negative_probability, n.name, "negative cpt entry in row " + std::to_string(r));
            bad = true;
          }
          sum += p;
        }
        if (!bad && std::abs(sum - 1.0) > kCptTolerance)
          add(ViolationKind::unnormalized_row, n.name,
              "cpt row " + std::to_string(r) + ": row sums to " + detail::fmt_double(sum));
      }
    } else {
      std::vector<int> cards;
      bool usable = check_discrete_parents(n, n.discrete_parents, cards);
      for (const auto& p : n.continuous_parents) {
        const Node* pn = lookup(p);
        if (!pn) {
          add(ViolationKind::dangling_reference, n.name, "unknown parent '" + p + "'");
          usable = false;
        } else if (pn->kind != NodeKind::continuous) {
          add(ViolationKind::illegal_parent_kind, n.name,
              "illegal parent kind: continuous-parent slot holds discrete node '" + p + "'");
          usable = false;
        }
      }
      const std::size_t k = n.continuous_parents.size();
      for (std::size_t e = 0; e < n.clg.size(); ++e) {
        const auto& ent = n.clg[e];
        if (ent.coeffs.size() != k)
          add(ViolationKind::coefficient_count, n.name,
              "clg entry " + std::to_string(e) + " has " + std::to_string(ent.coeffs.size()) +
                  " coefficients, expected " + std::to_string(k));
        if (!(ent.variance > 0.0))
          add(ViolationKind::nonpositive_variance, n.name,
              "clg entry " + std::to_string(e) + " has nonpositive variance " +
                  detail::fmt_double(ent.variance));
        bool finite = std::isfinite(ent.intercept) && std::isfinite(ent.variance);
        for (double c : ent.coeffs) finite = finite && std::isfinite(c);
        if (!finite)
          add(ViolationKind::nonfinite_value, n.name, "non-finite value in clg entry " + std::to_string(e));
      }
      if (!usable) continue;
      // Every Dom(D) element covered exactly once.
      std::map<std::vector<int>, int> hits;
      bool labels_ok = true;
      for (std::size_t e = 0; e < n.clg.size(); ++e) {
        const auto& ent = n.clg[e];
        if (ent.assignment.size() != n.discrete_parents.size()) {
          add(ViolationKind::clg_assignment, n.name,
              "clg entry " + std::to_string(e) + " assignment has wrong length");
          labels_ok = false;
          continue;
        }
        std::vector<int> key;
        for (std::size_t j = 0; j < ent.assignment.size(); ++j) {
          const auto& states = lookup(n.discrete_parents[j])->states;
          auto it = std::find(states.begin(), states.end(), ent.assignment[j]);
          if (it == states.end()) {
            add(ViolationKind::clg_assignment, n.name,
                "clg entry " + std::to_string(e) + " uses unknown state '" + ent.assignment[j] +
                    "' of '" + n.discrete_parents[j] + "'");
            labels_ok = false;
            break;
          }
          key.push_back(static_cast<int>(it - states.begin()));
        }
        if (key.size() == ent.assignment.size()) ++hits[key];
      }
      if (!labels_ok) continue;
      std::vector<int> digits(cards.size(), 0);
      do {
        auto it = hits.find(digits);
        int count = it == hits.end() ? 0 : it->second;
        if (count != 1) {
          std::string lbl;
          for (std::size_t j = 0; j < digits.size(); ++j) {
            if (j) lbl += ",";
            lbl += lookup(n.discrete_parents[j])->states[digits[j]];
          }
          add(ViolationKind::clg_coverage, n.name,
              (count == 0 ? "missing clg entry for assignment (" : "duplicate clg entry for assignment (") +
                  lbl + ")");
        }
      } while (detail::next_assignment(digits, cards));
    }
  }

  // Cycle detection over resolvable edges (Kahn).
  const std::size_t n = net.nodes.size();
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& p : net.nodes[i].all_parents()) {
      auto it = index.find(p);
      if (it == index.end()) continue;
      children[it->second].push_back(static_cast<int>(i));
      ++indeg[i];
    }
  }
  std::vector<int> stack;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) stack.push_back(static_cast<int>(i));
  std::size_t visited = 0;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    ++visited;
    for (int c : children[v])
      if (--indeg[c] == 0) stack.push_back(c);
  }
  if (visited != n) {
    std::string members;
    for (std::size_t i = 0; i < n; ++i)
      if (indeg[i] > 0) members += (members.empty() ? "" : ",") + net.nodes[i].name;
    add(ViolationKind::cycle, members, "cycle through nodes {" + members + "}");
  }
  return rep;
}

/// Parents before children; ties go to the earlier-declared node.
inline std::vector<std::string> topological_order(const Network& net) {
  const std::size_t n = net.nodes.size();
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(net.nodes[i].name, static_cast<int>(i));
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& p : net.nodes[i].all_parents()) {
      auto it = index.find(p);
      if (it == index.end()) throw StructuralError("node '" + net.nodes[i].name + "' has unknown parent '" + p + "'");
      children[it->second].push_back(static_cast<int>(i));
      ++indeg[i];
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push(static_cast<int>(i));
  std::vector<std::string> order;
  order.reserve(n);
  while (!ready.empty()) {
    int v = ready.top();
    ready.pop();
    order.push_back(net.nodes[v].name);
    for (int c : children[v])
      if (--indeg[c] == 0) ready.push(c);
  }
  if (order.size() != n) throw StructuralError("network contains a cycle");
  return order;
}

/// Discrete nodes with at least one continuous child, in declaration order.
inline std::vector<std::string> direct_discrete_parents(const Network& net) {
  std::set<std::string> hit;
  for (const auto& n : net.nodes)
    if (n.kind == NodeKind::continuous) hit.insert(n.discrete_parents.begin(), n.discrete_parents.end());
  std::vector<std::string> out;
  for (const auto& n : net.nodes)
    if (n.kind == NodeKind::discrete && hit.count(n.name)) out.push_back(n.name);
  return out;
}

// ---------------------------------------------------------------------------
// compiled model

struct LinearGaussian {
  double intercept = 0.0;
  std::vector<double> coeffs;
  double variance = 1.0;
};

/// Dense, index-based view of a validated network. Node ids are declaration
/// indices; state ids are declaration indices within a node. Immutable.
class Model {
 public:
  struct CNode {
    std::string name;
    NodeKind kind;
    std::vector<std::string> states;  // discrete only
    int card = 0;                     // discrete only
    std::vector<int> dparents;        // discrete parents (both kinds)
    std::vector<int> cparents;        // continuous parents (continuous only)
    std::vector<double> cpt;          // discrete: rows x card, row-major
    std::vector<LinearGaussian> clg;  // continuous: one per parent row
    std::vector<int> children;
  };

  Model() = default;

  /// Throws InputError listing every violation when the network is invalid.
  explicit Model(const Network& net) : source_(net) {
    auto rep = validate(net);
    if (!rep.ok()) throw InputError("invalid network:\n" + rep.to_string());
    const std::size_t n = net.nodes.size();
    for (std::size_t i = 0; i < n; ++i) index_.emplace(net.nodes[i].name, static_cast<int>(i));
    nodes_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Node& src = net.nodes[i];
      CNode& dst = nodes_[i];
      dst.name = src.name;
      dst.kind = src.kind;
      if (src.kind == NodeKind::discrete) {
        dst.states = src.states;
        dst.card = static_cast<int>(src.states.size());
        for (const auto& p : src.parents) dst.dparents.push_back(index_.at(p));
        for (const auto& row : src.cpt) dst.cpt.insert(dst.cpt.end(), row.begin(), row.end());
        discrete_.push_back(static_cast<int>(i));
      } else {
        for (const auto& p : src.discrete_parents) dst.dparents.push_back(index_.at(p));
        for (const auto& p : src.continuous_parents) dst.cparents.push_back(index_.at(p));
        continuous_.push_back(static_cast<int>(i));
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto& dst = nodes_[i];
      if (dst.kind != NodeKind::continuous) continue;
      const Node& src = net.nodes[i];
      dst.clg.resize(parent_rows(static_cast<int>(i)));
      for (const auto& e : src.clg) {
        std::size_t row = 0;
        for (std::size_t j = 0; j < e.assignment.size(); ++j) {
          int p = dst.dparents[j];
          row = row * nodes_[p].card + state_index(p, e.assignment[j]);
        }
        dst.clg[row] = LinearGaussian{e.intercept, e.coeffs, e.variance};
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int p : nodes_[i].dparents) nodes_[p].children.push_back(static_cast<int>(i));
      for (int p : nodes_[i].cparents) nodes_[p].children.push_back(static_cast<int>(i));
    }
    for (const auto& name : topological_order(net)) topo_.push_back(index_.at(name));
    topo_pos_.resize(n);
    for (std::size_t k = 0; k < topo_.size(); ++k) topo_pos_[topo_[k]] = static_cast<int>(k);
    for (int v : topo_)
      if (nodes_[v].kind == NodeKind::continuous) continuous_topo_.push_back(v);
    for (const auto& name : direct_discrete_parents(net)) dp_.push_back(index_.at(name));
  }

  const Network& network() const { return source_; }
  std::size_t size() const { return nodes_.size(); }
  const CNode& node(int i) const { return nodes_[i]; }
  const std::string& name(int i) const { return nodes_[i].name; }
  bool is_discrete(int i) const { return nodes_[i].kind == NodeKind::discrete; }
  int card(int i) const { return nodes_[i].card; }

  int id(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw InputError("unknown node '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  int state_index(int node, const std::string& label) const {
    const auto& st = nodes_[node].states;
    auto it = std::find(st.begin(), st.end(), label);
    if (it == st.end())
      throw InputError("node '" + nodes_[node].name + "' has no state '" + label + "'");
    return static_cast<int>(it - st.begin());
  }

  /// Number of assignments of the node's discrete parents.
  std::size_t parent_rows(int node) const {
    std::size_t r = 1;
    for (int p : nodes_[node].dparents) r *= static_cast<std::size_t>(nodes_[p].card);
    return r;
  }

  /// Row of the node's discrete-parent assignment read from a full
  /// assignment vector indexed by node id (entries of non-parents ignored).
  std::size_t parent_row(int node, const std::vector<int>& full) const {
    std::size_t row = 0;
    for (int p : nodes_[node].dparents) row = row * nodes_[p].card + static_cast<std::size_t>(full[p]);
    return row;
  }

  double cpt(int node, std::size_t row, int state) const {
    return nodes_[node].cpt[row * nodes_[node].card + state];
  }

  const std::vector<int>& discrete_ids() const { return discrete_; }
  const std::vector<int>& continuous_ids() const { return continuous_; }
  const std::vector<int>& topo() const { return topo_; }
  int topo_position(int node) const { return topo_pos_[node]; }
  /// Continuous nodes in topological order.
  const std::vector<int>& continuous_topo() const { return continuous_topo_; }
  /// Discrete nodes with a continuous child.
  const std::vector<int>& direct_parents() const { return dp_; }

  /// Node plus all its ancestors.
  std::vector<bool> ancestral_closure(const std::vector<int>& seeds) const {
    std::vector<bool> in(nodes_.size(), false);
    std::vector<int> stack(seeds.begin(), seeds.end());
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (in[v]) continue;
      in[v] = true;
      for (int p : nodes_[v].dparents) stack.push_back(p);
      for (int p : nodes_[v].cparents) stack.push_back(p);
    }
    return in;
  }

  /// Whether the undirected skeleton is a forest.
  bool is_polytree() const {
    std::vector<int> parent(nodes_.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      std::vector<int> ps = nodes_[i].dparents;
      ps.insert(ps.end(), nodes_[i].cparents.begin(), nodes_[i].cparents.end());
      for (int p : ps) {
        int a = find(p), b = find(static_cast<int>(i));
        if (a == b) return false;
        parent[a] = b;
      }
    }
    return true;
  }

 private:
  Network source_;
  std::vector<CNode> nodes_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> discrete_, continuous_, topo_, topo_pos_, continuous_topo_, dp_;
};

/// Checks that evidence refers to existing nodes of the right kind and valid
/// states. Throws InputError.
inline void check_evidence(const Model& m, const Evidence& ev) {
  for (const auto& [name, state] : ev.discrete) {
    int id = m.id(name);
    if (!m.is_discrete(id)) throw InputError("discrete evidence on continuous node '" + name + "'");
    m.state_index(id, state);
  }
  for (const auto& [name, value] : ev.continuous) {
    int id = m.id(name);
    if (m.is_discrete(id)) throw InputError("continuous evidence on discrete node '" + name + "'");
    if (!std::isfinite(value)) throw InputError("non-finite evidence value for '" + name + "'");
  }
}

}  // namespace clg
