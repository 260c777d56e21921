#pragma once

// Two-slice temporal networks and unrolling. Slice nodes are named
// "<base>@1" and "<base>@2"; interface variables are the bases whose slice-1
// copy may parent slice-2 nodes.

#include <set>
#include <string>
#include <vector>

#include "clg/io.hpp"
#include "clg/model.hpp"

namespace clg {

struct TwoSliceNet {
  Network net;
  std::vector<std::string> interface;  // base names
  std::vector<std::string> observed;   // base names; empty = childless continuous non-interface nodes

  bool operator==(const TwoSliceNet&) const = default;
};

inline std::string slice_name(const std::string& base, int t) { return base + "@" + std::to_string(t); }

/// Splits "X@t" into ("X", t); t = 0 when there is no slice suffix.
inline std::pair<std::string, int> split_slice(const std::string& name) {
  auto at = name.rfind('@');
  if (at == std::string::npos) return {name, 0};
  try {
    std::size_t used = 0;
    int t = std::stoi(name.substr(at + 1), &used);
    if (used != name.size() - at - 1) return {name, 0};
    return {name.substr(0, at), t};
  } catch (...) {
    return {name, 0};
  }
}

/// Slice-structure checks on top of validate(); throws StructuralError.
inline void check_two_slice(const TwoSliceNet& tbn) {
  auto rep = validate(tbn.net);
  if (!rep.ok()) throw StructuralError("invalid two-slice network:\n" + rep.to_string());
  std::map<std::string, NodeKind> s1, s2;
  for (const auto& n : tbn.net.nodes) {
    auto [base, t] = split_slice(n.name);
    if (t == 1)
      s1[base] = n.kind;
    else if (t == 2)
      s2[base] = n.kind;
    else
      throw StructuralError("node '" + n.name + "' has no @1/@2 slice suffix");
  }
  std::set<std::string> iface(tbn.interface.begin(), tbn.interface.end());
  for (const auto& b : iface)
    if (!s1.count(b) || !s2.count(b) || s1[b] != s2[b])
      throw StructuralError("interface variable '" + b + "' must appear in both slices with one kind");
  for (const auto& [b, k] : s2)
    if (!s1.count(b) || s1[b] != k) throw StructuralError("slice-2 variable '" + b + "' has no matching slice-1 variable");
  for (const auto& n : tbn.net.nodes) {
    auto [base, t] = split_slice(n.name);
    for (const auto& p : n.all_parents()) {
      auto [pb, pt] = split_slice(p);
      if (t == 1 && pt != 1) throw StructuralError("slice-1 node '" + n.name + "' has parent '" + p + "' outside slice 1");
      if (t == 2 && pt == 1 && !iface.count(pb))
        throw StructuralError("'" + p + "' parents '" + n.name + "' across slices but is not an interface variable");
    }
  }
  for (const auto& b : tbn.observed)
    if (!s2.count(b)) throw StructuralError("observed variable '" + b + "' is not a slice variable");
}

/// Observable base names: the declared list, else every continuous
/// non-interface slice-2 node without children.
inline std::vector<std::string> observed_vars(const TwoSliceNet& tbn) {
  if (!tbn.observed.empty()) return tbn.observed;
  std::set<std::string> iface(tbn.interface.begin(), tbn.interface.end()), parents;
  for (const auto& n : tbn.net.nodes)
    for (const auto& p : n.all_parents()) parents.insert(p);
  std::vector<std::string> out;
  for (const auto& n : tbn.net.nodes) {
    auto [b, t] = split_slice(n.name);
    if (t == 2 && n.kind == NodeKind::continuous && !iface.count(b) && !parents.count(n.name)) out.push_back(b);
  }
  return out;
}

/// Static network with T slices: slice 1 as written, slices 2..T copied
/// from the slice-2 fragment with @1 -> @(t-1) and @2 -> @t.
inline Network unroll(const TwoSliceNet& tbn, int T) {
  if (T < 1) throw InputError("unroll: need at least one slice");
  check_two_slice(tbn);
  Network out;
  for (const auto& n : tbn.net.nodes)
    if (split_slice(n.name).second == 1) out.nodes.push_back(n);
  auto rename = [](const std::string& name, int t) {
    auto [b, s] = split_slice(name);
    return slice_name(b, s == 1 ? t - 1 : t);
  };
  for (int t = 2; t <= T; ++t) {
    for (const auto& n : tbn.net.nodes) {
      if (split_slice(n.name).second != 2) continue;
      Node c = n;
      c.name = rename(n.name, t);
      for (auto& p : c.parents) p = rename(p, t);
      for (auto& p : c.discrete_parents) p = rename(p, t);
      for (auto& p : c.continuous_parents) p = rename(p, t);
      out.nodes.push_back(std::move(c));
    }
  }
  return out;
}

inline json two_slice_to_json(const TwoSliceNet& tbn) {
  json j = network_to_json(tbn.net);
  j["interface"] = tbn.interface;
  if (!tbn.observed.empty()) j["observed"] = tbn.observed;
  return j;
}

inline TwoSliceNet two_slice_from_json(const json& doc) {
  TwoSliceNet tbn;
  tbn.net = network_from_json(doc);
  if (!doc.contains("interface")) throw ParseError("document: missing field \"interface\"");
  tbn.interface = io_detail::strings(doc["interface"], "document.interface");
  if (doc.contains("observed")) tbn.observed = io_detail::strings(doc["observed"], "document.observed");
  return tbn;
}

inline TwoSliceNet parse_two_slice(const std::string& text) { return two_slice_from_json(parse_json(text)); }
inline std::string serialize_two_slice(const TwoSliceNet& tbn) { return two_slice_to_json(tbn).dump(1); }

}  // namespace clg
