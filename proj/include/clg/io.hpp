#pragma once

// JSON reading and writing of networks and evidence.

#include <fstream>
#include <locale>
#include <sstream>
#include <string>

#include <json.hpp>

#include "clg/errors.hpp"
#include "clg/model.hpp"

namespace clg {

using json = nlohmann::json;

namespace io_detail {

inline std::string location(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field \"" + key + "\"");
  return *it;
}

inline double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

inline std::string string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ParseError(where + ": expected a string");
  return v.get<std::string>();
}

inline std::vector<std::string> strings(const json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(string(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace io_detail

/// Locale-independent decimal rendering with 17 significant digits.
inline std::string format_real(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

/// Parses a JSON document, mapping syntax errors to ParseError with a
/// line/column location.
inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("syntax error at " + io_detail::location(text, e.byte) + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
}

inline Network network_from_json(const json& doc) {
  using namespace io_detail;
  Network net;
  const json& nodes = field(doc, "nodes", "document");
  if (!nodes.is_array()) throw ParseError("document.nodes: expected an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const json& jn = nodes[i];
    std::string where = "nodes[" + std::to_string(i) + "]";
    Node n;
    n.name = string(field(jn, "name", where), where + ".name");
    where += " ('" + n.name + "')";
    std::string kind = string(field(jn, "kind", where), where + ".kind");
    if (kind == "discrete") {
      n.kind = NodeKind::discrete;
      n.states = strings(field(jn, "states", where), where + ".states");
      n.parents = strings(field(jn, "parents", where), where + ".parents");
      const json& cpt = field(jn, "cpt", where);
      if (!cpt.is_array()) throw ParseError(where + ".cpt: expected an array of rows");
      for (std::size_t r = 0; r < cpt.size(); ++r)
        n.cpt.push_back(numbers(cpt[r], where + ".cpt[" + std::to_string(r) + "]"));
    } else if (kind == "continuous") {
      n.kind = NodeKind::continuous;
      n.discrete_parents = strings(field(jn, "discrete_parents", where), where + ".discrete_parents");
      n.continuous_parents = strings(field(jn, "continuous_parents", where), where + ".continuous_parents");
      const json& clg = field(jn, "clg", where);
      if (!clg.is_array()) throw ParseError(where + ".clg: expected an array");
      for (std::size_t e = 0; e < clg.size(); ++e) {
        std::string w = where + ".clg[" + std::to_string(e) + "]";
        ClgEntry ent;
        ent.assignment = strings(field(clg[e], "assignment", w), w + ".assignment");
        ent.intercept = number(field(clg[e], "intercept", w), w + ".intercept");
        ent.coeffs = numbers(field(clg[e], "coeffs", w), w + ".coeffs");
        ent.variance = number(field(clg[e], "variance", w), w + ".variance");
        n.clg.push_back(std::move(ent));
      }
    } else {
      throw ParseError(where + ".kind: expected \"discrete\" or \"continuous\", got \"" + kind + "\"");
    }
    net.nodes.push_back(std::move(n));
  }
  return net;
}

inline Network parse_network(const std::string& text) { return network_from_json(parse_json(text)); }

inline json network_to_json(const Network& net) {
  json nodes = json::array();
  for (const auto& n : net.nodes) {
    json jn;
    jn["name"] = n.name;
    if (n.kind == NodeKind::discrete) {
      jn["kind"] = "discrete";
      jn["states"] = n.states;
      jn["parents"] = n.parents;
      jn["cpt"] = n.cpt;
    } else {
      jn["kind"] = "continuous";
      jn["discrete_parents"] = n.discrete_parents;
      jn["continuous_parents"] = n.continuous_parents;
      json clg = json::array();
      for (const auto& e : n.clg) {
        clg.push_back({{"assignment", e.assignment},
                       {"intercept", e.intercept},
                       {"coeffs", e.coeffs},
                       {"variance", e.variance}});
      }
      jn["clg"] = std::move(clg);
    }
    nodes.push_back(std::move(jn));
  }
  return json{{"nodes", std::move(nodes)}};
}

/// Doubles are written with 17 significant digits, so parse(serialize(n)) == n.
inline std::string serialize_network(const Network& net, int indent = 1) {
  return network_to_json(net).dump(indent);
}

inline Evidence evidence_from_json(const json& doc) {
  using namespace io_detail;
  Evidence ev;
  if (!doc.is_object()) throw ParseError("evidence: expected an object");
  if (auto it = doc.find("discrete"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("evidence.discrete: expected an object");
    for (auto& [k, v] : it->items()) ev.discrete[k] = string(v, "evidence.discrete." + k);
  }
  if (auto it = doc.find("continuous"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("evidence.continuous: expected an object");
    for (auto& [k, v] : it->items()) ev.continuous[k] = number(v, "evidence.continuous." + k);
  }
  return ev;
}

inline Evidence parse_evidence(const std::string& text) { return evidence_from_json(parse_json(text)); }

inline json evidence_to_json(const Evidence& ev) {
  json d = json::object(), c = json::object();
  for (const auto& [k, v] : ev.discrete) d[k] = v;
  for (const auto& [k, v] : ev.continuous) c[k] = v;
  return json{{"discrete", d}, {"continuous", c}};
}

}  // namespace clg
