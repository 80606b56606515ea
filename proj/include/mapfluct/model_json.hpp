#pragma once

#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mapfluct/errors.hpp"
#include "mapfluct/model.hpp"

namespace mapfluct {

// Model file format:
//   {"phases": [{"name", "drift", "sigma2", "jump": {"rate", "law"}}],
//    "switch": [{"from", "to", "rate", "jump": law}],
//    "kill":   [q_1, ..., q_n]}
// with law = {"type": "point", "value"} | {"type": "exp-neg", "rate"} |
//            {"type": "exp-pos", "rate"} | {"type": "mixture", "weights", "components"}.
// Unknown keys are rejected.

namespace detail {

using nlohmann::json;

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError(where + ": unknown key '" + key + "'");
  }
}

inline double get_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where + ": missing '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ParseError(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

inline JumpAtom atom_from_json(const json& j, const std::string& where) {
  require_object(j, where);
  if (!j.contains("type") || !j.at("type").is_string()) throw ParseError(where + ": missing law type");
  const auto type = j.at("type").get<std::string>();
  if (type == "point") {
    reject_unknown(j, {"type", "value"}, where);
    return PointMass{get_number(j, "value", where)};
  }
  if (type == "exp-neg") {
    reject_unknown(j, {"type", "rate"}, where);
    return ExpNeg{get_number(j, "rate", where)};
  }
  if (type == "exp-pos") {
    reject_unknown(j, {"type", "rate"}, where);
    return ExpPos{get_number(j, "rate", where)};
  }
  if (type == "mixture") throw ParseError(where + ": mixture components must not be mixtures");
  throw ParseError(where + ": unknown law type '" + type + "'");
}

inline JumpLaw law_from_json(const json& j, const std::string& where) {
  require_object(j, where);
  if (j.contains("type") && j.at("type") == "mixture") {
    reject_unknown(j, {"type", "weights", "components"}, where);
    if (!j.contains("weights") || !j.at("weights").is_array()) throw ParseError(where + ": mixture needs 'weights'");
    if (!j.contains("components") || !j.at("components").is_array())
      throw ParseError(where + ": mixture needs 'components'");
    Mixture m;
    for (const auto& w : j.at("weights")) {
      if (!w.is_number()) throw ParseError(where + ": weights must be numbers");
      m.weights.push_back(w.get<double>());
    }
    int k = 0;
    for (const auto& c : j.at("components")) m.components.push_back(atom_from_json(c, where + ".components[" + std::to_string(k++) + "]"));
    return m;
  }
  return std::visit([](const auto& a) { return JumpLaw(a); }, atom_from_json(j, where));
}

inline json atom_to_json(const JumpAtom& a) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, PointMass>) return {{"type", "point"}, {"value", x.value}};
        else if constexpr (std::is_same_v<T, ExpNeg>) return {{"type", "exp-neg"}, {"rate", x.rate}};
        else return {{"type", "exp-pos"}, {"rate", x.rate}};
      },
      a);
}

}  // namespace detail

inline nlohmann::json law_to_json(const JumpLaw& law) {
  if (const auto* m = std::get_if<Mixture>(&law.get())) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : m->components) comps.push_back(detail::atom_to_json(c));
    return {{"type", "mixture"}, {"weights", m->weights}, {"components", comps}};
  }
  nlohmann::json out;
  law.for_each_atom([&](double, const JumpAtom& a) { out = detail::atom_to_json(a); });
  return out;
}

inline JumpLaw law_from_json(const nlohmann::json& j) { return detail::law_from_json(j, "law"); }

/// Parses and validates a model document.
inline MapModel model_from_json(const nlohmann::json& doc) {
  using detail::get_number;
  detail::require_object(doc, "model");
  detail::reject_unknown(doc, {"phases", "switch", "kill"}, "model");
  if (!doc.contains("phases") || !doc.at("phases").is_array() || doc.at("phases").empty())
    throw ParseError("model: 'phases' must be a non-empty array");
  const auto& phases = doc.at("phases");
  const int n = static_cast<int>(phases.size());
  MapModel m = make_model(n);
  std::map<std::string, int> index;
  for (int i = 0; i < n; ++i) {
    const auto& p = phases[static_cast<std::size_t>(i)];
    const std::string where = "phases[" + std::to_string(i) + "]";
    detail::require_object(p, where);
    detail::reject_unknown(p, {"name", "drift", "sigma2", "jump"}, where);
    auto& c = m.levy[static_cast<std::size_t>(i)];
    if (p.contains("name")) {
      if (!p.at("name").is_string()) throw ParseError(where + ": name must be a string");
      c.name = p.at("name").get<std::string>();
    }
    if (index.count(c.name)) throw ParseError(where + ": duplicate phase name '" + c.name + "'");
    index[c.name] = i;
    c.drift = get_number(p, "drift", where);
    c.sigma2 = p.contains("sigma2") ? get_number(p, "sigma2", where) : 0.0;
    if (p.contains("jump")) {
      const auto& jp = p.at("jump");
      detail::require_object(jp, where + ".jump");
      detail::reject_unknown(jp, {"rate", "law"}, where + ".jump");
      c.jump_rate = get_number(jp, "rate", where + ".jump");
      if (jp.contains("law")) c.jump_law = detail::law_from_json(jp.at("law"), where + ".jump.law");
    }
  }
  auto phase_ref = [&](const nlohmann::json& v, const std::string& where) -> int {
    if (v.is_string()) {
      auto it = index.find(v.get<std::string>());
      if (it == index.end()) throw ParseError(where + ": unknown phase '" + v.get<std::string>() + "'");
      return it->second;
    }
    if (v.is_number_integer()) {
      int k = v.get<int>();
      if (k < 0 || k >= n) throw ParseError(where + ": phase index out of range");
      return k;
    }
    throw ParseError(where + ": phase reference must be a name or an index");
  };
  if (doc.contains("switch")) {
    if (!doc.at("switch").is_array()) throw ParseError("model: 'switch' must be an array");
    int k = 0;
    for (const auto& s : doc.at("switch")) {
      const std::string where = "switch[" + std::to_string(k++) + "]";
      detail::require_object(s, where);
      detail::reject_unknown(s, {"from", "to", "rate", "jump"}, where);
      if (!s.contains("from") || !s.contains("to")) throw ParseError(where + ": needs 'from' and 'to'");
      const int i = phase_ref(s.at("from"), where);
      const int j = phase_ref(s.at("to"), where);
      if (i == j) throw ParseError(where + ": a switch must change phase");
      m.switch_rate(i, j) = get_number(s, "rate", where);
      if (s.contains("jump"))
        m.switch_jump[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = detail::law_from_json(s.at("jump"), where + ".jump");
    }
  }
  if (!doc.contains("kill") || !doc.at("kill").is_array()) throw ParseError("model: 'kill' must be an array");
  const auto& kill = doc.at("kill");
  if (static_cast<int>(kill.size()) != n) throw ParseError("model: 'kill' needs one entry per phase");
  for (int i = 0; i < n; ++i) {
    if (!kill[static_cast<std::size_t>(i)].is_number()) throw ParseError("model: kill entries must be numbers");
    m.kill(i) = kill[static_cast<std::size_t>(i)].get<double>();
  }
  validate(m);
  return m;
}

inline MapModel model_from_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model: malformed JSON: ") + e.what());
  }
  return model_from_json(doc);
}

inline MapModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_string(ss.str());
}

/// Canonical document: every key spelled out, switches ordered by (from, to).
inline nlohmann::json model_to_json(const MapModel& m) {
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& c : m.levy) {
    nlohmann::json p = {{"name", c.name}, {"drift", c.drift}, {"sigma2", c.sigma2}};
    if (c.jump_rate > 0.0 || c.jump_law) {
      nlohmann::json jp = {{"rate", c.jump_rate}};
      if (c.jump_law) jp["law"] = law_to_json(*c.jump_law);
      p["jump"] = jp;
    }
    phases.push_back(p);
  }
  nlohmann::json sw = nlohmann::json::array();
  for (int i = 0; i < m.size(); ++i)
    for (int j = 0; j < m.size(); ++j) {
      if (i == j) continue;
      const auto& u = m.switch_jump[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (m.switch_rate(i, j) == 0.0 && !u) continue;
      nlohmann::json s = {{"from", m.levy[static_cast<std::size_t>(i)].name},
                          {"to", m.levy[static_cast<std::size_t>(j)].name},
                          {"rate", m.switch_rate(i, j)}};
      if (u) s["jump"] = law_to_json(*u);
      sw.push_back(s);
    }
  nlohmann::json kill = nlohmann::json::array();
  for (int i = 0; i < m.size(); ++i) kill.push_back(m.kill(i));
  return {{"phases", phases}, {"switch", sw}, {"kill", kill}};
}

}  // namespace mapfluct
