#pragma once

// JSON forms of configurations, network states, network specs and exact laws.
//
//   configuration   [1,2,1]            (the empty configuration is [])
//   network state   [[1,4],[]]         one configuration per station
//   network spec    {"name": ..., "classes": d, "stations": [[1,4],[2,3]],
//                    "theta": [...], "beta": [...], "routing": [[...]],
//                    "protocols": [{"policy": "fcfs"|"lcfs"|"sbp",
//                                   "ranking": [[4],[1]],          (sbp only)
//                                   "allocation": "hq"|"egalitarian"|"proportional"
//                                               | {"type": "preferential", "ranking": [4,1]}}]}

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qnet/exact.hpp"
#include "qnet/fixtures.hpp"

namespace qnet {

using json = nlohmann::ordered_json;

inline json config_to_json(const QueueConfig& p) { return json(p.digits()); }

inline QueueConfig config_from_json(const json& j) {
  if (!j.is_array()) throw InvalidArgument("configuration must be a JSON array of class ids");
  std::vector<ClassId> d;
  for (auto& x : j) {
    if (!x.is_number_integer()) throw InvalidArgument("configuration entries must be integers");
    d.push_back(x.get<ClassId>());
  }
  return QueueConfig(std::move(d));
}

inline json state_to_json(const NetworkState& s) {
  json j = json::array();
  for (auto& q : s.queues) j.push_back(config_to_json(q));
  return j;
}

inline NetworkState state_from_json(const json& j) {
  if (!j.is_array()) throw InvalidArgument("network state must be a JSON array of configurations");
  NetworkState s;
  for (auto& q : j) s.queues.push_back(config_from_json(q));
  return s;
}

/// Parses a state given as JSON text, e.g. "[[1],[]]".
inline NetworkState parse_state(const Network& net, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("cannot parse state '" + text + "': " + e.what());
  }
  NetworkState s = state_from_json(j);
  check_state(net, s);
  return s;
}

namespace detail {

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InvalidSpec(std::string("spec is missing \"") + key + "\"");
  return j.at(key);
}

template <class T>
T get_as(const json& j, const char* what) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw InvalidSpec(std::string("spec field \"") + what + "\" has the wrong type");
  }
}

inline ServiceAllocation allocation_from_json(const json& j) {
  std::string type;
  if (j.is_string()) {
    type = j.get<std::string>();
  } else if (j.is_object()) {
    type = get_as<std::string>(require(j, "type"), "allocation.type");
  } else {
    throw InvalidSpec("allocation must be a string or an object");
  }
  if (type == "hq") return ServiceAllocation::head_of_queue();
  if (type == "egalitarian") return ServiceAllocation::egalitarian();
  if (type == "proportional") return ServiceAllocation::proportional();
  if (type == "preferential") {
    if (!j.is_object()) throw InvalidSpec("preferential allocation needs a \"ranking\"");
    const auto order = get_as<std::vector<ClassId>>(require(j, "ranking"), "allocation.ranking");
    try {
      return ServiceAllocation::preferential(PriorityRanking::total(order));
    } catch (const InvalidArgument& e) {
      throw InvalidSpec(e.what());
    }
  }
  throw InvalidSpec("unknown allocation \"" + type + "\"");
}

inline json allocation_to_json(const ServiceAllocation& a) {
  if (a.kind() != ServiceAllocation::Kind::preferential) return allocation_name(a.kind());
  json order = json::array();
  for (auto& caste : a.ranking().castes())
    for (ClassId k : caste) order.push_back(k);
  return json{{"type", "preferential"}, {"ranking", order}};
}

inline StationProtocol protocol_from_json(const json& j) {
  if (!j.is_object()) throw InvalidSpec("protocol must be an object");
  const auto policy = get_as<std::string>(require(j, "policy"), "policy");
  StationProtocol p;
  if (policy == "fcfs") {
    p.policy = QueuePolicy::fcfs();
  } else if (policy == "lcfs") {
    p.policy = QueuePolicy::lcfs();
  } else if (policy == "sbp") {
    const auto castes = get_as<std::vector<std::vector<ClassId>>>(require(j, "ranking"), "ranking");
    try {
      p.policy = QueuePolicy::sbp(PriorityRanking(castes));
    } catch (const InvalidArgument& e) {
      throw InvalidSpec(e.what());
    }
  } else {
    throw InvalidSpec("unknown queue policy \"" + policy + "\"");
  }
  p.allocation = j.contains("allocation") ? allocation_from_json(j.at("allocation")) : ServiceAllocation::head_of_queue();
  return p;
}

inline json protocol_to_json(const StationProtocol& p) {
  json j{{"policy", policy_name(p.policy.kind())}};
  if (p.policy.kind() == QueuePolicy::Kind::sbp) j["ranking"] = p.policy.ranking().castes();
  j["allocation"] = allocation_to_json(p.allocation);
  return j;
}

}  // namespace detail

inline NetworkSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw InvalidSpec("spec must be a JSON object");
  NetworkSpec s;
  s.name = j.contains("name") ? detail::get_as<std::string>(j.at("name"), "name") : "";
  s.classes = detail::get_as<int>(detail::require(j, "classes"), "classes");
  s.stations = detail::get_as<std::vector<std::vector<ClassId>>>(detail::require(j, "stations"), "stations");
  s.theta = detail::get_as<std::vector<double>>(detail::require(j, "theta"), "theta");
  s.beta = detail::get_as<std::vector<double>>(detail::require(j, "beta"), "beta");
  s.routing = detail::get_as<std::vector<std::vector<double>>>(detail::require(j, "routing"), "routing");
  const json& prot = detail::require(j, "protocols");
  if (!prot.is_array()) throw InvalidSpec("protocols must be an array");
  for (auto& p : prot) s.protocols.push_back(detail::protocol_from_json(p));
  return s;
}

inline json spec_to_json(const NetworkSpec& s) {
  json j;
  if (!s.name.empty()) j["name"] = s.name;
  j["classes"] = s.classes;
  j["stations"] = s.stations;
  j["theta"] = s.theta;
  j["beta"] = s.beta;
  j["routing"] = s.routing;
  json prot = json::array();
  for (auto& p : s.protocols) prot.push_back(detail::protocol_to_json(p));
  j["protocols"] = prot;
  return j;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// A spec file path, or the name of a built-in fixture.
inline NetworkSpec load_spec(const std::string& path_or_fixture) {
  for (auto& name : fixture_names())
    if (name == path_or_fixture) return builtin_fixture(name);
  const std::string text = read_file(path_or_fixture);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidSpec(path_or_fixture + " is not valid JSON: " + e.what());
  }
  NetworkSpec s = spec_from_json(j);
  if (s.name.empty()) s.name = path_or_fixture;
  return s;
}

/// {"<state JSON>": probability}, states in ascending order.
inline json distribution_to_json(const StateDistribution& d) {
  json j = json::object();
  for (auto& [s, p] : d.sorted()) j[state_to_json(s).dump()] = p;
  return j;
}

}  // namespace qnet
