#include "relq/mdp_io.hpp"

#include <fstream>
#include <sstream>

#include "relq/error.hpp"

namespace relq {

namespace {

int require_int(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_integer())
    throw ValidationError(key, std::string("field '") + key + "' must be an integer");
  const int v = j[key].get<int>();
  if (v < 1) throw ValidationError(key, std::string("field '") + key + "' must be positive");
  return v;
}

double as_number(const nlohmann::json& v, const std::string& axis, const std::string& where) {
  if (!v.is_number()) throw ValidationError(axis, where + " is not a number");
  return v.get<double>();
}

}  // namespace

MdpModel mdp_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("mdp", "MDP document must be a JSON object");
  const int ns = require_int(j, "num_states");
  const int na = require_int(j, "num_actions");
  if (!j.contains("discount") || !j["discount"].is_number())
    throw ValidationError("discount", "field 'discount' must be a number");
  const double discount = j["discount"].get<double>();

  const auto& t = j.value("transitions", nlohmann::json());
  if (!t.is_array() || static_cast<int>(t.size()) != na) {
    std::ostringstream os;
    os << "transitions must be an array of " << na << " matrices";
    throw ValidationError("action", os.str());
  }
  std::vector<Matrix> p(na, Matrix(ns, ns));
  for (int u = 0; u < na; ++u) {
    if (!t[u].is_array() || static_cast<int>(t[u].size()) != ns) {
      std::ostringstream os;
      os << "transitions[" << u << "] must have " << ns << " rows";
      throw ValidationError("state", os.str());
    }
    for (int x = 0; x < ns; ++x) {
      const auto& row = t[u][x];
      std::ostringstream where;
      where << "transition row (action " << u << ", state " << x << ")";
      if (!row.is_array() || static_cast<int>(row.size()) != ns)
        throw ValidationError("state", where.str() + " has wrong length");
      for (int y = 0; y < ns; ++y) p[u](x, y) = as_number(row[y], "transitions", where.str());
    }
  }

  const auto& c = j.value("cost", nlohmann::json());
  if (!c.is_array() || static_cast<int>(c.size()) != ns) {
    std::ostringstream os;
    os << "cost must have " << ns << " rows";
    throw ValidationError("cost", os.str());
  }
  Matrix cost(ns, na);
  for (int x = 0; x < ns; ++x) {
    std::ostringstream where;
    where << "cost row (state " << x << ")";
    if (!c[x].is_array() || static_cast<int>(c[x].size()) != na)
      throw ValidationError("cost", where.str() + " has wrong length");
    for (int u = 0; u < na; ++u) cost(x, u) = as_number(c[x][u], "cost", where.str());
  }

  std::vector<std::string> labels;
  if (j.contains("labels") && !j["labels"].is_null()) {
    if (!j["labels"].is_array()) throw ValidationError("labels", "labels must be an array");
    for (const auto& l : j["labels"]) labels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
  }
  return MdpModel::create(std::move(p), std::move(cost), discount, std::move(labels));
}

nlohmann::json mdp_to_json(const MdpModel& mdp) {
  nlohmann::json j;
  j["num_states"] = mdp.num_states();
  j["num_actions"] = mdp.num_actions();
  j["discount"] = mdp.discount();
  nlohmann::json t = nlohmann::json::array();
  for (int u = 0; u < mdp.num_actions(); ++u) {
    nlohmann::json m = nlohmann::json::array();
    for (int x = 0; x < mdp.num_states(); ++x) {
      nlohmann::json row = nlohmann::json::array();
      for (int y = 0; y < mdp.num_states(); ++y) row.push_back(mdp.transition(u)(x, y));
      m.push_back(row);
    }
    t.push_back(m);
  }
  j["transitions"] = t;
  nlohmann::json c = nlohmann::json::array();
  for (int x = 0; x < mdp.num_states(); ++x) {
    nlohmann::json row = nlohmann::json::array();
    for (int u = 0; u < mdp.num_actions(); ++u) row.push_back(mdp.cost()(x, u));
    c.push_back(row);
  }
  j["cost"] = c;
  if (!mdp.labels().empty()) j["labels"] = mdp.labels();
  return j;
}

MdpModel load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open MDP file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("mdp", "malformed JSON in " + path + ": " + e.what());
  }
  return mdp_from_json(j);
}

void save_mdp(const MdpModel& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path);
  out << mdp_to_json(mdp).dump(2) << "\n";
}

}  // namespace relq
