#pragma once

#include <json.hpp>
#include <string>

#include "relq/mdp.hpp"

namespace relq {

MdpModel mdp_from_json(const nlohmann::json& j);
nlohmann::json mdp_to_json(const MdpModel& mdp);

MdpModel load_mdp(const std::string& path);
void save_mdp(const MdpModel& mdp, const std::string& path);

}  // namespace relq
