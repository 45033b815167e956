#pragma once

#include <json.hpp>
#include <string>
#include <variant>

#include "geclab/models.hpp"

namespace geclab {

using Environment = std::variant<TabularMDP, TabularPOMDP>;

// Environment files are JSON objects with keys
//   kind          "mdp" or "pomdp"
//   horizon, states, actions, observations (pomdp only)
//   initial       [S]
//   transitions   [H][A][S][S], transitions[k][a][s] is P_k(. | s, a)
//   emissions     [H][S][O] (pomdp only), emissions[k][s] is O_k(. | s)
//   rewards       [H][S or O][A]
Environment environment_from_json(const nlohmann::json& j);
nlohmann::json environment_to_json(const TabularMDP& mdp);
nlohmann::json environment_to_json(const TabularPOMDP& pomdp);

Environment load_environment(const std::string& path);
void save_environment(const std::string& path, const Environment& env);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace geclab
