#include "geclab/model_io.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "geclab/errors.hpp"

namespace geclab {
namespace {

using nlohmann::json;

const json& require(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
  return j.at(key);
}

int require_int(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    throw ConfigError(std::string("key '") + key + "' must be a positive integer");
  }
  return v.get<int>();
}

void check_size(const json& v, std::size_t n, const std::string& what) {
  if (!v.is_array() || v.size() != n) {
    std::ostringstream msg;
    msg << what << " must be an array of length " << n;
    throw ConfigError(msg.str());
  }
}

Eigen::VectorXd read_vector(const json& v, int n, const std::string& what) {
  check_size(v, n, what);
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    if (!v[i].is_number()) throw ConfigError(what + " must contain numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

// rows[r] is a length-c array; result is rows x c.
Eigen::MatrixXd read_rows(const json& v, int rows, int cols, const std::string& what) {
  check_size(v, rows, what);
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    out.row(r) = read_vector(v[r], cols, what + "[" + std::to_string(r) + "]").transpose();
  }
  return out;
}

std::vector<std::vector<Eigen::MatrixXd>> read_transitions(const json& j, int h, int a, int s) {
  const json& t = require(j, "transitions");
  check_size(t, h, "transitions");
  std::vector<std::vector<Eigen::MatrixXd>> out(h);
  for (int k = 0; k < h; ++k) {
    check_size(t[k], a, "transitions[" + std::to_string(k) + "]");
    for (int act = 0; act < a; ++act) {
      const std::string where = "transitions[" + std::to_string(k) + "][" + std::to_string(act) + "]";
      out[k].push_back(read_rows(t[k][act], s, s, where).transpose());
    }
  }
  return out;
}

std::vector<Eigen::MatrixXd> read_rewards(const json& j, int h, int rows, int a) {
  const json& r = require(j, "rewards");
  check_size(r, h, "rewards");
  std::vector<Eigen::MatrixXd> out;
  for (int k = 0; k < h; ++k) out.push_back(read_rows(r[k], rows, a, "rewards[" + std::to_string(k) + "]"));
  return out;
}

json rows_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

json common_json(int h, int s, int a, const Eigen::VectorXd& mu,
                 const std::function<const Eigen::MatrixXd&(int, int)>& transition,
                 const std::function<const Eigen::MatrixXd&(int)>& rewards) {
  json j;
  j["horizon"] = h;
  j["states"] = s;
  j["actions"] = a;
  j["initial"] = std::vector<double>(mu.data(), mu.data() + mu.size());
  json t = json::array();
  for (int k = 0; k < h; ++k) {
    json tk = json::array();
    for (int act = 0; act < a; ++act) tk.push_back(rows_to_json(transition(k, act).transpose()));
    t.push_back(std::move(tk));
  }
  j["transitions"] = std::move(t);
  json r = json::array();
  for (int k = 0; k < h; ++k) r.push_back(rows_to_json(rewards(k)));
  j["rewards"] = std::move(r);
  return j;
}

}  // namespace

Environment environment_from_json(const json& j) {
  const std::string kind = require(j, "kind").get<std::string>();
  const int h = require_int(j, "horizon");
  const int s = require_int(j, "states");
  const int a = require_int(j, "actions");
  Eigen::VectorXd mu = read_vector(require(j, "initial"), s, "initial");
  auto transitions = read_transitions(j, h, a, s);
  if (kind == "mdp") {
    return TabularMDP(std::move(transitions), read_rewards(j, h, s, a), std::move(mu));
  }
  if (kind == "pomdp") {
    const int o = require_int(j, "observations");
    const json& e = require(j, "emissions");
    check_size(e, h, "emissions");
    std::vector<Eigen::MatrixXd> emissions;
    for (int k = 0; k < h; ++k) {
      emissions.push_back(read_rows(e[k], s, o, "emissions[" + std::to_string(k) + "]").transpose());
    }
    return TabularPOMDP(std::move(transitions), std::move(emissions), read_rewards(j, h, o, a),
                        std::move(mu));
  }
  throw ConfigError("unknown environment kind '" + kind + "'");
}

json environment_to_json(const TabularMDP& mdp) {
  json j = common_json(
      mdp.horizon(), mdp.num_states(), mdp.num_actions(), mdp.initial(),
      [&](int k, int a) -> const Eigen::MatrixXd& { return mdp.transition(k, a); },
      [&](int k) -> const Eigen::MatrixXd& { return mdp.rewards(k); });
  j["kind"] = "mdp";
  return j;
}

json environment_to_json(const TabularPOMDP& pomdp) {
  json j = common_json(
      pomdp.horizon(), pomdp.num_states(), pomdp.num_actions(), pomdp.initial(),
      [&](int k, int a) -> const Eigen::MatrixXd& { return pomdp.transition(k, a); },
      [&](int k) -> const Eigen::MatrixXd& { return pomdp.rewards(k); });
  j["kind"] = "pomdp";
  j["observations"] = pomdp.num_observations();
  json e = json::array();
  for (int k = 0; k < pomdp.horizon(); ++k) e.push_back(rows_to_json(pomdp.emission(k).transpose()));
  j["emissions"] = std::move(e);
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

Environment load_environment(const std::string& path) {
  try {
    return environment_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("malformed environment file '" + path + "': " + e.what());
  }
}

void save_environment(const std::string& path, const Environment& env) {
  std::visit([&](const auto& e) { write_json_file(path, environment_to_json(e)); }, env);
}

}  // namespace geclab
