#include "geclab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "geclab/errors.hpp"
#include "geclab/gec_trace.hpp"
#include "geclab/generators.hpp"
#include "geclab/planning.hpp"
#include "geclab/simulate.hpp"

namespace geclab {
namespace {

const std::vector<std::string> kKeys = {"agent_kind", "env_file",  "class_file", "class_size", "perturbation",
                                        "class_seed", "T",         "gamma",      "eta",        "n_batch",
                                        "seeds",      "output_dir", "certify_gec", "explore",  "psr_core_steps",
                                        "d_gec",      "threads"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

std::string resolve_relative(const std::string& base_file, const std::string& path) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_file.empty()) return path;
  const auto candidate = std::filesystem::path(base_file).parent_path() / p;
  return std::filesystem::exists(candidate) ? candidate.string() : path;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const long long v = to_int("seeds", item);
    if (v < 0) throw ConfigError("seeds must be nonnegative");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

ExperimentConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  for (const auto& [k, v] : overrides) values[k] = v;

  ExperimentConfig cfg;
  for (const auto& [key, v] : values) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    if (key == "agent_kind") {
      cfg.agent_kind = parse_agent_kind(v);
    } else if (key == "env_file") {
      cfg.env_file = v;
    } else if (key == "class_file") {
      cfg.class_file = v;
    } else if (key == "class_size") {
      cfg.class_size = static_cast<int>(to_int(key, v));
    } else if (key == "perturbation") {
      cfg.perturbation = to_double(key, v);
    } else if (key == "class_seed") {
      cfg.class_seed = static_cast<std::uint64_t>(to_int(key, v));
    } else if (key == "T") {
      cfg.rounds = static_cast<int>(to_int(key, v));
    } else if (key == "gamma") {
      cfg.gamma = to_double(key, v);
    } else if (key == "eta") {
      cfg.eta = to_double(key, v);
    } else if (key == "n_batch") {
      cfg.n_batch = static_cast<int>(to_int(key, v));
    } else if (key == "d_gec") {
      cfg.d_gec = to_double(key, v);
    } else if (key == "seeds") {
      cfg.seeds = parse_seed_list(v);
    } else if (key == "output_dir") {
      cfg.output_dir = v;
    } else if (key == "certify_gec") {
      cfg.certify_gec = to_bool(key, v);
    } else if (key == "explore") {
      if (v == "q-type") {
        cfg.explore = ExplorationKind::kQType;
      } else if (v == "v-type") {
        cfg.explore = ExplorationKind::kVType;
      } else {
        throw ConfigError("config key 'explore': expected q-type or v-type, got '" + v + "'");
      }
    } else if (key == "psr_core_steps") {
      cfg.psr_core_steps = static_cast<int>(to_int(key, v));
    } else if (key == "threads") {
      cfg.threads = static_cast<int>(to_int(key, v));
    }
  }
  return cfg;
}

std::map<std::string, std::string> environment_overrides() {
  std::map<std::string, std::string> out;
  for (const auto& key : kKeys) {
    if (const char* v = std::getenv(("GECLAB_" + upper(key)).c_str())) out[key] = v;
  }
  return out;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg = parse_config(buf.str(), environment_overrides());
  cfg.env_file = resolve_relative(path, cfg.env_file);
  cfg.class_file = resolve_relative(path, cfg.class_file);
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.rounds < 1) throw ConfigError("T must be at least 1");
  if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
  if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
  const std::set<std::uint64_t> distinct(cfg.seeds.begin(), cfg.seeds.end());
  if (distinct.size() != cfg.seeds.size()) throw ConfigError("seeds must be distinct");
  if (cfg.env_file.empty()) throw ConfigError("env_file is required");
  if (!std::filesystem::exists(cfg.env_file)) throw ConfigError("env_file does not exist: " + cfg.env_file);
  if (!cfg.class_file.empty() && !std::filesystem::exists(cfg.class_file)) {
    throw ConfigError("class_file does not exist: " + cfg.class_file);
  }
  if (cfg.class_file.empty() && cfg.class_size < 1) throw ConfigError("class_size must be at least 1");
  if (cfg.n_batch && *cfg.n_batch < 1) throw ConfigError("n_batch must be at least 1");
  if (cfg.psr_core_steps < 1) throw ConfigError("psr_core_steps must be at least 1");
  const Model env = load_model(cfg.env_file);
  if (!cfg.class_file.empty()) {
    const ModelClass cls = load_model_class(cfg.class_file);
    if (cls.size() == 0) throw ConfigError("class file has no members");
  }
  (void)env;
}

std::vector<int> checkpoint_rounds(int n) {
  return {std::max(1, n / 10), std::max(1, n / 2), std::max(1, n)};
}

nlohmann::json summary_to_json(const RunSummary& s) {
  nlohmann::json j;
  j["agent_kind"] = s.agent_kind;
  j["T"] = s.rounds;
  j["gamma"] = s.gamma;
  j["eta"] = s.eta;
  j["n_batch"] = s.n_batch;
  j["checkpoint_rounds"] = s.checkpoint_rounds;
  j["checkpoint_mean"] = s.checkpoint_mean;
  j["checkpoint_std"] = s.checkpoint_std;
  j["final_mean"] = s.final_mean;
  j["final_std"] = s.final_std;
  j["seeds"] = nlohmann::json::array();
  for (const auto& seed : s.seeds) {
    nlohmann::json js;
    js["seed"] = seed.seed;
    js["final_regret"] = seed.final_regret;
    js["checkpoints"] = seed.checkpoints;
    js["mass_on_truth"] = seed.mass_on_truth;
    js["max_normalization_error"] = seed.max_normalization_error;
    if (seed.certificate) js["certificate"] = gec_certificate_to_json(*seed.certificate);
    j["seeds"].push_back(std::move(js));
  }
  return j;
}

void write_regret_csv(const std::string& path, const std::vector<RegretRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "t,hypothesis_index,V_pred,V_realized,regret_step,regret_cum,mass_on_truth\n";
  for (const auto& r : records) {
    out << r.t << ',' << r.hypothesis_index << ',' << fmt(r.v_pred) << ',' << fmt(r.v_realized) << ','
        << fmt(r.regret_step) << ',' << fmt(r.regret_cum) << ',' << fmt(r.mass_on_truth) << '\n';
  }
}

HypothesisClass<PoBilinearHypothesis> make_pobilinear_instance_class(const TabularPOMDP& env, int n,
                                                                    std::uint64_t seed) {
  if (n < 1) throw ConfigError("po-bilinear class needs at least one policy");
  const int horizon = env.horizon(), num_obs = env.num_observations(), num_actions = env.num_actions();
  HistoryPolicy best;
  if (horizon <= 2) {
    // Memory 1 already sees the whole history, so the history-tree optimum is a memory-1 policy.
    HistoryPlan plan = plan_history_tree(env);
    best = HistoryPolicy::memory(1, num_obs, num_actions, plan.policy.tables());
  } else {
    CounterRng rng(derive_key(seed, 21, 0));
    best = random_memory_policy(1, horizon, num_obs, num_actions, rng);
    double value = evaluate_policy(env, best);
    // Coordinate ascent over the deterministic table rows.
    for (bool improved = true; improved;) {
      improved = false;
      auto tables = best.tables();
      for (int k = 0; k < horizon; ++k) {
        for (Eigen::Index r = 0; r < tables[k].rows(); ++r) {
          for (int a = 0; a < num_actions; ++a) {
            if (tables[k](r, a) == 1.0) continue;
            auto trial = tables;
            trial[k].row(r).setZero();
            trial[k](r, a) = 1.0;
            HistoryPolicy p = HistoryPolicy::memory(1, num_obs, num_actions, trial);
            const double v = evaluate_policy(env, p);
            if (v > value + 1e-12) {
              value = v;
              tables = std::move(trial);
              best = std::move(p);
              improved = true;
            }
          }
        }
      }
    }
  }
  std::vector<HistoryPolicy> policies{best};
  CounterRng rng(derive_key(seed, 22, 0));
  for (int attempt = 0; static_cast<int>(policies.size()) < n; ++attempt) {
    HistoryPolicy p = random_memory_policy(1, horizon, num_obs, num_actions, rng);
    bool dup = false;
    for (const auto& q : policies) {
      bool same = true;
      for (int k = 0; k < horizon && same; ++k) same = q.tables()[k] == p.tables()[k];
      dup = dup || same;
    }
    if (!dup || attempt > 1000) policies.push_back(std::move(p));
  }
  return make_pobilinear_class(env, policies, 0);
}

AnyClass build_class(const ExperimentConfig& cfg, const Model& env) {
  if (cfg.agent_kind == AgentKind::kPoBilinear) {
    const auto* pomdp = std::get_if<TabularPOMDP>(&env);
    if (!pomdp) throw ConfigError("po-bilinear runs need a POMDP environment");
    return make_pobilinear_instance_class(*pomdp, cfg.class_size, cfg.class_seed);
  }
  ModelClass models;
  if (!cfg.class_file.empty()) {
    models = load_model_class(cfg.class_file);
  } else {
    SeededSampler sampler(cfg.class_seed, 11);
    models = make_perturbation_class(env, cfg.class_size, cfg.perturbation, sampler);
  }
  if (cfg.agent_kind != AgentKind::kModelFree) return models;
  const auto* truth = std::get_if<TabularMDP>(&env);
  if (!truth) throw ConfigError("model-free runs need an MDP environment");
  std::vector<TabularMDP> mdps;
  for (const auto& m : models.members) {
    const auto* mdp = std::get_if<TabularMDP>(&m.model);
    if (!mdp) throw ConfigError("model-free class members must be MDPs");
    mdps.push_back(*mdp);
  }
  return value_class_from_models(mdps, *truth);
}

BurnInForm burn_in_for(AgentKind kind) { return kind == AgentKind::kPsr ? BurnInForm::kPsr : BurnInForm::kGeneric; }

GecTrace build_gec_trace(AgentKind kind, const Model& env, const AnyClass& cls, const RunResult& run,
                         const ExperimentConfig& cfg) {
  switch (kind) {
    case AgentKind::kModelBased:
      return model_based_gec_trace(std::get<TabularMDP>(env), std::get<ModelClass>(cls), run);
    case AgentKind::kModelFree:
      return model_free_gec_trace(std::get<TabularMDP>(env), std::get<LayeredValueClass>(cls), run, cfg.explore);
    case AgentKind::kPsr: {
      const auto& models = std::get<ModelClass>(cls);
      return psr_gec_trace(env, models, run, psr_exploration_core(models, cfg.psr_core_steps));
    }
    case AgentKind::kPoBilinear:
      break;
  }
  throw ConfigError("GEC traces are not available for the po-bilinear agent");
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const Model env = load_model(cfg.env_file);
  const AnyClass cls = build_class(cfg, env);
  std::filesystem::create_directories(cfg.output_dir);

  const std::size_t n = cfg.seeds.size();
  std::vector<SeedSummary> summaries(n);
  std::vector<RunResult> results(n);
  std::vector<std::string> failures(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      const std::uint64_t seed = cfg.seeds[i];
      try {
        AgentConfig ac;
        ac.kind = cfg.agent_kind;
        ac.rounds = cfg.rounds;
        ac.gamma = cfg.gamma;
        ac.eta = cfg.eta;
        ac.n_batch = cfg.n_batch;
        ac.d_gec = cfg.d_gec;
        ac.seed = seed;
        ac.explore = cfg.explore;
        ac.psr_core_steps = cfg.psr_core_steps;
        RunResult run = run_gps_idm(env, cls, ac);
        write_regret_csv((std::filesystem::path(cfg.output_dir) / ("regret_seed" + std::to_string(seed) + ".csv")).string(),
                         run.records);
        SeedSummary s;
        s.seed = seed;
        s.final_regret = run.records.back().regret_cum;
        for (int c : checkpoint_rounds(static_cast<int>(run.records.size()))) {
          s.checkpoints.push_back(run.records[c - 1].regret_cum);
        }
        for (const auto& r : run.records) s.mass_on_truth.push_back(r.mass_on_truth);
        s.max_normalization_error = run.max_normalization_error;
        if (cfg.certify_gec) {
          const GecTrace trace = build_gec_trace(cfg.agent_kind, env, cls, run, cfg);
          write_json_file((std::filesystem::path(cfg.output_dir) / ("trace_seed" + std::to_string(seed) + ".json")).string(),
                          gec_trace_to_json(trace));
          const double eps = 1.0 / (run.stages * std::sqrt(static_cast<double>(run.records.size())));
          s.certificate = gec_certificate(trace, burn_in_for(cfg.agent_kind), eps);
        }
        summaries[i] = std::move(s);
        results[i] = std::move(run);
      } catch (const RunError& e) {
        failures[i] = "seed " + std::to_string(seed) + ", " + e.what();
      } catch (const std::exception& e) {
        failures[i] = "seed " + std::to_string(seed) + ": " + e.what();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(cfg.threads, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (!f.empty()) throw Error(f);
  }

  RunSummary out;
  out.agent_kind = to_string(cfg.agent_kind);
  out.rounds = static_cast<int>(results.front().records.size());
  out.checkpoint_rounds = checkpoint_rounds(out.rounds);
  out.gamma = results.front().gamma;
  out.eta = results.front().eta;
  out.n_batch = results.front().n_batch;
  out.seeds = std::move(summaries);
  for (std::size_t c = 0; c < out.checkpoint_rounds.size(); ++c) {
    std::vector<double> vals;
    for (const auto& s : out.seeds) vals.push_back(s.checkpoints[c]);
    out.checkpoint_mean.push_back(mean_of(vals));
    out.checkpoint_std.push_back(population_std(vals));
  }
  std::vector<double> finals;
  for (const auto& s : out.seeds) finals.push_back(s.final_regret);
  out.final_mean = mean_of(finals);
  out.final_std = population_std(finals);
  write_json_file((std::filesystem::path(cfg.output_dir) / "summary.json").string(), summary_to_json(out));
  return out;
}

}  // namespace geclab
