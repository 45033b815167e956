#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "geclab/errors.hpp"
#include "geclab/generators.hpp"
#include "geclab/harness.hpp"
#include "geclab/model_io.hpp"
#include "helpers.hpp"

using namespace geclab;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("geclab_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommandResult {
  int status = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const std::string cmd = std::string(GECLAB_CLI_PATH) + " " + args + " 2>&1";
  CommandResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path small_mdp_file(const fs::path& dir) {
  CounterRng g = testutil::rng_for(70);
  const fs::path p = dir / "env.json";
  save_environment(p.string(), random_mdp(3, 2, 3, g));
  return p;
}

std::vector<std::string> csv_column(const fs::path& p, int col) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int i = 0; i <= col; ++i) std::getline(ss, cell, ',');
    out.push_back(cell);
  }
  return out;
}

}  // namespace

TEST_CASE("config parsing, comments and unknown keys") {
  const ExperimentConfig cfg = parse_config(
      "# comment\nagent_kind = model-free\nT = 50\nseeds = 3,5,9\neta = 0.25\nexplore = v-type\n");
  CHECK(cfg.agent_kind == AgentKind::kModelFree);
  CHECK(cfg.rounds == 50);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 5, 9});
  REQUIRE(cfg.eta.has_value());
  CHECK(*cfg.eta == 0.25);
  CHECK_FALSE(cfg.gamma.has_value());
  CHECK(cfg.explore == ExplorationKind::kVType);

  CHECK_THROWS_AS(parse_config("horizon = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("T = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("just words\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("certify_gec = maybe\n"), ConfigError);
  CHECK(parse_config("T = 10\n", {{"T", "20"}}).rounds == 20);
}

TEST_CASE("environment variables override file values") {
  ::setenv("GECLAB_T", "17", 1);
  ::setenv("GECLAB_CLASS_SIZE", "4", 1);
  const ExperimentConfig cfg = parse_config("T = 10\nclass_size = 2\n", environment_overrides());
  ::unsetenv("GECLAB_T");
  ::unsetenv("GECLAB_CLASS_SIZE");
  CHECK(cfg.rounds == 17);
  CHECK(cfg.class_size == 4);
}

TEST_CASE("validate_config rejects bad settings") {
  const fs::path dir = scratch_dir("validate");
  ExperimentConfig cfg;
  cfg.env_file = small_mdp_file(dir).string();
  CHECK_NOTHROW(validate_config(cfg));
  ExperimentConfig bad = cfg;
  bad.rounds = 0;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = cfg;
  bad.seeds = {1, 1};
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = cfg;
  bad.env_file = (dir / "missing.json").string();
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("1,-2"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint rounds") {
  CHECK(checkpoint_rounds(100) == std::vector<int>{10, 50, 100});
  CHECK(checkpoint_rounds(1) == std::vector<int>{1, 1, 1});
  CHECK(checkpoint_rounds(7) == std::vector<int>{1, 3, 7});
}

TEST_CASE("experiment artifacts: header, determinism, zero regret with one member") {
  const fs::path dir = scratch_dir("run");
  ExperimentConfig cfg;
  cfg.env_file = small_mdp_file(dir).string();
  cfg.rounds = 40;
  cfg.seeds = {0, 1, 2};
  cfg.class_size = 5;
  cfg.output_dir = (dir / "a").string();
  cfg.certify_gec = true;
  const RunSummary first = run_experiment(cfg);
  cfg.output_dir = (dir / "b").string();
  cfg.threads = 3;
  const RunSummary second = run_experiment(cfg);

  for (const char* f : {"regret_seed0.csv", "regret_seed1.csv", "regret_seed2.csv", "trace_seed1.json"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  std::ifstream in(dir / "a" / "regret_seed0.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,hypothesis_index,V_pred,V_realized,regret_step,regret_cum,mass_on_truth");
  CHECK(csv_column(dir / "a" / "regret_seed0.csv", 0).size() == 40u);
  CHECK(fs::exists(dir / "a" / "summary.json"));

  REQUIRE(first.seeds.size() == 3u);
  for (const auto& s : first.seeds) {
    REQUIRE(s.checkpoints.size() == 3u);
    CHECK(s.checkpoints[0] <= s.checkpoints[1] + 1e-12);
    CHECK(s.checkpoints[1] <= s.checkpoints[2] + 1e-12);
    CHECK(s.certificate.has_value());
  }
  double mean = 0.0, var = 0.0;
  for (const auto& s : first.seeds) mean += s.final_regret / 3.0;
  for (const auto& s : first.seeds) var += (s.final_regret - mean) * (s.final_regret - mean) / 3.0;
  CHECK(first.final_mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(first.final_std == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  CHECK(second.final_mean == first.final_mean);

  cfg.class_size = 1;
  cfg.certify_gec = false;
  cfg.output_dir = (dir / "single").string();
  run_experiment(cfg);
  for (const auto& v : csv_column(dir / "single" / "regret_seed2.csv", 5)) CHECK(std::stod(v) == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("cli validate names the offending transition row") {
  const fs::path dir = scratch_dir("cli_validate");
  const fs::path good = small_mdp_file(dir);
  nlohmann::json j = read_json_file(good.string());
  j["transitions"][1][0][2] = {0.5, 0.49, 0.0};
  const fs::path bad = dir / "bad.json";
  write_json_file(bad.string(), j);

  const CommandResult ok = run_cli("validate " + good.string());
  CHECK(ok.status == 0);
  const CommandResult r = run_cli("validate " + bad.string());
  CHECK(r.status != 0);
  CHECK(r.output.find("transitions[step=1][action=0][state=2] sums to 0.99") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli certify-psr on an identity POMDP") {
  const fs::path dir = scratch_dir("cli_psr");
  CounterRng g = testutil::rng_for(71);
  const fs::path env = dir / "pomdp.json";
  save_environment(env.string(), random_identity_pomdp(3, 2, 3, g));
  const CommandResult r = run_cli("certify-psr " + env.string());
  REQUIRE(r.status == 0);
  const nlohmann::json cert = nlohmann::json::parse(r.output);
  CHECK(cert["alpha_generalized"].get<double>() >= 1.0 / std::sqrt(3.0) - 1e-12);
  fs::remove_all(dir);
}

TEST_CASE("cli reports errors with a nonzero status") {
  const fs::path dir = scratch_dir("cli_error");
  std::ofstream(dir / "bad.cfg") << "horizon = 3\n";
  const CommandResult r = run_cli("run --config " + (dir / "bad.cfg").string());
  CHECK(r.status != 0);
  CHECK(r.output.find("error: unknown config key 'horizon'") != std::string::npos);
  CHECK(run_cli("run --config " + (dir / "missing.cfg").string()).status != 0);
  fs::remove_all(dir);
}
