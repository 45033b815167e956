#include "geclab/acceptance.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <thread>

#include "geclab/complexity.hpp"
#include "geclab/divergences.hpp"
#include "geclab/errors.hpp"
#include "geclab/gec_trace.hpp"
#include "geclab/generators.hpp"
#include "geclab/oracles.hpp"
#include "geclab/planning.hpp"
#include "geclab/psr.hpp"
#include "geclab/psr_certify.hpp"
#include "geclab/simulate.hpp"

namespace geclab {
namespace {

constexpr std::uint64_t kBase = 20240917;

CounterRng stream_rng(std::uint64_t stream, std::uint64_t index = 0) {
  return CounterRng(derive_key(kBase, stream, index));
}

template <class Fn>
void parallel_for(int n, int threads, Fn fn) {
  std::atomic<int> next{0};
  std::vector<std::string> errors(n);
  auto worker = [&]() {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min(threads, n); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (int i = 0; i < n; ++i) {
    if (!errors[i].empty()) throw Error("seed " + std::to_string(i) + ": " + errors[i]);
  }
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

TabularPOMDP with_rewards(const TabularPOMDP& p, std::vector<Eigen::MatrixXd> rewards) {
  std::vector<std::vector<Eigen::MatrixXd>> t(p.horizon());
  std::vector<Eigen::MatrixXd> e;
  for (int k = 0; k < p.horizon(); ++k) {
    for (int a = 0; a < p.num_actions(); ++a) t[k].push_back(p.transition(k, a));
    e.push_back(p.emission(k));
  }
  return TabularPOMDP(std::move(t), std::move(e), std::move(rewards), p.initial());
}

std::vector<Eigen::MatrixXd> terminal_rewards(int rows, int actions, int horizon) {
  std::vector<Eigen::MatrixXd> rewards;
  for (int k = 0; k < horizon; ++k) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(rows, actions);
    if (k == horizon - 1) {
      for (int s = 0; s < rows; ++s) r.row(s).setConstant(static_cast<double>(s) / (rows - 1));
    }
    rewards.push_back(std::move(r));
  }
  return rewards;
}

// Random dynamics with reward only at the last step (s / (S - 1) for state s),
// so optimal actions depend on the transitions and perturbed models disagree.
TabularMDP terminal_reward_mdp(int states, int actions, int horizon, CounterRng& rng) {
  const TabularMDP base = random_mdp(states, actions, horizon, rng);
  std::vector<std::vector<Eigen::MatrixXd>> t(horizon);
  for (int k = 0; k < horizon; ++k) {
    for (int a = 0; a < actions; ++a) t[k].push_back(base.transition(k, a));
  }
  return TabularMDP(std::move(t), terminal_rewards(states, actions, horizon), base.initial());
}

struct PoInstance {
  TabularPOMDP env;
  HypothesisClass<PoBilinearHypothesis> cls;
  std::vector<double> policy_values;
};

// S = 2, O = 3, A = 2, H = 2; one rewarded action per (step, observation).
PoInstance pobilinear_instance() {
  CounterRng rng = stream_rng(300);
  const TabularPOMDP base = random_weakly_revealing_pomdp(2, 3, 2, 2, rng, 0.05);
  std::vector<Eigen::MatrixXd> rewards;
  for (int k = 0; k < base.horizon(); ++k) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(3, 2);
    for (int o = 0; o < 3; ++o) r(o, static_cast<int>(rng() % 2)) = 0.5;
    rewards.push_back(std::move(r));
  }
  TabularPOMDP env = with_rewards(base, std::move(rewards));
  // With H = 2 a memory-1 policy sees the full history, so the history-tree optimum is memory-1.
  const HistoryPlan plan = plan_history_tree(env);
  std::vector<HistoryPolicy> policies{HistoryPolicy::memory(1, 3, 2, plan.policy.tables())};
  std::vector<double> values{evaluate_policy(env, policies[0])};
  while (policies.size() < 5) {
    HistoryPolicy p = random_memory_policy(1, 2, 3, 2, rng);
    const double v = evaluate_policy(env, p);
    if (values[0] - v >= 0.1) {
      policies.push_back(std::move(p));
      values.push_back(v);
    }
  }
  auto cls = make_pobilinear_class(env, policies, 0);
  return PoInstance{std::move(env), std::move(cls), std::move(values)};
}

// Decay check shared by the two regret criteria.
struct Decay {
  double early = 0.0;
  double late = 0.0;
  double mass = 0.0;
  int seeds_decaying = 0;
};

Decay decay_of(const std::vector<RunResult>& runs, int early_round, int late_round) {
  std::vector<double> early, late, mass;
  for (const auto& r : runs) {
    early.push_back(r.records[early_round - 1].regret_cum / early_round);
    late.push_back(r.records[late_round - 1].regret_cum / late_round);
    mass.push_back(r.records[late_round - 1].mass_on_truth);
  }
  int decaying = 0;
  for (std::size_t i = 0; i < early.size(); ++i) decaying += late[i] < early[i] / 3.0 ? 1 : 0;
  return Decay{mean(early), mean(late), mean(mass), decaying};
}

}  // namespace

AcceptanceSuite::AcceptanceSuite(AcceptanceOptions options) : options_(options) {}

std::string format_result(const CriterionResult& r) {
  std::ostringstream out;
  char secs[32];
  std::snprintf(secs, sizeof secs, "%.1f", r.seconds);
  out << (r.passed ? "[PASS] " : "[FAIL] ") << r.id << " " << r.name << " (" << secs << " s): " << r.detail;
  return out.str();
}

CriterionResult AcceptanceSuite::run(int id) {
  const auto start = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    switch (id) {
      case 1: r = sublinear_model_based(); break;
      case 2: r = sublinear_psr(); break;
      case 3: r = psr_embedding(); break;
      case 4: r = regularity(); break;
      case 5: r = divergences(); break;
      case 6: r = potentials(); break;
      case 7: r = gec_consistency(); break;
      case 8: r = posterior_exactness(); break;
      case 9: r = planning(); break;
      case 10: r = pobilinear(); break;
      default: throw ConfigError("no acceptance criterion " + std::to_string(id));
    }
  } catch (const Error& e) {
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.id = id;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<CriterionResult> AcceptanceSuite::run_all() {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= kCriteria; ++id) out.push_back(run(id));
  return out;
}

void AcceptanceSuite::ensure_mdp_runs() {
  if (!runs_.mdp_runs.empty()) return;
  CounterRng rng = stream_rng(100);
  runs_.mdp_env = std::make_unique<Model>(terminal_reward_mdp(3, 2, 3, rng));
  SeededSampler sampler(kBase, 101);
  runs_.mdp_class = std::make_unique<ModelClass>(make_perturbation_class(*runs_.mdp_env, 20, 0.3, sampler));
  runs_.mdp_runs.resize(options_.seeds);
  parallel_for(options_.seeds, options_.threads, [&](int s) {
    AgentConfig cfg;
    cfg.kind = AgentKind::kModelBased;
    cfg.rounds = 2000;
    cfg.seed = static_cast<std::uint64_t>(s);
    runs_.mdp_runs[s] = run_model_based(*runs_.mdp_env, *runs_.mdp_class, cfg);
  });
}

void AcceptanceSuite::ensure_psr_runs() {
  if (!runs_.psr_runs.empty()) return;
  CounterRng rng = stream_rng(200);
  const TabularPOMDP base = random_identity_pomdp(3, 2, 3, rng);
  runs_.psr_env = std::make_unique<Model>(with_rewards(base, terminal_rewards(3, 2, 3)));
  SeededSampler sampler(kBase, 201);
  runs_.psr_class = std::make_unique<ModelClass>(make_perturbation_class(*runs_.psr_env, 10, 0.3, sampler));
  runs_.psr_runs.resize(options_.seeds);
  parallel_for(options_.seeds, options_.threads, [&](int s) {
    AgentConfig cfg;
    cfg.kind = AgentKind::kPsr;
    cfg.rounds = 1000;
    cfg.seed = static_cast<std::uint64_t>(s);
    runs_.psr_runs[s] = run_psr(*runs_.psr_env, *runs_.psr_class, cfg);
  });
}

void AcceptanceSuite::ensure_pobilinear_runs() {
  if (!runs_.pobilinear_runs.empty()) return;
  const PoInstance inst = pobilinear_instance();
  runs_.pobilinear_runs.resize(options_.seeds);
  runs_.pobilinear_uniform_runs.resize(options_.seeds);
  parallel_for(options_.seeds, options_.threads, [&](int s) {
    AgentConfig cfg;
    cfg.kind = AgentKind::kPoBilinear;
    cfg.rounds = 5000;
    cfg.seed = static_cast<std::uint64_t>(s);
    runs_.pobilinear_runs[s] = run_pobilinear(inst.env, inst.cls, cfg);
    cfg.uniform_selection = true;
    runs_.pobilinear_uniform_runs[s] = run_pobilinear(inst.env, inst.cls, cfg);
  });
}

CriterionResult AcceptanceSuite::sublinear_model_based() {
  CriterionResult r;
  r.name = "model-based regret decay";
  ensure_mdp_runs();
  const Decay d = decay_of(runs_.mdp_runs, 200, 2000);
  r.passed = d.late < d.early / 3.0 && d.mass > 0.5;
  r.detail = "mean Reg/T at T=200 " + num(d.early) + ", at T=2000 " + num(d.late) + " (need < " +
             num(d.early / 3.0) + "); mean mass on truth at T=2000 " + num(d.mass) + " (need > 0.5); " +
             std::to_string(d.seeds_decaying) + "/" + std::to_string(runs_.mdp_runs.size()) + " seeds decay individually";
  return r;
}

CriterionResult AcceptanceSuite::sublinear_psr() {
  CriterionResult r;
  r.name = "psr regret decay";
  ensure_psr_runs();
  const Decay d = decay_of(runs_.psr_runs, 100, 1000);
  r.passed = d.late < d.early / 3.0;
  r.detail = "mean Reg/T at T=100 " + num(d.early) + ", at T=1000 " + num(d.late) + " (need < " +
             num(d.early / 3.0) + "); mean mass on truth at T=1000 " + num(d.mass) + "; " +
             std::to_string(d.seeds_decaying) + "/" + std::to_string(runs_.psr_runs.size()) + " seeds decay individually";
  return r;
}

CriterionResult AcceptanceSuite::psr_embedding() {
  CriterionResult r;
  r.name = "psr embedding exactness";
  double worst = 0.0;
  long long checked = 0;
  auto compare = [&](const TabularPOMDP& pomdp, const OperatorPsr& psr) {
    const auto all = oracle::all_sequences(pomdp.horizon(), pomdp.num_observations(), pomdp.num_actions());
    if (all.size() > 4096) throw CapacityError("instance has more than 4096 trajectories");
    for (const auto& tau : all) {
      worst = std::max(worst, std::abs(dynamics_probability(psr, tau) - oracle::latent_path_probability(pomdp, tau)));
      ++checked;
    }
  };
  for (int i = 0; i < 50; ++i) {
    CounterRng rng = stream_rng(310, i);
    const TabularPOMDP pomdp = random_weakly_revealing_pomdp(2 + i % 2, 3, 2, 3, rng);
    compare(pomdp, psr_from_weakly_revealing_pomdp(pomdp, 1));
  }
  for (int i = 0; i < 20; ++i) {
    CounterRng rng = stream_rng(311, i);
    const TabularPOMDP pomdp =
        i % 2 == 0 ? random_block_mdp(2, 2, 2, 3, rng) : random_two_step_decodable(2, 2, 2, 3, rng);
    const Decoder dec = infer_decoder(pomdp, i % 2 == 0 ? 1 : 2);
    compare(pomdp, psr_from_decodable_pomdp(pomdp, dec));
  }
  r.passed = worst <= 1e-10;
  r.detail = "70 instances, " + std::to_string(checked) + " trajectories, max |diff| " + num(worst) + " (tol 1e-10)";
  return r;
}

CriterionResult AcceptanceSuite::regularity() {
  CriterionResult r;
  r.name = "regularity certificates";
  int fail_identity = 0, fail_decodable = 0, fail_regular = 0;
  double min_identity_margin = 1e300, min_decodable = 1e300, min_gap = 1e300;
  for (int i = 0; i < 100; ++i) {
    CounterRng rng = stream_rng(400, i);
    const int s = 2 + i % 2;
    const TabularPOMDP pomdp = random_identity_pomdp(s, 2, 3, rng);
    const double alpha = check_generalized_regular(psr_from_weakly_revealing_pomdp(pomdp, 1)).alpha;
    const double margin = alpha - 1.0 / std::sqrt(static_cast<double>(s));
    min_identity_margin = std::min(min_identity_margin, margin);
    if (margin < -1e-9) ++fail_identity;
  }
  for (int i = 0; i < 100; ++i) {
    CounterRng rng = stream_rng(401, i);
    const bool block = i % 2 == 0;
    const TabularPOMDP pomdp = block ? random_block_mdp(2, 2, 2, 3, rng) : random_two_step_decodable(2, 2, 2, 3, rng);
    const OperatorPsr psr = psr_from_decodable_pomdp(pomdp, infer_decoder(pomdp, block ? 1 : 2));
    const double alpha = check_generalized_regular(psr).alpha;
    min_decodable = std::min(min_decodable, alpha);
    if (alpha < 1.0 - 1e-9) ++fail_decodable;
  }
  for (int i = 0; i < 100; ++i) {
    CounterRng rng = stream_rng(402, i);
    const TabularPOMDP pomdp = random_invertible_emission_pomdp(2 + i % 2, 2, 3, rng);
    const OperatorPsr psr = psr_with_minimal_core(pomdp);
    const double regular = check_regular(psr).alpha;
    const double generalized = check_generalized_regular(psr).alpha;
    min_gap = std::min(min_gap, generalized - regular);
    if (generalized < regular - 1e-9) ++fail_regular;
  }
  r.passed = fail_identity + fail_decodable + fail_regular == 0;
  r.detail = "identity: " + std::to_string(fail_identity) + "/100 below 1/sqrt(S) (min margin " +
             num(min_identity_margin) + "); decodable: " + std::to_string(fail_decodable) + "/100 below 1 (min " +
             num(min_decodable) + "); regular: " + std::to_string(fail_regular) +
             "/100 with generalized < regular (min gap " + num(min_gap) + ")";
  return r;
}

CriterionResult AcceptanceSuite::divergences() {
  CriterionResult r;
  r.name = "divergence inequalities";
  int fail_l1 = 0, fail_cond = 0;
  double worst_l1 = -1e300, worst_cond = -1e300;
  for (int i = 0; i < 10000; ++i) {
    CounterRng rng = stream_rng(500, i);
    const int n = 2 + static_cast<int>(rng() % 7);
    const double conc = i % 3 == 0 ? 0.2 : 1.0;
    const Eigen::VectorXd p = random_simplex(n, rng, conc), q = random_simplex(n, rng, conc);
    const double l1 = (p - q).cwiseAbs().sum();
    const double gap = l1 * l1 - 8.0 * hellinger_squared(p, q);
    worst_l1 = std::max(worst_l1, gap);
    if (gap > 1e-9) ++fail_l1;

    const int nx = 2 + static_cast<int>(rng() % 3), ny = 2 + static_cast<int>(rng() % 3);
    const Eigen::VectorXd pj = random_simplex(nx * ny, rng, conc), qj = random_simplex(nx * ny, rng, conc);
    const Eigen::MatrixXd pm = Eigen::Map<const Eigen::MatrixXd>(pj.data(), nx, ny);
    const Eigen::MatrixXd qm = Eigen::Map<const Eigen::MatrixXd>(qj.data(), nx, ny);
    const double cgap = expected_conditional_hellinger(pm, qm) - 4.0 * hellinger_squared(pj, qj);
    worst_cond = std::max(worst_cond, cgap);
    if (cgap > 1e-9) ++fail_cond;
  }
  r.passed = fail_l1 + fail_cond == 0;
  r.detail = "10^4 pairs: l1^2 <= 8 D_H^2 failures " + std::to_string(fail_l1) + " (max excess " + num(worst_l1) +
             "); conditional bound failures " + std::to_string(fail_cond) + " (max excess " + num(worst_cond) + ")";
  return r;
}

CriterionResult AcceptanceSuite::potentials() {
  CriterionResult r;
  r.name = "elliptical potential and l2 eluder";
  int fail_ep = 0, fail_el = 0;
  double min_ep = 1e300, min_el = 1e300;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    CounterRng rng = stream_rng(600, i);
    const int d = 1 + static_cast<int>(rng() % 5), t = static_cast<int>(rng() % 51);
    Eigen::MatrixXd b(d, d);
    for (int a = 0; a < d * d; ++a) b.data()[a] = gauss(rng);
    const Eigen::MatrixXd lambda0 = b * b.transpose() + (0.05 + rng.uniform()) * Eigen::MatrixXd::Identity(d, d);
    const double scale = std::exp(4.0 * rng.uniform() - 2.0);
    std::vector<Eigen::VectorXd> xs;
    for (int s = 0; s < t; ++s) {
      Eigen::VectorXd x(d);
      for (int a = 0; a < d; ++a) x[a] = scale * gauss(rng);
      xs.push_back(std::move(x));
    }
    const InequalityCheck c = elliptical_potential_check(xs, lambda0, 1e-9);
    min_ep = std::min(min_ep, c.margin);
    if (!c.holds) ++fail_ep;
  }
  for (int i = 0; i < 10000; ++i) {
    CounterRng rng = stream_rng(601, i);
    EluderInstance inst;
    inst.dim = 1 + static_cast<int>(rng() % 5);
    const int t = 1 + static_cast<int>(rng() % 50);
    const int ni = 1 + static_cast<int>(rng() % 3), nj = 1 + static_cast<int>(rng() % 3);
    double rx2 = 0.0, rw = 0.0;
    for (int s = 0; s < t; ++s) {
      std::vector<Eigen::VectorXd> w, x;
      double wn = 0.0, xn = 0.0;
      const Eigen::VectorXd p = random_simplex(ni, rng);
      for (int j = 0; j < nj; ++j) {
        Eigen::VectorXd v(inst.dim);
        for (int a = 0; a < inst.dim; ++a) v[a] = gauss(rng);
        wn += v.norm();
        w.push_back(std::move(v));
      }
      for (int k = 0; k < ni; ++k) {
        Eigen::VectorXd v(inst.dim);
        for (int a = 0; a < inst.dim; ++a) v[a] = gauss(rng);
        xn += p[k] * v.squaredNorm();
        x.push_back(std::move(v));
      }
      rx2 = std::max(rx2, xn);
      rw = std::max(rw, wn);
      inst.w.push_back(std::move(w));
      inst.x.push_back(std::move(x));
      inst.p.push_back(p);
    }
    inst.r_x = std::sqrt(rx2) * (1.0 + rng.uniform());
    inst.r_w = rw * (1.0 + rng.uniform());
    inst.r = std::exp(3.0 * rng.uniform() - 1.5);
    inst.gamma.resize(t);
    for (int s = 0; s < t; ++s) inst.gamma[s] = eluder_history_sum(inst, s) * (1.0 + rng.uniform());
    const InequalityCheck c = l2_eluder_check(inst, 1e-9);
    min_el = std::min(min_el, c.margin);
    if (!c.holds) ++fail_el;
  }
  r.passed = fail_ep + fail_el == 0;
  r.detail = "10^4 instances each: elliptical failures " + std::to_string(fail_ep) + " (min margin " + num(min_ep) +
             "); eluder failures " + std::to_string(fail_el) + " (min margin " + num(min_el) + ")";
  return r;
}

CriterionResult AcceptanceSuite::gec_consistency() {
  CriterionResult r;
  r.name = "GEC certificate consistency";
  ensure_mdp_runs();
  ensure_psr_runs();
  const auto& mdp = std::get<TabularMDP>(*runs_.mdp_env);
  const int s = mdp.num_states(), a = mdp.num_actions(), h = mdp.horizon();
  const int t_mdp = 2000, t_psr = 1000;
  const double be_bound = be_gec_bound(static_cast<double>(s) * a, h, t_mdp);
  const double eps_mdp = 1.0 / (h * std::sqrt(static_cast<double>(t_mdp)));
  const double wit_bound = witness_gec_bound(static_cast<double>(s) * a, h, t_mdp, eps_mdp, 1.0);
  std::vector<double> d_mdp(options_.seeds), d_psr(options_.seeds);
  parallel_for(options_.seeds, options_.threads, [&](int i) {
    const GecTrace trace = model_based_gec_trace(mdp, *runs_.mdp_class, runs_.mdp_runs[i]);
    const GecCertificate cert = gec_certificate(trace, BurnInForm::kGeneric, eps_mdp);
    if (!gec_inequality_holds(trace, cert.d_hat, BurnInForm::kGeneric, eps_mdp)) {
      throw ModelError("certified d does not satisfy the trace");
    }
    d_mdp[i] = cert.d_hat;
  });

  const auto& pomdp = std::get<TabularPOMDP>(*runs_.psr_env);
  const OperatorPsr psr = psr_from_weakly_revealing_pomdp(pomdp, 1);
  const PsrCertificate pc = certify_psr(psr, &pomdp);
  const int hp = pomdp.horizon();
  const double psr_bound = psr_gec_bound(pc.rank, pomdp.num_actions(), psr.core().max_action_sequences(), hp, t_psr,
                                         pc.alpha_generalized, pc.delta_bound);
  const CoreTestSet core = psr_exploration_core(*runs_.psr_class, 1);
  parallel_for(options_.seeds, options_.threads, [&](int i) {
    const GecTrace trace = psr_gec_trace(*runs_.psr_env, *runs_.psr_class, runs_.psr_runs[i], core);
    const GecCertificate cert = gec_certificate(trace, BurnInForm::kPsr, 0.0);
    if (!gec_inequality_holds(trace, cert.d_hat, BurnInForm::kPsr, 0.0)) {
      throw ModelError("certified d does not satisfy the trace");
    }
    d_psr[i] = cert.d_hat;
  });
  const double max_mdp = *std::max_element(d_mdp.begin(), d_mdp.end());
  const double max_psr = *std::max_element(d_psr.begin(), d_psr.end());
  r.passed = max_mdp <= be_bound && max_psr <= psr_bound;
  r.detail = "model-based max d_hat " + num(max_mdp) + " vs 2 S A H log T = " + num(be_bound) +
             " (witness form " + num(wit_bound) + "); psr max d_hat " + num(max_psr) + " vs bound " + num(psr_bound) +
             " (rank " + std::to_string(pc.rank) + ", alpha " + num(pc.alpha_generalized) + ", delta " +
             num(pc.delta_bound) + ")";
  return r;
}

CriterionResult AcceptanceSuite::posterior_exactness() {
  CriterionResult r;
  r.name = "posterior machinery exactness";
  double worst_marg = 0.0, worst_prob = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    CounterRng rng = stream_rng(800, trial);
    const int h = 2 + trial % 3;
    const TabularMDP env = random_mdp(2, 2, h, rng);
    LayeredValueClass cls;
    cls.layers.resize(h);
    for (int k = 0; k < h; ++k) {
      const int m = 1 + static_cast<int>(rng() % 4);
      for (int i = 0; i < m; ++i) {
        Eigen::MatrixXd q(2, 2);
        for (int j = 0; j < 4; ++j) q.data()[j] = rng.uniform() * (h - k) / h;
        cls.layers[k].push_back(q);
      }
      cls.layer_priors.push_back(random_simplex(m, rng));
      cls.truth.push_back(-1);
    }
    LossLedger ledger = make_value_ledger(cls);
    const HistoryPolicy uniform = HistoryPolicy::uniform(h, 2, 2);
    const int episodes = 1 + static_cast<int>(rng() % 6);
    for (int e = 0; e < episodes; ++e) {
      for (int stage = 1; stage <= h; ++stage) {
        accumulate_model_free(ledger, cls, LedgerEntry{e, stage, 0, {sample_episode(env, uniform, rng)}});
      }
    }
    const double gamma = 2.0 * rng.uniform(), eta = rng.uniform();
    const PosteriorState post = model_free_posterior_update(ledger, cls, env.initial(), gamma, eta);
    const Eigen::VectorXd joint = oracle::joint_value_posterior(cls, ledger.entries, env.initial(), gamma, eta);
    // Marginals and per-tuple sampler probabilities against the enumeration.
    std::vector<int> sizes;
    for (const auto& l : cls.layers) sizes.push_back(static_cast<int>(l.size()));
    std::vector<Eigen::VectorXd> marg(h);
    for (int k = 0; k < h; ++k) marg[k] = Eigen::VectorXd::Zero(sizes[k]);
    std::vector<int> f(h);
    for (Eigen::Index code = 0; code < joint.size(); ++code) {
      Eigen::Index rest = code;
      for (int k = h - 1; k >= 0; --k) {
        f[k] = static_cast<int>(rest % sizes[k]);
        rest /= sizes[k];
      }
      for (int k = 0; k < h; ++k) marg[k][f[k]] += joint[code];
      worst_prob = std::max(worst_prob, std::abs(post.probability(f) - joint[code]));
    }
    const auto chain = post.marginals();
    for (int k = 0; k < h; ++k) worst_marg = std::max(worst_marg, (chain[k] - marg[k]).cwiseAbs().maxCoeff());
  }

  // gamma = eta = 0 leaves every agent at its prior.
  double worst_prior = 0.0;
  {
    CounterRng rng = stream_rng(801);
    const Model env = random_mdp(3, 2, 3, rng);
    SeededSampler sampler(kBase, 802);
    ModelClass cls = make_perturbation_class(env, 6, 0.3, sampler);
    cls.prior = random_simplex(6, rng);
    LossLedger mb = make_model_ledger(6), ps = make_model_ledger(6);
    for (int e = 0; e < 5; ++e) {
      for (int stage = 1; stage <= 3; ++stage) {
        const Trajectory tau = sample_episode(std::get<TabularMDP>(env), cls.members[e % 6].policy, rng);
        accumulate_model_based(mb, cls, LedgerEntry{e, stage, 0, {tau}});
        accumulate_psr(ps, cls, LedgerEntry{e, stage - 1, 0, {tau}});
      }
    }
    worst_prior = std::max(worst_prior, (model_based_posterior_update(mb, cls, 0.0, 0.0).probabilities() - cls.prior)
                                            .cwiseAbs()
                                            .maxCoeff());
    worst_prior = std::max(worst_prior,
                           (psr_posterior_update(ps, cls, 0.0, 0.0).probabilities() - cls.prior).cwiseAbs().maxCoeff());

    std::vector<TabularMDP> mdps;
    for (const auto& m : cls.members) mdps.push_back(std::get<TabularMDP>(m.model));
    LayeredValueClass vcls = value_class_from_models(mdps, std::get<TabularMDP>(env));
    for (auto& p : vcls.layer_priors) p = random_simplex(static_cast<int>(p.size()), rng);
    LossLedger mf = make_value_ledger(vcls);
    for (int e = 0; e < 5; ++e) {
      for (int stage = 1; stage <= 3; ++stage) {
        const Trajectory tau =
            sample_episode(std::get<TabularMDP>(env), HistoryPolicy::uniform(3, 3, 2), rng);
        accumulate_model_free(mf, vcls, LedgerEntry{e, stage, 0, {tau}});
      }
    }
    const PosteriorState post =
        model_free_posterior_update(mf, vcls, std::get<TabularMDP>(env).initial(), 0.0, 0.0);
    const auto marg = post.marginals();
    for (int k = 0; k < 3; ++k) {
      worst_prior = std::max(worst_prior, (marg[k] - vcls.layer_priors[k]).cwiseAbs().maxCoeff());
    }

    const PoInstance inst = pobilinear_instance();
    LossLedger po = make_pobilinear_ledger(inst.cls.size());
    for (int stage = 1; stage <= 2; ++stage) {
      LedgerEntry entry{0, stage, 0, {}};
      for (int b = 0; b < 20; ++b) entry.samples.push_back(sample_episode(inst.env, inst.cls.members[3].policy, rng));
      accumulate_pobilinear(po, inst.cls, std::move(entry), 20);
    }
    worst_prior = std::max(
        worst_prior, (pobilinear_posterior_update(po, inst.cls, 0.0, 0.0).probabilities() - inst.cls.prior).cwiseAbs().maxCoeff());
  }

  ensure_mdp_runs();
  ensure_psr_runs();
  ensure_pobilinear_runs();
  double worst_norm = 0.0;
  for (const auto* runs : {&runs_.mdp_runs, &runs_.psr_runs, &runs_.pobilinear_runs, &runs_.pobilinear_uniform_runs}) {
    for (const auto& run : *runs) worst_norm = std::max(worst_norm, run.max_normalization_error);
  }
  r.passed = worst_marg <= 1e-12 && worst_prob <= 1e-12 && worst_prior <= 1e-12 && worst_norm <= 1e-12;
  r.detail = "chain vs joint: marginal diff " + num(worst_marg) + ", tuple diff " + num(worst_prob) +
             "; gamma=eta=0 vs prior " + num(worst_prior) + "; normalization error over runs " + num(worst_norm) +
             " (tol 1e-12)";
  return r;
}

CriterionResult AcceptanceSuite::planning() {
  CriterionResult r;
  r.name = "planning oracle exactness";
  double worst_mdp = 0.0, worst_tree = 0.0;
  for (int i = 0; i < 50; ++i) {
    CounterRng rng = stream_rng(900, i);
    const TabularMDP mdp = random_mdp(3, 2, 3, rng);
    const MdpPlan plan = plan_mdp(mdp);
    worst_mdp = std::max(worst_mdp, std::abs(plan.value - oracle::brute_force_mdp_value(mdp)));
    worst_tree = std::max(worst_tree, std::abs(plan_history_tree(as_pomdp(mdp)).value - plan.value));
  }
  r.passed = worst_mdp <= 1e-12 && worst_tree <= 1e-10;
  r.detail = "50 MDPs: plan vs enumeration " + num(worst_mdp) + " (tol 1e-12); history tree vs plan " +
             num(worst_tree) + " (tol 1e-10)";
  return r;
}

CriterionResult AcceptanceSuite::pobilinear() {
  CriterionResult r;
  r.name = "po-bilinear sanity";
  const PoInstance inst = pobilinear_instance();
  const auto& truth = inst.cls.members[inst.cls.truth];
  const double residual = link_residual(inst.env, truth.policy, truth.link);
  // Batch-mean loss of (pi*, g^{pi*}) at 10^4 samples per stage.
  constexpr int kN = 10000;
  SeededSampler sampler(kBase, 1000);
  double worst_z = 0.0;
  for (int h = 1; h <= inst.env.horizon(); ++h) {
    const HistoryPolicy pi = compose_exploration(truth.policy, h, ExplorationKind::kVType);
    double sum = 0.0, sq = 0.0;
    for (int b = 0; b < kN; ++b) {
      const double l = pobilinear_loss(truth, sample_episode(inst.env, pi, sampler), h - 1);
      sum += l;
      sq += l * l;
    }
    const double m = sum / kN;
    const double sd = std::sqrt(std::max(0.0, sq / kN - m * m) * kN / (kN - 1));
    worst_z = std::max(worst_z, std::abs(m) / (sd / std::sqrt(static_cast<double>(kN))));
  }
  ensure_pobilinear_runs();
  std::vector<double> agent, uniform;
  for (const auto& run : runs_.pobilinear_runs) agent.push_back(run.records.back().regret_cum);
  for (const auto& run : runs_.pobilinear_uniform_runs) uniform.push_back(run.records.back().regret_cum);
  const auto& first = runs_.pobilinear_runs.front();
  const double episodes_per_round = static_cast<double>(first.n_batch) * first.stages;
  r.passed = worst_z <= 3.0 && residual <= 1e-10 && mean(agent) < mean(uniform);
  r.detail = "link residual " + num(residual) + "; batch-mean |z| max " + num(worst_z) + " (need <= 3); " +
             std::to_string(first.records.size()) + " rounds of " + num(episodes_per_round) +
             " episodes: mean cumulative regret agent " + num(mean(agent) * episodes_per_round) + " vs uniform " +
             num(mean(uniform) * episodes_per_round);
  return r;
}

}  // namespace geclab
