#include "geclab/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "geclab/errors.hpp"
#include "geclab/linalg.hpp"
#include "geclab/planning.hpp"

namespace geclab {

double information_gain(const std::vector<Eigen::VectorXd>& xs, double eps) {
  if (!(eps > 0.0)) throw ConfigError("information_gain needs eps > 0");
  if (xs.empty()) return 0.0;
  const Eigen::Index d = xs.front().size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d);
  for (const auto& x : xs) m.noalias() += (x * x.transpose()) / eps;
  return log_det_spd(m);
}

InequalityCheck elliptical_potential_check(const std::vector<Eigen::VectorXd>& xs,
                                           const Eigen::MatrixXd& lambda0, double tol) {
  InequalityCheck out;
  Eigen::MatrixXd lambda = lambda0;
  const double logdet0 = log_det_spd(lambda0);
  for (const auto& x : xs) {
    Eigen::LLT<Eigen::MatrixXd> llt(lambda);
    const double quad = x.dot(llt.solve(x));
    out.lhs += std::min(1.0, quad);
    lambda.noalias() += x * x.transpose();
  }
  out.rhs = 2.0 * (log_det_spd(lambda) - logdet0);
  out.margin = out.rhs - out.lhs;
  out.holds = out.lhs <= out.rhs + tol;
  return out;
}

namespace {

double coupling(const std::vector<Eigen::VectorXd>& w, const Eigen::VectorXd& x) {
  double s = 0.0;
  for (const auto& wj : w) s += std::abs(wj.dot(x));
  return s;
}

}  // namespace

double eluder_history_sum(const EluderInstance& inst, int t) {
  double total = 0.0;
  for (int s = 0; s < t; ++s) {
    for (std::size_t i = 0; i < inst.x[s].size(); ++i) {
      const double c = coupling(inst.w[t], inst.x[s][i]);
      total += inst.p[s][static_cast<Eigen::Index>(i)] * c * c;
    }
  }
  return total;
}

InequalityCheck l2_eluder_check(const EluderInstance& inst, double tol) {
  const int rounds = static_cast<int>(inst.w.size());
  if (static_cast<int>(inst.x.size()) != rounds || static_cast<int>(inst.p.size()) != rounds ||
      inst.gamma.size() != rounds) {
    throw ConfigError("eluder instance: w, x, p and gamma need one entry per round");
  }
  if (!(inst.r > 0.0)) throw ConfigError("eluder instance: R must be positive");
  for (int t = 0; t < rounds; ++t) {
    std::ostringstream where;
    where << "eluder instance round " << t << ": ";
    if (inst.p[t].size() != static_cast<Eigen::Index>(inst.x[t].size())) {
      throw ConfigError(where.str() + "p and x sizes differ");
    }
    if (std::abs(inst.p[t].sum() - 1.0) > tol || inst.p[t].minCoeff() < -tol) {
      throw ConfigError(where.str() + "p is not a distribution");
    }
    const double hist = eluder_history_sum(inst, t);
    if (hist > inst.gamma[t] + tol) throw ConfigError(where.str() + "history constraint exceeds gamma");
    double xnorm = 0.0;
    for (std::size_t i = 0; i < inst.x[t].size(); ++i) {
      xnorm += inst.p[t][static_cast<Eigen::Index>(i)] * inst.x[t][i].squaredNorm();
    }
    if (xnorm > inst.r_x * inst.r_x + tol) throw ConfigError(where.str() + "x exceeds R_x");
    double wnorm = 0.0;
    for (const auto& wj : inst.w[t]) wnorm += wj.norm();
    if (wnorm > inst.r_w + tol) throw ConfigError(where.str() + "w exceeds R_w");
  }
  InequalityCheck out;
  for (int t = 0; t < rounds; ++t) {
    double v = 0.0;
    for (std::size_t i = 0; i < inst.x[t].size(); ++i) {
      v += inst.p[t][static_cast<Eigen::Index>(i)] * coupling(inst.w[t], inst.x[t][i]);
    }
    out.lhs += std::min(inst.r, v);
  }
  const double r2 = inst.r * inst.r;
  const double log_term = std::log1p(rounds * inst.r_x * inst.r_x * inst.r_w * inst.r_w / r2);
  out.rhs = std::sqrt(2.0 * inst.dim * (r2 * rounds + inst.gamma.sum()) * log_term);
  out.margin = out.rhs - out.lhs;
  out.holds = out.lhs <= out.rhs + tol;
  return out;
}

std::string to_string(BurnInForm form) {
  return form == BurnInForm::kPsr ? "sqrt(d*H*T)" : "2*sqrt(d*H*T)+eps*H*T";
}

double gec_burn_in(BurnInForm form, double d, int steps, int rounds, double eps) {
  const double base = std::sqrt(d * steps * static_cast<double>(rounds));
  if (form == BurnInForm::kPsr) return base;
  return 2.0 * base + eps * steps * static_cast<double>(rounds);
}

namespace {

int trace_steps(const GecTrace& trace) {
  for (const auto& row : trace.training) {
    if (!row.empty()) return static_cast<int>(row.size());
  }
  return 1;
}

}  // namespace

bool gec_inequality_holds(const GecTrace& trace, double d, BurnInForm form, double eps, double tol) {
  if (trace.training.size() != trace.prediction.size()) {
    throw ConfigError("trace: prediction and training lengths differ");
  }
  const int steps = trace_steps(trace);
  double pred = 0.0, train = 0.0;
  for (std::size_t t = 0; t < trace.prediction.size(); ++t) {
    pred += trace.prediction[t];
    for (double e : trace.training[t]) train += e;
    const double rhs = std::sqrt(d * train) + gec_burn_in(form, d, steps, static_cast<int>(t + 1), eps);
    if (pred > rhs + tol) return false;
  }
  return true;
}

GecCertificate gec_certificate(const GecTrace& trace, BurnInForm form, double eps) {
  GecCertificate cert;
  cert.burn_in_used = to_string(form);
  cert.discrepancy_kind = trace.discrepancy_kind;
  cert.mc_tolerance = trace.mc_tolerance;
  if (gec_inequality_holds(trace, 0.0, form, eps)) return cert;
  double lo = 0.0, hi = 1.0;
  while (!gec_inequality_holds(trace, hi, form, eps)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw ModelError("gec_certificate: no finite d satisfies the trace");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (gec_inequality_holds(trace, mid, form, eps)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  cert.d_hat = hi;
  return cert;
}

nlohmann::json gec_certificate_to_json(const GecCertificate& cert) {
  return {{"d_hat", cert.d_hat},
          {"burn_in_used", cert.burn_in_used},
          {"discrepancy_kind", cert.discrepancy_kind},
          {"mc_tolerance", cert.mc_tolerance}};
}

nlohmann::json gec_trace_to_json(const GecTrace& trace) {
  return {{"prediction", trace.prediction},
          {"training", trace.training},
          {"discrepancy_kind", trace.discrepancy_kind},
          {"mc_tolerance", trace.mc_tolerance}};
}

GecTrace gec_trace_from_json(const nlohmann::json& j) {
  try {
    GecTrace t;
    t.prediction = j.at("prediction").get<std::vector<double>>();
    t.training = j.at("training").get<std::vector<std::vector<double>>>();
    t.discrepancy_kind = j.value("discrepancy_kind", std::string());
    t.mc_tolerance = j.value("mc_tolerance", 0.0);
    if (t.training.size() != t.prediction.size()) {
      throw ConfigError("trace: prediction and training lengths differ");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("trace: ") + e.what());
  }
}

double be_gec_bound(double d_q, int horizon, int rounds) {
  return 2.0 * d_q * horizon * std::log(static_cast<double>(rounds));
}

double witness_gec_bound(double d_q, int horizon, int rounds, double eps, double kappa) {
  return 4.0 * d_q * horizon * std::log1p(rounds / (eps * kappa * kappa)) / (kappa * kappa);
}

double psr_gec_bound(double d_psr, int actions, int u_a, int horizon, int rounds, double alpha,
                     double delta) {
  const double a = actions, u = u_a, a4 = std::pow(alpha, 4);
  const double iota = 2.0 * std::log1p(4.0 * d_psr * a * a * u * u * delta * delta * rounds / a4);
  return d_psr * a * a * a * std::pow(u, 4) * horizon * iota / a4;
}

namespace {

using Intervals = std::vector<std::pair<double, double>>;  // disjoint half-open [lo, hi)

Intervals normalized(Intervals v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](const auto& p) { return !(p.first < p.second); }),
          v.end());
  std::sort(v.begin(), v.end());
  Intervals out;
  for (const auto& p : v) {
    if (!out.empty() && p.first <= out.back().second) {
      out.back().second = std::max(out.back().second, p.second);
    } else {
      out.push_back(p);
    }
  }
  return out;
}

Intervals intersect(const Intervals& a, const Intervals& b) {
  Intervals out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double lo = std::max(a[i].first, b[j].first);
    const double hi = std::min(a[i].second, b[j].second);
    if (lo < hi) out.emplace_back(lo, hi);
    if (a[i].second < b[j].second) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

}  // namespace

int de_dimension(const Eigen::MatrixXd& expectations, double eps, int cap) {
  if (!(eps >= 0.0)) throw ConfigError("de_dimension needs eps >= 0");
  // Equal measures cannot both appear: the second is never independent of the first.
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < expectations.cols(); ++j) {
    bool dup = false;
    for (Eigen::Index c : cols) dup = dup || expectations.col(c) == expectations.col(j);
    if (!dup) cols.push_back(j);
  }
  const int n = static_cast<int>(cols.size());
  if (n > cap || expectations.rows() > (1 << 20)) {
    std::ostringstream msg;
    msg << "de_dimension: " << n << " distinct measures exceed the cap " << cap;
    throw CapacityError(msg.str());
  }
  const Eigen::Index g_count = expectations.rows();
  const std::size_t masks = std::size_t{1} << n;
  std::vector<Intervals> feasible(masks);
  feasible[0] = {{eps, std::numeric_limits<double>::infinity()}};
  int best = 0;
  for (std::size_t mask = 0; mask < masks; ++mask) {
    if (feasible[mask].empty()) continue;
    best = std::max(best, static_cast<int>(__builtin_popcountll(mask)));
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(g_count);
    for (int b = 0; b < n; ++b) {
      if (mask >> b & 1) sums += expectations.col(cols[b]).cwiseAbs2();
    }
    for (int b = 0; b < n; ++b) {
      if (mask >> b & 1) continue;
      Intervals admit;
      for (Eigen::Index g = 0; g < g_count; ++g) {
        admit.emplace_back(std::sqrt(sums[g]), std::abs(expectations(g, cols[b])));
      }
      Intervals next = intersect(feasible[mask], normalized(std::move(admit)));
      if (next.empty()) continue;
      auto& slot = feasible[mask | (std::size_t{1} << b)];
      slot.insert(slot.end(), next.begin(), next.end());
      slot = normalized(std::move(slot));
    }
  }
  return best;
}

namespace {

int greedy_action(const Eigen::MatrixXd& q, int state) {
  Eigen::Index best = 0;
  q.row(state).maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

int be_dimension(const TabularMDP& env, const std::vector<ValueHypothesis>& cls, double eps,
                 ResidualType type, int cap) {
  const int horizon = env.horizon();
  const int states = env.num_states();
  std::vector<std::vector<Eigen::MatrixXd>> residuals;
  for (const auto& f : cls) residuals.push_back(bellman_residuals(env, f.q));
  // Roll-in state distributions of each member's greedy policy.
  std::vector<std::vector<Eigen::VectorXd>> rollin(cls.size());
  for (std::size_t g = 0; g < cls.size(); ++g) {
    Eigen::VectorXd d = env.initial();
    for (int k = 0; k < horizon; ++k) {
      rollin[g].push_back(d);
      Eigen::VectorXd next = Eigen::VectorXd::Zero(states);
      for (int x = 0; x < states; ++x) {
        next += d[x] * env.transition(k, greedy_action(cls[g].q[k], x)).col(x);
      }
      d = next;
    }
  }
  int best = 0;
  const auto n = static_cast<Eigen::Index>(cls.size());
  for (int k = 0; k < horizon; ++k) {
    Eigen::MatrixXd table(n, n);
    for (Eigen::Index f = 0; f < n; ++f) {
      for (Eigen::Index g = 0; g < n; ++g) {
        double e = 0.0;
        for (int x = 0; x < states; ++x) {
          const int a = type == ResidualType::kQ ? greedy_action(cls[g].q[k], x)
                                                 : greedy_action(cls[f].q[k], x);
          e += rollin[g][k][x] * residuals[f][k](x, a);
        }
        table(f, g) = e;
      }
    }
    best = std::max(best, de_dimension(table, eps, cap));
  }
  return best;
}

}  // namespace geclab
