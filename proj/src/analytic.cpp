#include "specq/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "specq/quadrature.hpp"

namespace specq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void config_error(const char* what) {
  throw std::invalid_argument(std::string("invalid config: ") + what);
}

bool is_prob_vector(const std::vector<double>& p) {
  double total = 0;
  for (double v : p) {
    if (v < 0 || v > 1) return false;
    total += v;
  }
  return std::fabs(total - 1.0) <= 1e-12;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  const double la = std::log(lo), lb = std::log(hi);
  for (int i = 0; i < n; ++i)
    g[i] = std::exp(la + (lb - la) * i / (n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

}  // namespace

void validate(const NetworkConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(cfg.n_queues);
  if (cfg.n_queues < 1) config_error("need at least one queue");
  if (!(cfg.arrival_intensity >= 0)) config_error("negative arrival intensity");
  if (cfg.service_rate.size() != n || cfg.dispatch_prob.size() != n ||
      cfg.reroute_prob.size() != n || cfg.timeout.size() != n)
    config_error("vector sizes must all equal the queue count");
  for (double mu : cfg.service_rate)
    if (!(mu > 0)) config_error("service rates must be positive");
  if (!is_prob_vector(cfg.dispatch_prob))
    config_error("dispatch probabilities must be a distribution");
  if (!is_prob_vector(cfg.reroute_prob))
    config_error("re-route probabilities must be a distribution");
  for (double tau : cfg.timeout)
    if (std::isnan(tau) || !(tau > 0)) config_error("timeouts must be > 0");
}

NetworkConfig make_symmetric_config(int n_queues, double lambda,
                                    const SXModel& model, double tau) {
  NetworkConfig cfg;
  cfg.n_queues = n_queues;
  cfg.arrival_intensity = lambda;
  cfg.model = model;
  const std::size_t n = static_cast<std::size_t>(n_queues);
  cfg.service_rate.assign(n, 1.0);
  cfg.dispatch_prob.assign(n, 1.0 / n_queues);
  cfg.reroute_prob.assign(n, 1.0 / n_queues);
  cfg.timeout.assign(n, tau);
  validate(cfg);
  return cfg;
}

std::vector<double> nominal_load(const NetworkConfig& cfg) {
  validate(cfg);
  const std::size_t n = static_cast<std::size_t>(cfg.n_queues);
  const double total_rate = cfg.arrival_intensity * cfg.n_queues;
  std::vector<SxMoments> mom(n);
  for (std::size_t j = 0; j < n; ++j)
    mom[j] = sx_moments(cfg.model, cfg.service_rate[j], cfg.timeout[j]);
  // expected retry work generated per dispatched job, over all source queues
  double rerouted_work = 0;
  for (std::size_t j = 0; j < n; ++j)
    rerouted_work +=
        cfg.dispatch_prob[j] * mom[j].timeout_prob * mom[j].retry_work;
  std::vector<double> rho(n);
  for (std::size_t i = 0; i < n; ++i)
    rho[i] = total_rate * (cfg.dispatch_prob[i] * mom[i].first_visit_time +
                           cfg.reroute_prob[i] * rerouted_work /
                               cfg.service_rate[i]);
  return rho;
}

double rho_symmetric(double lambda, const SXModel& m, double tau) {
  if (!(lambda >= 0))
    throw std::invalid_argument("rho_symmetric: lambda must be >= 0");
  const auto mm = sx_moments(m, 1.0, tau);
  return lambda * (mm.first_visit_time + mm.timeout_prob * mm.retry_work);
}

double load_reduction(const SXModel& m, double tau) {
  return rho_symmetric(1.0, m, tau) / eta1_mean(m);
}

bool timeout_reduces_load(const SXModel& m, double tau) {
  const double surv = eta1_ccdf(m, tau);
  if (surv <= 0) {
    char buf[72];
    std::snprintf(buf, sizeof(buf),
                  "degenerate conditioning: P(eta1 > %g) = 0", tau);
    throw std::domain_error(buf);
  }
  const double retry = eta2_mean_given_timeout(m, tau);
  const double residual = eta1_upper_mean(m, tau) / surv - tau;
  return retry < residual;
}

bool restart_beats_continuation(const SXModel& m, double z) {
  const double es = mean(m.S);
  auto holds_at = [&](double x) {
    if (!(x > 0)) return true;  // no work at x = 0, nothing to compare
    const double lhs = truncated_mean(m.S, z / x);
    const double rhs = (1.0 - ccdf(m.S, z / x)) * es;
    return lhs < rhs;
  };
  if (const auto* det = std::get_if<Deterministic>(&m.X))
    return holds_at(det->value);
  if (const auto* bi = std::get_if<Bimodal>(&m.X))
    return holds_at(bi->s_small) && holds_at(bi->s_large);
  constexpr int kGrid = 1000;  // documented quantile-grid approximation
  for (int k = 0; k < kGrid; ++k)
    if (!holds_at(quantile(m.X, (k + 0.5) / kGrid))) return false;
  return true;
}

namespace {

// (1 + d/dt E[eta2 | eta1 > t]) / E[eta2 | eta1 > t] - hazard_eta1(t);
// the load-optimal kill time is the first nonnegative value.
double kill_margin(const SXModel& m, double t) {
  const double e2 = eta2_mean_given_timeout(m, t);
  const double e2p = eta2_mean_given_timeout_deriv(m, t);
  return (1.0 + e2p) / e2 - eta1_hazard(m, t);
}

TimeoutSolution finish(const SXModel& m, double lambda, double tau,
                       TimeoutSolution sol) {
  sol.tau_star = tau;
  sol.rho_at_star = rho_symmetric(lambda, m, tau);
  sol.load_reduction_at_star = sol.rho_at_star / (lambda * eta1_mean(m));
  return sol;
}

void grid_diagnostics(const SXModel& m, const std::vector<double>& grid,
                      TimeoutSolution& sol) {
  sol.grid_points = static_cast<int>(grid.size());
  bool hz_ok = true, ratio_ok = true;
  double prev_h = kInf, prev_r = -kInf;
  double rho_min = kInf, rho_max = -kInf;
  for (double t : grid) {
    const double surv = eta1_ccdf(m, t);
    if (surv <= 0) break;
    if (eta1_has_density(m)) {
      const double h = eta1_hazard(m, t);
      if (h > prev_h * (1 + 1e-9)) hz_ok = false;
      prev_h = h;
      const double e2 = eta2_mean_given_timeout(m, t);
      const double r = (1.0 + eta2_mean_given_timeout_deriv(m, t)) / e2;
      if (r < prev_r * (1 - 1e-9) - 1e-12) ratio_ok = false;
      prev_r = r;
    }
    const double rho = rho_symmetric(1.0, m, t);
    rho_min = std::min(rho_min, rho);
    rho_max = std::max(rho_max, rho);
  }
  sol.hazard_nonincreasing = eta1_has_density(m) && hz_ok;
  sol.threshold_ratio_nondecreasing = eta1_has_density(m) && ratio_ok;
  sol.flat_load = rho_max - rho_min <= 1e-9 * std::max(rho_max, 1e-300);
}

TimeoutSolution solve_by_hazard_rule(const SXModel& m, double lambda,
                                     double lo, double hi) {
  constexpr int kGridSize = 400;
  // keep the whole search strictly inside the support of eta1
  const double cap = eta1_quantile(m, 1.0 - 1e-12);
  hi = std::min(hi, cap);
  for (int expansion = 0;; ++expansion) {
    const auto grid = log_grid(lo, hi, kGridSize);
    int first_ok = -1;
    for (int i = 0; i < kGridSize; ++i) {
      if (kill_margin(m, grid[i]) >= 0) {
        first_ok = i;
        break;
      }
    }
    if (first_ok < 0) {
      if (expansion < 2 && hi < cap) {
        hi = std::min(hi * 10, cap);
        continue;
      }
      char buf[96];
      std::snprintf(buf, sizeof(buf),
                    "no finite crossing in interval [%g, %g]", lo, hi);
      throw std::domain_error(buf);
    }
    TimeoutSolution sol;
    sol.method = "hazard-rule";
    grid_diagnostics(m, grid, sol);
    if (first_ok == 0) return finish(m, lambda, lo, sol);
    double a = grid[first_ok - 1], b = grid[first_ok];
    for (int it = 0; it < 200 && b - a > 1e-11 * std::max(1.0, b); ++it) {
      const double mid = 0.5 * (a + b);
      (kill_margin(m, mid) >= 0 ? b : a) = mid;
    }
    return finish(m, lambda, b, sol);
  }
}

TimeoutSolution solve_by_direct_minimization(const SXModel& m, double lambda,
                                             double lo, double hi) {
  std::vector<double> cand = log_grid(lo, hi, 1024);
  for (double a : eta1_atoms(m))
    if (a >= lo && a <= hi) cand.push_back(a);
  std::sort(cand.begin(), cand.end());
  auto rho_of = [&](double t) { return rho_symmetric(1.0, m, t); };
  auto best_of = [&](const std::vector<double>& ts) {
    std::size_t best = 0;
    double best_rho = kInf;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double r = rho_of(ts[i]);
      // on ties keep the earliest, i.e. the smallest tau
      if (r < best_rho * (1 - 1e-12)) {
        best = i;
        best_rho = r;
      }
    }
    return best;
  };
  std::size_t b = best_of(cand);
  double wa = b > 0 ? cand[b - 1] : cand[b];
  double wb = b + 1 < cand.size() ? cand[b + 1] : cand[b];
  double best_tau = cand[b];
  for (int round = 0; round < 6; ++round) {
    std::vector<double> fine(65);
    for (int i = 0; i <= 64; ++i) fine[i] = wa + (wb - wa) * i / 64.0;
    for (double a : eta1_atoms(m))
      if (a >= wa && a <= wb) fine.push_back(a);
    std::sort(fine.begin(), fine.end());
    const std::size_t fb = best_of(fine);
    best_tau = fine[fb];
    wa = fb > 0 ? fine[fb - 1] : fine[fb];
    wb = fb + 1 < fine.size() ? fine[fb + 1] : fine[fb];
  }
  TimeoutSolution sol;
  sol.method = "direct-minimization";
  grid_diagnostics(m, log_grid(lo, hi, 256), sol);
  return finish(m, lambda, best_tau, sol);
}

}  // namespace

TimeoutSolution optimal_timeout(const SXModel& m, double lambda, double lo,
                                double hi) {
  if (!(lambda > 0))
    throw std::invalid_argument("optimal_timeout: lambda must be positive");
  if (!(lo > 0) || !(hi > lo))
    throw std::invalid_argument("optimal_timeout: need 0 < lo < hi");
  if (eta1_has_density(m)) return solve_by_hazard_rule(m, lambda, lo, hi);
  return solve_by_direct_minimization(m, lambda, lo, hi);
}

TimeoutSolution optimal_timeout(const SXModel& m, double lambda) {
  const double lo = std::max(eta1_quantile(m, 1e-4), 1e-12);
  const double hi = eta1_quantile(m, 1.0 - 1e-6);
  return optimal_timeout(m, lambda, lo, std::max(hi, lo * 2));
}

double value_function(const SXModel& m, double tau, double t) {
  if (!(t >= 0) || !(t <= tau))
    throw std::invalid_argument("value_function: need 0 <= t <= tau");
  const double surv_t = eta1_ccdf(m, t);
  if (surv_t <= 0) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "zero survivor mass at t=%g", t);
    throw std::domain_error(buf);
  }
  const double surv_tau = eta1_ccdf(m, tau);
  const double retry_term =
      surv_tau > 0 ? eta2_mean_given_timeout(m, tau) * surv_tau : 0.0;
  const double tail = integrate_split(
      [&](double s) { return eta1_ccdf(m, s); }, t, tau, eta1_knots(m),
      {1e-10, 1e-13, 48});
  return (retry_term + tail) / surv_t;
}

ResponsePrediction predict_response(double lambda, const SXModel& m,
                                    double tau) {
  if (!(lambda > 0))
    throw std::invalid_argument("predict_response: lambda must be positive");
  const auto mm = sx_moments(m, 1.0, tau);
  ResponsePrediction out;
  out.utilization =
      lambda * (mm.first_visit_time + mm.timeout_prob * mm.retry_work);
  if (out.utilization >= 1) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "unstable: rho(tau)=%g >= 1",
                  out.utilization);
    throw std::domain_error(buf);
  }
  const double p = mm.timeout_prob;
  out.batch_second_moment =
      (mm.first_visit_time_sq + mm.retry_work_sq * p) / (1.0 + p);
  if (!std::isfinite(out.batch_second_moment))
    throw std::domain_error(
        "infinite second moment: no stationary waiting-time prediction");
  out.mean_wait = 0.5 * lambda * (1.0 + p) * out.batch_second_moment /
                  (1.0 - out.utilization);
  out.mean_response =
      (1.0 + p) * out.mean_wait + out.utilization / lambda;
  return out;
}

LoadGap nominal_vs_symmetric_gap(const NetworkConfig& cfg) {
  for (double mu : cfg.service_rate)
    if (mu != 1.0)
      throw std::invalid_argument(
          "requires homogeneous rates: all service rates must equal 1");
  LoadGap gap;
  const auto rho = nominal_load(cfg);
  gap.max_nominal_load = *std::max_element(rho.begin(), rho.end());
  const double lam = cfg.arrival_intensity;
  // the no-kill policy (tau = infinity) is always admissible
  gap.best_symmetric_load = lam * eta1_mean(cfg.model);
  if (lam > 0) {
    try {
      gap.best_symmetric_load = std::min(
          gap.best_symmetric_load, optimal_timeout(cfg.model, lam).rho_at_star);
    } catch (const std::domain_error&) {
      // empty stopping set: killing never pays, keep the no-kill load
    }
  }
  return gap;
}

}  // namespace specq
