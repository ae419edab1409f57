#pragma once

#include <string>
#include <vector>

#include "specq/sx.hpp"

namespace specq {

// A bank of N FCFS queues fed by one Poisson stream of total rate
// arrival_intensity * N. A job is dispatched to queue i with probability
// dispatch_prob[i]; if its first execution is killed at timeout[i] it is
// re-routed to queue j with probability reroute_prob[j] and then runs to
// completion there. Construction-time validation throws
// std::invalid_argument("invalid config: ...").
struct NetworkConfig {
  int n_queues = 1;
  double arrival_intensity = 0;        // per-queue lambda
  std::vector<double> service_rate;    // mu_i
  std::vector<double> dispatch_prob;   // p0
  std::vector<double> reroute_prob;    // p1 (same for every source queue)
  std::vector<double> timeout;         // tau_i; +infinity disables the kill
  SXModel model;
};

void validate(const NetworkConfig& cfg);

NetworkConfig make_symmetric_config(int n_queues, double lambda,
                                    const SXModel& model, double tau);

// Nominal per-queue utilization: first-visit occupancy plus the re-routed
// work arriving from every queue's kills. Every entry below 1 means the
// network is stable.
std::vector<double> nominal_load(const NetworkConfig& cfg);

// Single-queue view of the symmetric system at unit service rate:
// rho(tau) = lambda * (E[eta1 ^ tau] + P(eta1 > tau) E[eta2 | eta1 > tau]).
double rho_symmetric(double lambda, const SXModel& m, double tau);

// rho(tau) / (lambda E[eta1]); below 1 exactly when the kill-and-reroute
// policy shrinks the offered work.
double load_reduction(const SXModel& m, double tau);

// True when killing at tau strictly reduces offered work, i.e. the expected
// retry size is smaller than the expected unfinished work it replaces.
// Throws "degenerate conditioning" when P(eta1 > tau) = 0.
bool timeout_reduces_load(const SXModel& m, double tau);

// True when, for every value x of the slowdown factor, a fresh copy is
// cheaper in expectation than insisting on the unfinished one:
// E[min(S x, z)] < P(S x <= z) E[S] x for all x in supp(X). Continuous X is
// checked on a 1000-point quantile grid.
bool restart_beats_continuation(const SXModel& m, double z);

struct TimeoutSolution {
  double tau_star = 0;
  double rho_at_star = 0;        // utilization at the supplied lambda
  double load_reduction_at_star = 0;
  std::string method;            // "hazard-rule" or "direct-minimization"
  // Diagnostics collected on the search grid.
  bool hazard_nonincreasing = false;
  bool threshold_ratio_nondecreasing = false;
  bool flat_load = false;        // rho(tau) numerically constant
  int grid_points = 0;
};

// Load-optimal kill time for the symmetric unit-rate system. When eta1 has a
// density the first-order rule is used: the smallest tau where the eta1
// hazard falls to (1 + d/dtau E[eta2|eta1>tau]) / E[eta2|eta1>tau]. When
// eta1 is discrete, rho is minimized directly over a grid refined around the
// atoms. The search interval defaults to the [1e-4, 1 - 1e-6] quantile range
// of eta1 and is widened tenfold (twice) if no crossing is found; a search
// that still fails throws std::domain_error("no finite crossing in interval").
TimeoutSolution optimal_timeout(const SXModel& m, double lambda = 1.0);
TimeoutSolution optimal_timeout(const SXModel& m, double lambda, double lo,
                                double hi);

// Expected remaining cost at age t of a policy that kills at tau:
//   V_tau(t) = [ E[eta2|eta1>tau] P(eta1>tau) + int_t^tau P(eta1>s) ds ]
//              / P(eta1 > t).
// V_tau(tau) = E[eta2|eta1>tau] and V_tau(0) = rho(tau)/lambda.
double value_function(const SXModel& m, double tau, double t);

// Stationary response-time estimate for the symmetric system, treating the
// two execution attempts as one batch arrival into an M/G/1 queue.
struct ResponsePrediction {
  double batch_second_moment = 0;  // M
  double mean_wait = 0;            // W
  double mean_response = 0;        // limit of the per-job response time
  double utilization = 0;          // rho(tau)
};

// Throws "unstable" when rho(tau) >= 1 and "infinite moment" when the
// required second moments do not exist.
ResponsePrediction predict_response(double lambda, const SXModel& m,
                                    double tau);

// Best-case comparison for heterogeneous dispatch under homogeneous rates:
// the worst nominal load of cfg can never beat the best symmetric load.
struct LoadGap {
  double max_nominal_load = 0;
  double best_symmetric_load = 0;
};

LoadGap nominal_vs_symmetric_gap(const NetworkConfig& cfg);

}  // namespace specq
