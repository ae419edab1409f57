#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specq/dists.hpp"

namespace specq {

// How the size of a re-executed job relates to its first execution. The first
// execution requires eta1 = S1 * X units of work; a retry requires eta2, with
// the shared factor X common to both.
enum class RetryMode {
  kRestart,    // eta2 = S2 * X, S2 an independent copy of S
  kIdentical,  // eta2 = eta1
  kResume,     // eta2 = eta1 - (work already completed before the kill)
};

struct SXModel {
  DistributionSpec S = Deterministic(1.0);
  DistributionSpec X = Deterministic(1.0);
  RetryMode mode = RetryMode::kRestart;
};

std::string describe(const SXModel& m);

// ---- Law of the first-execution size eta1 = S * X ----

double eta1_mean(const SXModel& m);
double eta1_second_moment(const SXModel& m);
double eta1_ccdf(const SXModel& m, double t);  // strict P(eta1 > t)
// Density of eta1 where it exists; throws "atomic point" when both S and X
// are atomic (eta1 is then discrete).
double eta1_pdf(const SXModel& m, double t);
double eta1_hazard(const SXModel& m, double t);
double eta1_truncated_mean(const SXModel& m, double z);          // E[eta1 ^ z]
double eta1_truncated_second_moment(const SXModel& m, double z);  // E[(eta1^z)^2]
double eta1_upper_mean(const SXModel& m, double z);  // E[eta1 1{eta1 > z}]
double eta1_upper_second_moment(const SXModel& m, double z);
double eta1_quantile(const SXModel& m, double q);
std::vector<double> eta1_atoms(const SXModel& m);
// Points where the eta1 ccdf is not smooth: its atoms plus every product of
// a support endpoint or atom of S with one of X. Quadratures over the ccdf
// should split their panels here.
std::vector<double> eta1_knots(const SXModel& m);
bool eta1_has_density(const SXModel& m);

// ---- Conditional retry size ----

// E[eta2 | eta1 > t] for the model's retry mode (work units; a queue running
// at rate mu serves it in eta2 / mu time). For kResume the kill is assumed to
// happen after t units of work, i.e. eta2 = eta1 - t on {eta1 > t}.
// Throws std::domain_error("degenerate conditioning ...") when P(eta1 > t) = 0.
double eta2_mean_given_timeout(const SXModel& m, double t);
double eta2_second_moment_given_timeout(const SXModel& m, double t);

// Central finite-difference derivative of eta2_mean_given_timeout, except in
// the independent case (restart with deterministic X) where it is exactly 0.
double eta2_mean_given_timeout_deriv(const SXModel& m, double t);

// True when eta2 is independent of eta1 (restart mode, deterministic X).
bool eta2_independent(const SXModel& m);

// ---- Per-queue moment record ----

// Everything the load formulas need about one queue that runs at rate mu and
// kills first executions after tau time units. Sizes are expressed in work
// units except first_visit_*, which are occupancy times at this queue. The
// *_sq fields are +infinity when the law has no second moment.
struct SxMoments {
  double first_visit_time;      // E[(eta1/mu) ^ tau]
  double timeout_prob;          // P(eta1/mu > tau)
  double retry_work;            // E[eta2 | eta1/mu > tau], 0 if timeout_prob=0
  double first_visit_time_sq;   // E[((eta1/mu) ^ tau)^2]
  double retry_work_sq;         // E[eta2^2 | eta1/mu > tau], 0 likewise
};

// Exact moments (closed form over atoms of X, adaptive quadrature when X is
// continuous). tau may be +infinity.
SxMoments sx_moments(const SXModel& m, double mu, double tau);

// Plain Monte-Carlo estimate of the same record, plus standard errors and a
// combined per-visit workload statistic used to check utilization formulas.
struct SxMomentsMC {
  SxMoments value;
  SxMoments se;
  double total_work;     // mean of (eta1/mu ^ tau) + eta2 * 1{timeout}
  double total_work_se;
  std::uint64_t n;
  std::uint64_t n_timeout;
};

SxMomentsMC mc_oracle(const SXModel& m, double mu, double tau, std::uint64_t n,
                      std::uint64_t seed);

}  // namespace specq
