#pragma once

#include <iosfwd>
#include <vector>

#include "specq/analytic.hpp"

namespace specq {

// Fluid mass is tracked per job class:
//   kCompletes    (c,i): first visits to queue i that finish before tau_i
//   kUncompleted  (u,i): first visits to queue i that will be killed
//   kRerouted     (j,i): second executions at queue i of jobs killed at j
enum class FluidClass { kCompletes, kUncompleted, kRerouted };

struct ClassId {
  FluidClass kind;
  int queue;      // queue holding the mass
  int from = -1;  // source queue, kRerouted only
};

// Deterministic continuum view of the network: class masses plus cumulative
// busy time per class and idle time per queue.
struct FluidState {
  int n_queues = 0;
  double t = 0;
  std::vector<double> completing;   // (c,i)
  std::vector<double> uncompleted;  // (u,i)
  std::vector<double> rerouted;     // (j,i) at index from * n_queues + to
  std::vector<double> busy_time_completing;
  std::vector<double> busy_time_uncompleted;
  std::vector<double> busy_time_rerouted;
  std::vector<double> idle_time;    // per queue
};

FluidState make_fluid_state(int n_queues);
double mass(const FluidState& s, const ClassId& id);
void set_mass(FluidState& s, const ClassId& id, double value);
double queue_mass(const FluidState& s, int queue);
double total_mass(const FluidState& s);

struct LyapunovRecord {
  std::vector<double> per_queue;  // G_i
  double max = 0;                 // G
};

// Workload destined to queue i (present mass plus the re-routed share of
// pending kills anywhere), weighted by class service means and scaled by
// mu_i / p1_i. While queue i is busy it drifts at exactly (rho_i - 1) *
// mu_i / p1_i. Requires every re-route probability to be positive.
LyapunovRecord lyapunov(const FluidState& s, const NetworkConfig& cfg);

struct FluidTrajectory {
  // every record_every-th state, always including the initial and final ones
  std::vector<FluidState> states;
  // full-resolution traces with one entry per step, including t = 0
  std::vector<double> times;
  std::vector<double> lyapunov_max;  // empty when some p1_i = 0
  std::vector<double> total_mass_trace;
};

// Explicit Euler integration. Each queue splits its unit capacity among its
// nonempty classes proportionally to class mass (work-conserving). Outflows
// are clamped so masses never go negative; the clamped (effective) outflow
// is what feeds downstream classes and the busy-time counters. Throws
// std::invalid_argument on a nonpositive step or a horizon below one step.
FluidTrajectory fluid_integrate(const NetworkConfig& cfg,
                                const FluidState& initial, double horizon,
                                double step, int record_every = 1);

// 1e-3 times the smallest finite class service mean of cfg.
double default_fluid_step(const NetworkConfig& cfg);

// Columns: t,G,G_1..G_N,total_mass; one row per recorded state.
void write_trajectory_csv(std::ostream& out, const FluidTrajectory& traj,
                          const NetworkConfig& cfg);

}  // namespace specq
